#include "stabman/parallel.hpp"
#include "stabman/stability.hpp"

#include <algorithm>
#include <map>

namespace stabman {

const std::vector<std::string>& gain_names() {
    static const std::vector<std::string> names{"kp_pll", "ki_pll", "kp_i", "ki_i", "kp_dc", "ki_dc"};
    return names;
}

std::string canonical_gain_name(const std::string& name) {
    static const std::map<std::string, std::string> aliases{
        {"k_p_pll", "kp_pll"}, {"k_i_pll", "ki_pll"}, {"k_p_i", "kp_i"},   {"k_i_i", "ki_i"},
        {"k_p_dc", "kp_dc"},   {"k_i_dc", "ki_dc"},   {"k_p_2dc", "kp_dc"}, {"k_i_2dc", "ki_dc"},
        {"kp_2dc", "kp_dc"},   {"ki_2dc", "ki_dc"}};
    const auto& names = gain_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) return name;
    auto it = aliases.find(name);
    if (it == aliases.end()) throw ValidationError("unknown parameter name '" + name + "'");
    return it->second;
}

Real& gain_ref(IbrControlParams& c, const std::string& name) {
    const std::string n = canonical_gain_name(name);
    if (n == "kp_pll") return c.kp_pll;
    if (n == "ki_pll") return c.ki_pll;
    if (n == "kp_i") return c.kp_i;
    if (n == "ki_i") return c.ki_i;
    if (n == "kp_dc") return c.kp_dc;
    return c.ki_dc;
}

Real gain_value(const IbrControlParams& c, const std::string& name) {
    IbrControlParams copy = c;
    return gain_ref(copy, name);
}

NetworkModel apply_parameters(const StudyCase& ctx, const std::vector<std::string>& names,
                              const std::vector<Real>& values) {
    if (names.size() != values.size())
        throw ValidationError("parameter point has " + std::to_string(values.size()) + " values for " +
                              std::to_string(names.size()) + " names");
    NetworkModel net = ctx.net;
    for (const auto& id : ctx.focus) {
        Device& dev = net.device(id);
        if (dev.kind != DeviceKind::IBR) throw ValidationError("focus device '" + id + "' is not an IBR");
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (!std::isfinite(values[i]) || values[i] < 0.0)
                throw ValidationError("parameter " + names[i] + " must be finite and >= 0");
            gain_ref(dev.ibr.control, names[i]) = values[i];
        }
    }
    return net;
}

StabilityVerdict is_ps_stable(const std::vector<std::string>& names, const std::vector<Real>& rho,
                              const ScenarioSet& scenarios, const StudyCase& ctx, const StabilityOptions& opts) {
    if (scenarios.size() == 0) throw ValidationError("scenario set is empty");
    const NetworkModel net = apply_parameters(ctx, names, rho);
    std::vector<ScenarioResult> results(scenarios.size());
    parallel_for(scenarios.size(), [&](std::size_t i) { results[i] = scenario_abscissa(net, scenarios.scenarios[i], opts); });

    std::vector<Real> abscissae;
    for (const auto& r : results) abscissae.push_back(r.abscissa);
    StabilityVerdict v = verdict_from_abscissae(abscissae, opts.stab_margin);
    for (std::size_t i = 0; i < results.size(); ++i) {
        v.reasons[i] = results[i].reason;
        v.worst[i] = results[i].worst;
    }
    return v;
}

Real pssa(const std::vector<std::string>& names, const std::vector<Real>& rho, const std::vector<StudyCase>& cases,
          const ScenarioSet& scenarios, const StabilityOptions& opts) {
    if (cases.empty()) throw ValidationError("pssa needs at least one connection combination");
    if (scenarios.size() == 0) throw ValidationError("scenario set is empty");
    std::vector<NetworkModel> nets;
    for (const auto& c : cases) nets.push_back(apply_parameters(c, names, rho));
    const std::size_t ns = scenarios.size();
    std::vector<Real> a(cases.size() * ns);
    parallel_for(a.size(), [&](std::size_t k) {
        a[k] = scenario_abscissa(nets[k / ns], scenarios.scenarios[k % ns], opts).abscissa;
    });
    Real worst = -std::numeric_limits<Real>::infinity();
    for (Real x : a) worst = std::isnan(x) ? std::numeric_limits<Real>::infinity() : std::max(worst, x);
    return worst;
}

}  // namespace stabman
