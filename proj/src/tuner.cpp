#include "stabman/tuner.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace stabman {

void TunerProblem::validate() const {
    domain.validate();
    for (const auto& n : domain.names) canonical_gain_name(n);
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    if (cases.empty()) throw ValidationError("at least one connection combination is required");
    if (scenarios.size() == 0) throw ValidationError("scenario set is empty");
    if (!(omega_nom > 0.0)) throw ValidationError("nominal frequency must be positive");
}

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

/// Normalized loop constraints, <= 0 when C1-C3 hold.
std::vector<Real> loop_constraints(const LoopMetrics& m, Real omega_nom) {
    std::vector<Real> g;
    if (m.current.omega_c && m.pll.omega_c)
        g.push_back((10.0 * *m.pll.omega_c - *m.current.omega_c) / std::max(*m.current.omega_c, 1e-12));
    else
        g.push_back(1.0);
    g.push_back(m.dc.omega_c ? (*m.dc.omega_c - 2.0 * omega_nom) / (2.0 * omega_nom) : 1.0);
    for (const auto* l : {&m.current, &m.pll, &m.dc})
        g.push_back(l->phase_margin ? (45.0 - *l->phase_margin) / 45.0 + 1e-12 : 1.0);
    return g;
}

nlohmann::json optional_json(const std::optional<Real>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<Real> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<Real>();
}

}  // namespace

ParameterDomain default_tuning_domain(DcVariant v) {
    return {{"kp_pll", "ki_pll", "kp_i", "ki_i", "kp_dc", "ki_dc"},
            {0, 0, 0, 0, 0, 0},
            {0.35, 17, 4, 860, v == DcVariant::Vdc ? 3.0 : 1.5, 300}};
}

TunerResult tune(const TunerProblem& p) {
    p.validate();
    std::vector<std::string> names;
    for (const auto& n : p.domain.names) names.push_back(canonical_gain_name(n));

    // objective and the alpha constraint share one pssa run per point
    std::map<std::vector<Real>, Real> cache;
    std::mutex cache_mutex;
    auto alpha_at = [&](const std::vector<Real>& rho) {
        {
            std::lock_guard lock(cache_mutex);
            if (auto it = cache.find(rho); it != cache.end()) return it->second;
        }
        const Real a = pssa(names, rho, p.cases, p.scenarios, p.stability);
        std::lock_guard lock(cache_mutex);
        cache.emplace(rho, a);
        return a;
    };
    auto objective = [&](const std::vector<Real>& rho) { return alpha_at(rho); };
    auto constraints = [&](const std::vector<Real>& rho) {
        const Real a = alpha_at(rho);
        std::vector<Real> g{std::isnan(a) ? kInf : a + p.eps};
        const auto lc = loop_constraints(bw_pm(with_gains(p.base, names, rho), p.plant), p.omega_nom);
        g.insert(g.end(), lc.begin(), lc.end());
        return g;
    };

    SurrogateOptions so;
    so.budget = p.budget;
    so.seed = p.seed;
    const SurrogateResult sr = surrogate_optimize(objective, constraints, p.domain, so);

    // independent re-check at the returned point
    TunerResult r;
    r.names = names;
    r.rho = sr.x;
    r.evaluations = sr.evaluations;
    r.history = sr.history;
    r.alpha_max = pssa(names, r.rho, p.cases, p.scenarios, p.stability);
    r.metrics = bw_pm(with_gains(p.base, names, r.rho), p.plant);
    r.rpi = rpi_conditions(r.metrics, p.omega_nom);
    r.alpha_ok = r.alpha_max <= -p.eps;
    r.in_bounds = p.domain.contains(r.rho);
    r.feasible = sr.feasible && r.alpha_ok && r.rpi.all() && r.in_bounds;
    return r;
}

nlohmann::json to_json(const LoopMetrics& m) {
    auto one = [](const LoopMetric& l) {
        return nlohmann::json{{"omega_c", optional_json(l.omega_c)}, {"phase_margin_deg", optional_json(l.phase_margin)}};
    };
    return {{"current", one(m.current)}, {"pll", one(m.pll)}, {"dc", one(m.dc)}};
}

nlohmann::json to_json(const TunerResult& r) {
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) params[r.names[i]] = r.rho[i];
    return {{"names", r.names},
            {"rho", r.rho},
            {"parameters", params},
            {"alpha_max", std::isfinite(r.alpha_max) ? nlohmann::json(r.alpha_max) : nlohmann::json(nullptr)},
            {"loop_metrics", to_json(r.metrics)},
            {"constraints",
             {{"alpha", r.alpha_ok}, {"c1", r.rpi.c1}, {"c2", r.rpi.c2}, {"c3", r.rpi.c3}, {"bounds", r.in_bounds}}},
            {"feasible", r.feasible},
            {"evaluations", r.evaluations}};
}

TunerResult tuner_result_from_json(const nlohmann::json& doc) {
    try {
        TunerResult r;
        r.names = doc.at("names").get<std::vector<std::string>>();
        r.rho = doc.at("rho").get<std::vector<Real>>();
        if (r.names.size() != r.rho.size()) throw ValidationError("tuned gains: names and rho differ in length");
        for (auto& n : r.names) n = canonical_gain_name(n);
        r.alpha_max = doc.at("alpha_max").is_null() ? kInf : doc.at("alpha_max").get<Real>();
        auto one = [](const nlohmann::json& j) {
            return LoopMetric{optional_from(j.at("omega_c")), optional_from(j.at("phase_margin_deg"))};
        };
        const auto& lm = doc.at("loop_metrics");
        r.metrics = {one(lm.at("current")), one(lm.at("pll")), one(lm.at("dc"))};
        const auto& c = doc.at("constraints");
        r.alpha_ok = c.at("alpha").get<bool>();
        r.rpi = {c.at("c1").get<bool>(), c.at("c2").get<bool>(), c.at("c3").get<bool>()};
        r.in_bounds = c.at("bounds").get<bool>();
        r.feasible = doc.at("feasible").get<bool>();
        r.evaluations = doc.at("evaluations").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed tuned gains: ") + e.what());
    }
}

}  // namespace stabman
