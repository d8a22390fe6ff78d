#include "stabman/netmodel.hpp"
#include "stabman/random.hpp"

#include <algorithm>
#include <cmath>

namespace stabman {

Real scenario_multiplier(const ScenarioSpec& spec, std::size_t bus_ordinal, int shift, std::size_t t,
                         std::uint64_t stream) {
    const auto T = static_cast<long>(spec.daily_curve.size());
    long k = (static_cast<long>(t) - shift) % T;
    if (k < 0) k += T;
    const CounterRng rng(spec.seed, stream);
    const Real u = rng.uniform(bus_ordinal * spec.daily_curve.size() + t, -1.0, 1.0);
    return spec.daily_curve[static_cast<std::size_t>(k)] * (1.0 + spec.noise_amplitude * u);
}

void proportional_dispatch(const NetworkModel& net, Scenario& scenario) {
    Real p_load = 0.0;
    for (const auto& br : net.branches) {
        if (br.kind != BranchKind::RlLoad) continue;
        auto it = scenario.load_multipliers.find(br.terminals[0]);
        const Real m = it == scenario.load_multipliers.end() ? 1.0 : it->second;
        const Real z2 = br.params.r * br.params.r + br.params.x * br.params.x;
        p_load += m * br.params.r / z2;
    }
    p_load *= net.power_base_mva;

    auto rating = [&](const Device& d) {
        auto it = scenario.dispatch.find(d.id);
        if (it != scenario.dispatch.end() && !it->second.available) return 0.0;
        const Real scale = it == scenario.dispatch.end() ? 1.0 : it->second.rating_scale;
        return d.rating_mva * scale;
    };
    Real s_total = 0.0;
    for (const auto& d : net.devices)
        if (d.kind != DeviceKind::TheveninSource) s_total += rating(d);
    if (s_total <= 0.0) return;
    for (const auto& d : net.devices) {
        if (d.kind == DeviceKind::TheveninSource) continue;
        scenario.dispatch[d.id].p_mw = p_load * rating(d) / s_total;
    }
}

ScenarioSet synthesize_scenarios(const NetworkModel& base, const ScenarioSpec& spec) {
    if (spec.daily_curve.empty()) throw ValidationError("scenario synthesis needs a non-empty daily curve");
    for (Real v : spec.daily_curve)
        if (!(v > 0.0 && v <= 1.0)) throw ValidationError("daily curve samples must lie in (0, 1]");
    if (!(spec.noise_amplitude >= 0.0 && spec.noise_amplitude < 1.0))
        throw ValidationError("noise amplitude must lie in [0, 1)");
    for (const auto& [bus, shift] : spec.time_shift)
        if (!base.bus_index(bus)) throw ValidationError("time shift references missing bus '" + bus + "'");

    std::vector<std::string> load_buses, shunt_buses;
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& br : base.branches) {
        if (br.kind == BranchKind::RlLoad) add_unique(load_buses, br.terminals[0]);
        if (br.kind == BranchKind::ShuntCap) add_unique(shunt_buses, br.terminals[0]);
    }
    auto shift_of = [&](const std::string& bus) {
        auto it = spec.time_shift.find(bus);
        return it == spec.time_shift.end() ? 0 : it->second;
    };
    auto ordinal = [&](const std::string& bus) { return *base.bus_index(bus); };

    std::vector<Scenario> points;
    for (std::size_t t = 0; t < spec.daily_curve.size(); ++t) {
        Scenario sc;
        sc.name = "h" + std::to_string(t);
        for (const auto& b : load_buses) sc.load_multipliers[b] = scenario_multiplier(spec, ordinal(b), shift_of(b), t, 0);
        for (const auto& b : shunt_buses)
            sc.shunt_multipliers[b] = scenario_multiplier(spec, ordinal(b), shift_of(b), t, 1);
        points.push_back(std::move(sc));
    }
    if (spec.include_peak) {
        Scenario sc;
        sc.name = "peak";
        for (const auto& b : load_buses) sc.load_multipliers[b] = 1.0;
        for (const auto& b : shunt_buses) sc.shunt_multipliers[b] = 1.0;
        points.push_back(std::move(sc));
    }

    ScenarioSet out;
    const auto variants = spec.rating_variants.empty() ? std::vector<std::map<std::string, Real>>{{}}
                                                       : spec.rating_variants;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (const auto& pt : points) {
            Scenario sc = pt;
            if (variants.size() > 1) sc.name += "_v" + std::to_string(v);
            for (const auto& [dev, scale] : variants[v]) {
                if (!base.device_index(dev)) throw ValidationError("rating variant references missing device '" + dev + "'");
                sc.dispatch[dev].rating_scale = scale;
            }
            proportional_dispatch(base, sc);
            out.scenarios.push_back(std::move(sc));
        }
    }
    return out;
}

}  // namespace stabman
