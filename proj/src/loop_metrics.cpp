#include "stabman/parallel.hpp"
#include "stabman/powerflow.hpp"
#include "stabman/tuner.hpp"

#include <cmath>

namespace stabman {

LoopPlant loop_plant(const IbrPhysicalParams& phys, Real omega_b, Real v_d0, Real v_dc0) {
    if (!(phys.L > 0.0) || !(phys.C > 0.0) || !(omega_b > 0.0) || !(v_d0 > 0.0) || !(v_dc0 > 0.0))
        throw ValidationError("loop plant parameters must be positive");
    LoopPlant p;
    p.R = phys.R;
    p.L = phys.L / omega_b;
    p.v_d0 = v_d0;
    p.omega_b = omega_b;
    p.k_dc = phys.s_base * 1e6 / (phys.C * phys.v_base_dc * phys.v_base_dc);
    p.v_dc0 = v_dc0;
    return p;
}

LoopPlant loop_plant(const NetworkModel& net, const std::string& id, const Scenario& scenario) {
    const Device& dev = net.device(id);
    if (dev.kind != DeviceKind::IBR) throw ValidationError("device '" + id + "' is not an IBR");
    const auto pf = solve_power_flow(net, scenario);
    return loop_plant(dev.ibr.physical, net.system_frequency, std::abs(pf.voltage(dev.bus)));
}

Complex loop_response(Loop loop, const IbrControlParams& c, const LoopPlant& p, Real omega) {
    const Complex s(0.0, omega);
    switch (loop) {
        case Loop::Current:
            return (c.kp_i + c.ki_i / s) / (p.L * s + p.R);
        case Loop::Pll:
            return (c.kp_pll + c.ki_pll / s) * p.omega_b * p.v_d0 / s;
        case Loop::Dc: {
            const Real g = c.dc_variant == DcVariant::Vdc ? p.k_dc / p.v_dc0 : 2.0 * p.k_dc;
            return (c.kp_dc + c.ki_dc / s) * g / s;
        }
    }
    return {};
}

namespace {

constexpr Real kScanLo = 1e-2;
constexpr Real kScanHi = 1e6;
constexpr int kScanPoints = 4000;

bool zero_gains(Loop loop, const IbrControlParams& c) {
    switch (loop) {
        case Loop::Current: return c.kp_i == 0.0 && c.ki_i == 0.0;
        case Loop::Pll: return c.kp_pll == 0.0 && c.ki_pll == 0.0;
        case Loop::Dc: return c.kp_dc == 0.0 && c.ki_dc == 0.0;
    }
    return true;
}

Real phase_margin_deg(Complex l) {
    Real pm = 180.0 + std::arg(l) * 180.0 / kPi;
    if (pm > 180.0) pm -= 360.0;
    return pm;
}

}  // namespace

LoopMetric loop_metric(Loop loop, const IbrControlParams& c, const LoopPlant& plant) {
    LoopMetric m;
    if (zero_gains(loop, c)) return m;
    auto h = [&](Real log_w) { return std::log(std::abs(loop_response(loop, c, plant, std::exp(log_w)))); };
    const Real a = std::log(kScanLo), b = std::log(kScanHi);
    Real prev_x = a, prev_h = h(a);
    std::optional<std::pair<Real, Real>> bracket;
    for (int k = 1; k < kScanPoints; ++k) {
        const Real x = a + (b - a) * k / (kScanPoints - 1);
        const Real hx = h(x);
        if ((prev_h >= 0.0) != (hx >= 0.0)) bracket = {prev_x, x};
        prev_x = x;
        prev_h = hx;
    }
    if (!bracket) return m;

    auto [lo, hi] = *bracket;
    const bool lo_above = h(lo) >= 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const Real mid = 0.5 * (lo + hi);
        if ((h(mid) >= 0.0) == lo_above) lo = mid;
        else hi = mid;
    }
    const Real w = std::exp(std::abs(h(lo)) <= std::abs(h(hi)) ? lo : hi);
    m.omega_c = w;
    m.phase_margin = phase_margin_deg(loop_response(loop, c, plant, w));
    return m;
}

LoopMetrics bw_pm(const IbrControlParams& c, const LoopPlant& plant) {
    if (!(plant.L > 0.0) || !(plant.R >= 0.0) || !(plant.v_d0 > 0.0) || !(plant.omega_b > 0.0) ||
        !(plant.k_dc > 0.0) || !(plant.v_dc0 > 0.0))
        throw ValidationError("loop plant parameters must be positive");
    return {loop_metric(Loop::Current, c, plant), loop_metric(Loop::Pll, c, plant), loop_metric(Loop::Dc, c, plant)};
}

RpiReport rpi_conditions(const LoopMetrics& m, Real omega_nom) {
    RpiReport r;
    r.c1 = m.current.omega_c && m.pll.omega_c && *m.current.omega_c >= 10.0 * *m.pll.omega_c;
    r.c2 = m.dc.omega_c && *m.dc.omega_c <= 2.0 * omega_nom;
    r.c3 = true;
    for (const auto* l : {&m.current, &m.pll, &m.dc})
        r.c3 = r.c3 && l->phase_margin && *l->phase_margin > 45.0;
    return r;
}

IbrControlParams with_gains(IbrControlParams base, const std::vector<std::string>& names,
                            const std::vector<Real>& values) {
    if (names.size() != values.size()) throw ValidationError("gain names and values differ in length");
    for (std::size_t i = 0; i < names.size(); ++i) gain_ref(base, names[i]) = values[i];
    return base;
}

bool in_rpi(const ParameterDomain& domain, const std::vector<Real>& rho, const IbrControlParams& fixed,
            const LoopPlant& plant, Real omega_nom) {
    if (!domain.contains(rho)) return false;
    return rpi_conditions(bw_pm(with_gains(fixed, domain.names, rho), plant), omega_nom).all();
}

std::vector<bool> rpi_region(const std::string& first, const std::string& second, const IbrControlParams& fixed,
                             const ParameterDomain& domain, std::size_t resolution, const LoopPlant& plant,
                             Real omega_nom) {
    domain.validate();
    if (resolution < 2) throw ValidationError("grid resolution must be at least 2");
    const std::string a = canonical_gain_name(first), b = canonical_gain_name(second);
    if (a == b) throw ValidationError("RPI pair repeats parameter '" + a + "'");
    std::optional<std::size_t> ia, ib;
    for (std::size_t k = 0; k < domain.dimension(); ++k) {
        const std::string n = canonical_gain_name(domain.names[k]);
        if (n == a) ia = k;
        else if (n == b) ib = k;
        else {
            const Real v = gain_value(fixed, n);
            if (v < domain.lo[k] || v > domain.hi[k])
                throw ValidationError("fixed value of '" + n + "' lies outside its domain");
        }
    }
    if (!ia || !ib) throw ValidationError("RPI pair is not part of the parameter domain");

    auto axis = [&](std::size_t k, std::size_t i) {
        if (i + 1 == resolution) return domain.hi[k];
        return domain.lo[k] + (domain.hi[k] - domain.lo[k]) * static_cast<Real>(i) / static_cast<Real>(resolution - 1);
    };
    std::vector<char> flags(resolution * resolution);
    parallel_for(flags.size(), [&](std::size_t k) {
        IbrControlParams c = fixed;
        gain_ref(c, a) = axis(*ia, k / resolution);
        gain_ref(c, b) = axis(*ib, k % resolution);
        flags[k] = rpi_conditions(bw_pm(c, plant), omega_nom).all();
    });
    return {flags.begin(), flags.end()};
}

}  // namespace stabman
