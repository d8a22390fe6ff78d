#pragma once

#include "stabman/asm.hpp"
#include "stabman/stability.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

// ---------------------------------------------------------------------------
// Loop metrics
// ---------------------------------------------------------------------------

/// Simplified plant data for the three control loops of one inverter.
struct LoopPlant {
    Real R = 0.05;        ///< filter resistance, pu
    Real L = 0.15 / 314.159;  ///< filter inductance, pu*s (pu reactance / omega_b)
    Real v_d0 = 1.0;      ///< operating-point PCC voltage, pu
    Real omega_b = 314.159;   ///< rad/s, converts the pu PLL output to electrical speed
    Real k_dc = 1.0;      ///< dc-link gain S_base / (C V_dc,base^2), 1/s
    Real v_dc0 = 1.0;     ///< dc voltage operating point, pu
};

/// Plant of device `id` at the scenario's operating point (V_d0 from a power flow).
LoopPlant loop_plant(const NetworkModel& net, const std::string& id, const Scenario& scenario = {});
LoopPlant loop_plant(const IbrPhysicalParams& phys, Real omega_b, Real v_d0, Real v_dc0 = 1.0);

struct LoopMetric {
    std::optional<Real> omega_c;       ///< rad/s; empty when |L| never crosses 1 in the scan range
    std::optional<Real> phase_margin;  ///< degrees in (-180, 180]
};

struct LoopMetrics {
    LoopMetric current, pll, dc;
};

enum class Loop { Current, Pll, Dc };

/// Open-loop frequency response L(j omega) of one loop.
Complex loop_response(Loop loop, const IbrControlParams& c, const LoopPlant& plant, Real omega);

/// Last unity-gain crossing of a loop in [1e-2, 1e6] rad/s and its phase margin.
LoopMetric loop_metric(Loop loop, const IbrControlParams& c, const LoopPlant& plant);
LoopMetrics bw_pm(const IbrControlParams& c, const LoopPlant& plant);

struct RpiReport {
    bool c1 = false;  ///< omega_c^i >= 10 omega_c^pll
    bool c2 = false;  ///< omega_c^dc <= 2 omega_nom
    bool c3 = false;  ///< every phase margin > 45 deg
    [[nodiscard]] bool all() const { return c1 && c2 && c3; }
};

RpiReport rpi_conditions(const LoopMetrics& m, Real omega_nom);

/// In-RPI flags on a resolution x resolution grid over two gains (first gain
/// varying slowest). Gains outside the pair come from `fixed`.
std::vector<bool> rpi_region(const std::string& first, const std::string& second, const IbrControlParams& fixed,
                             const ParameterDomain& domain, std::size_t resolution, const LoopPlant& plant,
                             Real omega_nom);

/// Membership test for an arbitrary point of `domain` (bounds included).
bool in_rpi(const ParameterDomain& domain, const std::vector<Real>& rho, const IbrControlParams& fixed,
            const LoopPlant& plant, Real omega_nom);

// ---------------------------------------------------------------------------
// Surrogate optimization
// ---------------------------------------------------------------------------

using ObjectiveFn = std::function<Real(const std::vector<Real>&)>;
using ConstraintFn = std::function<std::vector<Real>(const std::vector<Real>&)>;  ///< <= 0 is feasible

struct SurrogateOptions {
    std::size_t budget = 500;
    std::uint64_t seed = 1;
    std::size_t candidates = 1000;  ///< per iteration, half perturbed and half uniform
    Real penalty = 10.0;            ///< weight of normalized violation against normalized objective
};

struct Evaluation {
    std::vector<Real> x;
    Real objective = 0.0;
    std::vector<Real> constraints;
    [[nodiscard]] Real violation() const;
    [[nodiscard]] bool feasible() const;
};

struct SurrogateResult {
    std::vector<Real> x;
    Real objective = 0.0;
    std::vector<Real> constraints;
    bool feasible = false;
    std::size_t evaluations = 0;
    std::vector<Evaluation> history;
};

SurrogateResult surrogate_optimize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                                   const ParameterDomain& domain, const SurrogateOptions& opts);

// ---------------------------------------------------------------------------
// Gain tuning
// ---------------------------------------------------------------------------

struct TunerProblem {
    ParameterDomain domain;            ///< gains being tuned
    ScenarioSet scenarios;
    std::vector<StudyCase> cases;      ///< connection combinations
    Real eps = 1e-3;                   ///< required damping, 1/s
    IbrControlParams base;             ///< gains outside the domain
    LoopPlant plant;
    Real omega_nom = 314.159;          ///< rad/s
    std::size_t budget = 500;
    std::uint64_t seed = 1;
    StabilityOptions stability;

    void validate() const;
};

struct TunerResult {
    std::vector<std::string> names;
    std::vector<Real> rho;
    Real alpha_max = 0.0;
    LoopMetrics metrics;
    RpiReport rpi;
    bool alpha_ok = false;
    bool in_bounds = false;
    bool feasible = false;
    std::size_t evaluations = 0;
    /// Every surrogate evaluation in order; constraints are [alpha + eps, C1, C2, C3 x3].
    std::vector<Evaluation> history;
};

/// All six gains over practical ranges for a 5 MVA / 660 V converter.
ParameterDomain default_tuning_domain(DcVariant v);

IbrControlParams with_gains(IbrControlParams base, const std::vector<std::string>& names,
                            const std::vector<Real>& values);

TunerResult tune(const TunerProblem& problem);

nlohmann::json to_json(const LoopMetrics& m);
nlohmann::json to_json(const TunerResult& r);
TunerResult tuner_result_from_json(const nlohmann::json& doc);

}  // namespace stabman
