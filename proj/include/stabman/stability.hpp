#pragma once

#include "stabman/assembler.hpp"
#include "stabman/core.hpp"
#include "stabman/netmodel.hpp"
#include "stabman/powerflow.hpp"

#include <limits>
#include <string>
#include <vector>

namespace stabman {

struct StabilityOptions {
    Real zero_tol = 1e-8;     ///< |re|, |im| below this (or the matrix's roundoff level, if larger) flag a structural zero
    Real stab_margin = 0.0;   ///< stable iff abscissa < -stab_margin
    LinearizeOptions linearize;
    PowerFlowOptions power_flow;
};

struct Spectrum {
    CVector values;
    CMatrix vectors;                   ///< right eigenvectors, columns
    std::vector<bool> structural_zero;
    std::vector<bool> excluded;        ///< left out of the abscissa (reference-angle mode)

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    /// Max real part over non-excluded eigenvalues; -inf for an empty spectrum.
    [[nodiscard]] Real abscissa() const;
    /// Index of the eigenvalue attaining the abscissa, or -1.
    [[nodiscard]] Eigen::Index worst() const;
};

/// Dense nonsymmetric eigen-decomposition with structural zeros flagged.
Spectrum eigenvalues(const Matrix& A, Real zero_tol = 1e-8);

/// Excludes at most one flagged zero whose eigenvector moves every angle state
/// by the same amount, i.e. the redundancy of the absolute angle reference.
void exclude_reference_mode(Spectrum& spec, const std::vector<bool>& angle_states);

/// Angle states (rotor angles and PLL angles) of an assembled system.
std::vector<bool> angle_state_mask(const AssembledSystem& sys);

/// State label with the largest |right eigenvector| entry.
std::string dominant_state(const Spectrum& spec, Eigen::Index k, const std::vector<std::string>& labels);

struct StabilityVerdict {
    int label = 0;                     ///< 1 = stable in every scenario
    std::vector<Real> abscissa;        ///< per scenario, +inf when not evaluable
    std::vector<std::size_t> failing;  ///< 0-based scenario indices
    std::vector<std::string> reasons;  ///< per scenario, empty when evaluable
    std::vector<Complex> worst;        ///< per scenario, eigenvalue attaining the abscissa
};

/// s = 1 iff every abscissa < -margin; NaN and +inf count as unstable.
StabilityVerdict verdict_from_abscissae(const std::vector<Real>& abscissae, Real margin = 0.0);

/// Full pipeline for one operating point: power flow, equilibrium,
/// linearization, assembly, spectrum.
struct LinearizedOperatingPoint {
    PowerFlowSolution power_flow;
    EquilibriumState equilibrium;
    AssembledSystem system;
    Spectrum spectrum;
};

LinearizedOperatingPoint linearize_operating_point(const NetworkModel& net, const Scenario& scenario,
                                                   const StabilityOptions& opts = {});

struct ScenarioResult {
    Real abscissa = std::numeric_limits<Real>::infinity();
    Complex worst{std::numeric_limits<Real>::quiet_NaN(), 0.0};
    std::string reason;  ///< non-empty when the operating point could not be evaluated
};

/// Like linearize_operating_point but power-flow and equilibrium failures
/// become an infinite abscissa with the failure recorded.
ScenarioResult scenario_abscissa(const NetworkModel& net, const Scenario& scenario, const StabilityOptions& opts = {});

// ---------------------------------------------------------------------------
// Parameter points
// ---------------------------------------------------------------------------

/// Canonical names of the tunable IBR gains: kp_pll, ki_pll, kp_i, ki_i,
/// kp_dc, ki_dc (the dc pair acts on whichever dc variant a device uses).
const std::vector<std::string>& gain_names();
/// Accepts canonical names and the file-format spellings (k_p_pll, k_p_2dc, ...).
std::string canonical_gain_name(const std::string& name);
Real& gain_ref(IbrControlParams& c, const std::string& name);
Real gain_value(const IbrControlParams& c, const std::string& name);

/// A network plus the IBRs whose gains a parameter point overwrites.
struct StudyCase {
    std::string name;
    NetworkModel net;
    std::vector<std::string> focus;
};

/// Returns a copy of the case network with the named gains set on every
/// focus device. Throws ValidationError for unknown devices or names.
NetworkModel apply_parameters(const StudyCase& ctx, const std::vector<std::string>& names,
                              const std::vector<Real>& values);

StabilityVerdict is_ps_stable(const std::vector<std::string>& names, const std::vector<Real>& rho,
                              const ScenarioSet& scenarios, const StudyCase& ctx, const StabilityOptions& opts = {});

/// Max spectral abscissa over all cases and scenarios (+inf for failures).
Real pssa(const std::vector<std::string>& names, const std::vector<Real>& rho, const std::vector<StudyCase>& cases,
          const ScenarioSet& scenarios, const StabilityOptions& opts = {});

}  // namespace stabman
