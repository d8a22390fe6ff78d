#pragma once

#include "stabman/classifier.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

struct ParameterDomain {
    std::vector<std::string> names;
    std::vector<Real> lo, hi;

    [[nodiscard]] std::size_t dimension() const { return names.size(); }
    [[nodiscard]] UnitScaling scaling() const;
    [[nodiscard]] bool contains(const std::vector<Real>& rho) const;
    /// Throws ValidationError unless every dimension has finite lo < hi.
    void validate() const;
};

struct AsmConfig {
    std::size_t n_init = 100;
    std::size_t n_r = 20000;
    std::size_t n_a = 250;
    Real p_th = 0.8;
    std::uint64_t seed = 1;
    SvmOptions svm;

    void validate() const;
};

/// Final calibrated classifier plus every labeled sample. A degenerate model
/// (all initial labels equal) predicts a constant probability instead.
struct ManifoldModel {
    ParameterDomain domain;
    AsmConfig config;
    std::optional<CalibratedSvm> classifier;
    bool degenerate = false;
    Real constant_probability = 0.0;
    std::vector<LabeledSample> samples;
    std::size_t oracle_calls = 0;

    [[nodiscard]] Real predict_prob(const std::vector<Real>& rho) const;
};

using StabilityOracle = std::function<int(const std::vector<Real>&)>;

/// Uniform i.i.d. points in the box; point k uses counter indices k*dim..k*dim+dim-1.
std::vector<std::vector<Real>> uniform_samples(const ParameterDomain& domain, std::size_t count, std::uint64_t seed,
                                               std::uint64_t stream);

/// Indices of the n_a pool entries with smallest |p - p_th|, ties by index,
/// returned in that rank order.
std::vector<std::size_t> select_boundary_candidates(const std::vector<Real>& pool_probabilities, Real p_th,
                                                    std::size_t n_a);
std::vector<std::size_t> select_boundary_candidates(const ManifoldModel& model,
                                                    const std::vector<std::vector<Real>>& pool, Real p_th,
                                                    std::size_t n_a);

/// Seed, label, train, refine near P_th once, retrain. The oracle is called
/// exactly n_init + n_a times (n_init when degenerate); labeling runs on the
/// worker pool and is merged by index.
ManifoldModel run_asm(const StabilityOracle& oracle, const ParameterDomain& domain, const AsmConfig& cfg);

struct ManifoldGridPoint {
    std::vector<Real> rho;
    Real probability = 0.0;
    bool in_rpi = true;
};

using RpiMask = std::function<bool(const std::vector<Real>&)>;

/// Regular grid (resolution points per axis, bounds included), first axis
/// varying slowest.
std::vector<ManifoldGridPoint> export_manifold(const ManifoldModel& model, std::size_t resolution,
                                               const RpiMask& rpi = {});

nlohmann::json to_json(const ManifoldModel& model);
ManifoldModel manifold_from_json(const nlohmann::json& doc);

}  // namespace stabman
