#pragma once

#include "stabman/core.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace stabman {

struct LabeledSample {
    std::vector<Real> rho;
    int label = 0;  ///< 1 = stable
};

/// Per-dimension affine map of the parameter box onto [0, 1]^n.
struct UnitScaling {
    Vector lo, hi;
    [[nodiscard]] Vector apply(const std::vector<Real>& raw) const;
};

enum class KernelKind { Rbf, Linear };

struct SvmOptions {
    KernelKind kernel = KernelKind::Rbf;
    Real sigma = 0.0;       ///< RBF width in scaled space; <= 0 picks the median pairwise distance
    Real c_box = 10.0;
    Real tolerance = 1e-6;  ///< KKT violation at termination
    long max_iterations = 10'000'000;
};

struct SvmModel {
    KernelKind kernel = KernelKind::Rbf;
    Real sigma = 1.0;
    UnitScaling scaling;
    Matrix support;        ///< scaled support vectors, one per row
    Vector coef;           ///< alpha_i * y_i
    Real bias = 0.0;
    std::vector<Real> alpha;  ///< all dual variables of the training set, in input order
    long iterations = 0;

    [[nodiscard]] Real decision_scaled(const Vector& x) const;
    [[nodiscard]] Real decision(const std::vector<Real>& raw) const;
};

/// Soft-margin SVM dual solved by SMO with second-order working-set selection.
/// Labels map 1 -> +1 and 0 -> -1, so positive decision values mean stable.
SvmModel train_svm(const std::vector<LabeledSample>& data, const UnitScaling& scaling, const SvmOptions& opts = {});

/// Median Euclidean distance between distinct pairs of points.
Real median_pairwise_distance(const std::vector<Vector>& points);

/// P(s = 1 | f) = 1 / (1 + exp(a f + b)).
struct PlattSigmoid {
    Real a = 0.0;
    Real b = 0.0;
    [[nodiscard]] Real operator()(Real f) const;
};

/// Maximum-likelihood sigmoid fit (Newton with backtracking) using the
/// (N+ + 1)/(N+ + 2) and 1/(N- + 2) smoothed targets.
PlattSigmoid fit_platt(const std::vector<Real>& decision_values, const std::vector<int>& labels);

struct CalibratedSvm {
    SvmModel svm;
    PlattSigmoid sigmoid;

    [[nodiscard]] Real predict_prob(const std::vector<Real>& raw) const;
};

CalibratedSvm calibrate(const SvmModel& svm, const std::vector<LabeledSample>& data);

nlohmann::json to_json(const CalibratedSvm& model);
CalibratedSvm calibrated_svm_from_json(const nlohmann::json& doc);

}  // namespace stabman
