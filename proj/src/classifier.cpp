#include "stabman/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabman {

Vector UnitScaling::apply(const std::vector<Real>& raw) const {
    if (static_cast<Eigen::Index>(raw.size()) != lo.size())
        throw ValidationError("parameter point has " + std::to_string(raw.size()) + " entries, expected " +
                              std::to_string(lo.size()));
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = (raw[static_cast<std::size_t>(i)] - lo[i]) / (hi[i] - lo[i]);
    return x;
}

namespace {

Real kernel_value(KernelKind kind, Real sigma, const Vector& a, const Vector& b) {
    if (kind == KernelKind::Linear) return a.dot(b);
    return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
}

}  // namespace

Real SvmModel::decision_scaled(const Vector& x) const {
    Real f = bias;
    for (Eigen::Index i = 0; i < support.rows(); ++i) f += coef[i] * kernel_value(kernel, sigma, support.row(i).transpose(), x);
    return f;
}

Real SvmModel::decision(const std::vector<Real>& raw) const { return decision_scaled(scaling.apply(raw)); }

Real median_pairwise_distance(const std::vector<Vector>& points) {
    std::vector<Real> d;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) d.push_back((points[i] - points[j]).norm());
    if (d.empty()) return 0.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    if (d.size() % 2 == 1) return d[mid];
    const Real upper = d[mid];
    const Real lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

SvmModel train_svm(const std::vector<LabeledSample>& data, const UnitScaling& scaling, const SvmOptions& opts) {
    const std::size_t n = data.size();
    if (n < 2) throw ValidationError("SVM training needs at least two samples");
    if (!(opts.c_box > 0.0)) throw ValidationError("SVM box constraint must be positive");
    std::vector<Vector> x;
    std::vector<Real> y;
    bool pos = false, neg = false;
    for (const auto& s : data) {
        if (s.label != 0 && s.label != 1) throw ValidationError("labels must be 0 or 1");
        x.push_back(scaling.apply(s.rho));
        y.push_back(s.label == 1 ? 1.0 : -1.0);
        (s.label == 1 ? pos : neg) = true;
    }
    if (!pos || !neg) throw ValidationError("SVM training needs both classes");

    SvmModel m;
    m.kernel = opts.kernel;
    m.scaling = scaling;
    m.sigma = opts.sigma > 0.0 ? opts.sigma : median_pairwise_distance(x);
    if (!(m.sigma > 0.0)) m.sigma = 1.0;

    Matrix K(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            K(i, j) = K(j, i) = kernel_value(m.kernel, m.sigma, x[i], x[j]);

    const Real C = opts.c_box;
    const Real tau = 1e-12;
    std::vector<Real> alpha(n, 0.0), G(n, -1.0);
    auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K(i, j); };
    auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

    long it = 0;
    for (; it < opts.max_iterations; ++it) {
        Real gmax = -std::numeric_limits<Real>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (in_up(t) && -y[t] * G[t] >= gmax) {
                if (-y[t] * G[t] > gmax || i == n) i = t;
                gmax = -y[t] * G[t];
            }
        Real gmax2 = -std::numeric_limits<Real>::infinity();
        Real best = std::numeric_limits<Real>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            gmax2 = std::max(gmax2, y[t] * G[t]);
            if (i == n) continue;
            const Real b = gmax + y[t] * G[t];
            if (b > 0) {
                Real a = K(i, i) + K(t, t) - 2.0 * K(i, t);
                if (a <= 0) a = tau;
                if (-(b * b) / a < best) {
                    best = -(b * b) / a;
                    j = t;
                }
            }
        }
        if (i == n || j == n || gmax + gmax2 < opts.tolerance) break;

        const Real ai = alpha[i], aj = alpha[j];
        if (y[i] != y[j]) {
            Real quad = K(i, i) + K(j, j) + 2.0 * q(i, j);
            if (quad <= 0) quad = tau;
            const Real delta = (-G[i] - G[j]) / quad;
            const Real diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0 && alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = diff;
            } else if (diff <= 0 && alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0 && alpha[i] > C) {
                alpha[i] = C;
                alpha[j] = C - diff;
            } else if (diff <= 0 && alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            Real quad = K(i, i) + K(j, j) - 2.0 * q(i, j);
            if (quad <= 0) quad = tau;
            const Real delta = (G[i] - G[j]) / quad;
            const Real sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C && alpha[i] > C) {
                alpha[i] = C;
                alpha[j] = sum - C;
            } else if (sum <= C && alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C && alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = sum - C;
            } else if (sum <= C && alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const Real di = alpha[i] - ai, dj = alpha[j] - aj;
        for (std::size_t t = 0; t < n; ++t) G[t] += q(t, i) * di + q(t, j) * dj;
    }
    if (it >= opts.max_iterations) throw NumericalError("SVM solver did not reach the KKT tolerance");

    // bias from free support vectors, or the midpoint of the feasible interval
    Real ub = std::numeric_limits<Real>::infinity(), lb = -ub, sum_free = 0.0;
    int n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const Real yg = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const Real rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    m.bias = -rho;

    std::vector<std::size_t> sv;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0) sv.push_back(t);
    m.support.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(scaling.lo.size()));
    m.coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        m.support.row(static_cast<Eigen::Index>(k)) = x[sv[k]].transpose();
        m.coef[static_cast<Eigen::Index>(k)] = alpha[sv[k]] * y[sv[k]];
    }
    m.alpha = std::move(alpha);
    m.iterations = it;
    return m;
}

Real PlattSigmoid::operator()(Real f) const {
    const Real z = a * f + b;
    // stable evaluation of 1/(1+exp(z)); clamped so the result stays inside (0,1)
    const Real p = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    constexpr Real eps = 1e-15;
    return std::clamp(p, eps, 1.0 - eps);
}

PlattSigmoid fit_platt(const std::vector<Real>& dec, const std::vector<int>& labels) {
    const std::size_t n = dec.size();
    if (n != labels.size() || n == 0) throw ValidationError("calibration needs matching decision values and labels");
    Real prior1 = 0, prior0 = 0;
    for (int l : labels) (l == 1 ? prior1 : prior0) += 1.0;
    if (prior1 == 0 || prior0 == 0) throw ValidationError("calibration needs both classes");
    const auto [mn, mx] = std::minmax_element(dec.begin(), dec.end());
    if (*mx - *mn <= 0.0) throw NumericalError("degenerate calibration: all decision values are identical");

    const Real hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
    std::vector<Real> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == 1 ? hi : lo;

    auto objective = [&](Real A, Real B) {
        Real f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Real z = dec[i] * A + B;
            f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    Real A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
    Real fval = objective(A, B);
    for (int iter = 0; iter < 200; ++iter) {
        Real h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Real z = dec[i] * A + B;
            Real p, q;
            if (z >= 0) {
                p = std::exp(-z) / (1.0 + std::exp(-z));
                q = 1.0 / (1.0 + std::exp(-z));
            } else {
                p = 1.0 / (1.0 + std::exp(z));
                q = std::exp(z) / (1.0 + std::exp(z));
            }
            const Real d2 = p * q;
            h11 += dec[i] * dec[i] * d2;
            h22 += d2;
            h21 += dec[i] * d2;
            const Real d1 = t[i] - p;
            g1 += dec[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-11 && std::abs(g2) < 1e-11) break;
        const Real det = h11 * h22 - h21 * h21;
        const Real dA = -(h22 * g1 - h21 * g2) / det;
        const Real dB = -(-h21 * g1 + h11 * g2) / det;
        const Real gd = g1 * dA + g2 * dB;
        Real step = 1.0;
        while (step >= 1e-12) {
            const Real nA = A + step * dA, nB = B + step * dB;
            const Real nf = objective(nA, nB);
            if (nf < fval + 1e-4 * step * gd) {
                A = nA;
                B = nB;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if (step < 1e-12) break;
    }
    return {A, B};
}

Real CalibratedSvm::predict_prob(const std::vector<Real>& raw) const { return sigmoid(svm.decision(raw)); }

CalibratedSvm calibrate(const SvmModel& svm, const std::vector<LabeledSample>& data) {
    std::vector<Real> dec;
    std::vector<int> labels;
    for (const auto& s : data) {
        dec.push_back(svm.decision(s.rho));
        labels.push_back(s.label);
    }
    return {svm, fit_platt(dec, labels)};
}

nlohmann::json to_json(const CalibratedSvm& model) {
    const auto& s = model.svm;
    nlohmann::json sv = nlohmann::json::array();
    for (Eigen::Index i = 0; i < s.support.rows(); ++i) {
        std::vector<Real> row;
        for (Eigen::Index j = 0; j < s.support.cols(); ++j) row.push_back(s.support(i, j));
        sv.push_back(row);
    }
    return {{"kernel", s.kernel == KernelKind::Rbf ? "rbf" : "linear"},
            {"sigma", s.sigma},
            {"scaling_lo", std::vector<Real>(s.scaling.lo.data(), s.scaling.lo.data() + s.scaling.lo.size())},
            {"scaling_hi", std::vector<Real>(s.scaling.hi.data(), s.scaling.hi.data() + s.scaling.hi.size())},
            {"support_vectors", sv},
            {"coefficients", std::vector<Real>(s.coef.data(), s.coef.data() + s.coef.size())},
            {"bias", s.bias},
            {"sigmoid_a", model.sigmoid.a},
            {"sigmoid_b", model.sigmoid.b}};
}

CalibratedSvm calibrated_svm_from_json(const nlohmann::json& doc) {
    try {
        CalibratedSvm m;
        auto& s = m.svm;
        const std::string kind = doc.at("kernel").get<std::string>();
        if (kind != "rbf" && kind != "linear") throw ValidationError("unknown kernel '" + kind + "'");
        s.kernel = kind == "rbf" ? KernelKind::Rbf : KernelKind::Linear;
        s.sigma = doc.at("sigma").get<Real>();
        const auto lo = doc.at("scaling_lo").get<std::vector<Real>>();
        const auto hi = doc.at("scaling_hi").get<std::vector<Real>>();
        if (lo.size() != hi.size() || lo.empty()) throw ValidationError("model scaling bounds are inconsistent");
        s.scaling.lo = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
        s.scaling.hi = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
        const auto sv = doc.at("support_vectors").get<std::vector<std::vector<Real>>>();
        const auto coef = doc.at("coefficients").get<std::vector<Real>>();
        if (sv.size() != coef.size()) throw ValidationError("model has mismatched support vectors and coefficients");
        s.support.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(lo.size()));
        for (std::size_t i = 0; i < sv.size(); ++i) {
            if (sv[i].size() != lo.size()) throw ValidationError("support vector dimension mismatch");
            for (std::size_t j = 0; j < lo.size(); ++j)
                s.support(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sv[i][j];
        }
        s.coef = Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size()));
        s.bias = doc.at("bias").get<Real>();
        m.sigmoid = {doc.at("sigmoid_a").get<Real>(), doc.at("sigmoid_b").get<Real>()};
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace stabman
