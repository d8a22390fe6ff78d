#include "stabman/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabman {

Real Spectrum::abscissa() const {
    Real a = -std::numeric_limits<Real>::infinity();
    for (Eigen::Index k = 0; k < values.size(); ++k)
        if (!excluded[static_cast<std::size_t>(k)]) a = std::max(a, values[k].real());
    return a;
}

Eigen::Index Spectrum::worst() const {
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (excluded[static_cast<std::size_t>(k)]) continue;
        if (best < 0 || values[k].real() > values[best].real()) best = k;
    }
    return best;
}

namespace {

// Diagonal similarity D^-1 A D with power-of-two entries that equalizes row and
// column norms (Parlett-Reinsch). Network matrices mix entries of very
// different magnitude and the unbalanced QR loses accuracy near zero.
Vector balance(Matrix& a) {
    const auto n = a.rows();
    Vector d = Vector::Ones(n);
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            Real c = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
            Real r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
            if (c == 0.0 || r == 0.0) continue;
            const Real s = c + r;
            Real f = 1.0;
            while (c < r / 2.0) {
                f *= 2.0;
                c *= 4.0;
            }
            while (c > r * 2.0) {
                f /= 2.0;
                c /= 4.0;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                d[i] *= f;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return d;
}

}  // namespace

Spectrum eigenvalues(const Matrix& A, Real zero_tol) {
    if (A.rows() != A.cols()) throw ValidationError("eigenvalues: matrix is not square");
    if (!A.allFinite()) throw NumericalError("eigenvalues: matrix has non-finite entries");
    Spectrum spec;
    const auto n = A.rows();
    Real tol = zero_tol;
    if (n > 0) {
        Matrix b = A;
        const Vector d = balance(b);
        // a computed zero is only known to within a few ulps of the matrix norm;
        // stiff networks put that above a fixed threshold
        tol = std::max(tol, 64.0 * std::numeric_limits<Real>::epsilon() * b.norm());
        Eigen::EigenSolver<Matrix> es(b, true);
        if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
        spec.values = es.eigenvalues();
        spec.vectors = d.cast<Complex>().asDiagonal() * es.eigenvectors();
        for (Eigen::Index k = 0; k < n; ++k) spec.vectors.col(k).normalize();
    }
    spec.structural_zero.resize(static_cast<std::size_t>(n));
    spec.excluded.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < n; ++k)
        spec.structural_zero[static_cast<std::size_t>(k)] =
            std::abs(spec.values[k].real()) < tol && std::abs(spec.values[k].imag()) < tol;
    return spec;
}

void exclude_reference_mode(Spectrum& spec, const std::vector<bool>& angle_states) {
    if (angle_states.size() != static_cast<std::size_t>(spec.vectors.rows()))
        throw ValidationError("angle-state mask does not match the spectrum");
    for (Eigen::Index k = 0; k < spec.values.size(); ++k) {
        if (!spec.structural_zero[static_cast<std::size_t>(k)]) continue;
        const CVector v = spec.vectors.col(k);
        const Real scale = v.cwiseAbs().maxCoeff();
        Complex first(0.0, 0.0);
        bool seen = false, uniform = true;
        for (Eigen::Index i = 0; i < v.size() && uniform; ++i) {
            if (!angle_states[static_cast<std::size_t>(i)]) continue;
            if (!seen) {
                first = v[i];
                seen = true;
                uniform = std::abs(first) > 1e-3 * scale;
            } else {
                uniform = std::abs(v[i] - first) <= 1e-6 * scale;
            }
        }
        if (seen && uniform) {
            spec.excluded[static_cast<std::size_t>(k)] = true;
            return;
        }
    }
}

std::vector<bool> angle_state_mask(const AssembledSystem& sys) {
    std::vector<bool> mask;
    mask.reserve(sys.state_labels.size());
    for (const auto& l : sys.state_labels) {
        const auto dot = l.rfind('.');
        mask.push_back(dot != std::string::npos && l.substr(dot + 1) == "delta");
    }
    return mask;
}

std::string dominant_state(const Spectrum& spec, Eigen::Index k, const std::vector<std::string>& labels) {
    if (k < 0 || k >= spec.vectors.cols() || labels.empty()) return "";
    Eigen::Index arg = 0;
    spec.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    return labels.at(static_cast<std::size_t>(arg));
}

StabilityVerdict verdict_from_abscissae(const std::vector<Real>& abscissae, Real margin) {
    if (abscissae.empty()) throw ValidationError("stability verdict needs at least one scenario");
    StabilityVerdict v;
    v.abscissa = abscissae;
    v.reasons.assign(abscissae.size(), "");
    v.worst.assign(abscissae.size(), Complex(std::numeric_limits<Real>::quiet_NaN(), 0.0));
    for (std::size_t i = 0; i < abscissae.size(); ++i)
        if (!(abscissae[i] < -margin)) v.failing.push_back(i);
    v.label = v.failing.empty() ? 1 : 0;
    return v;
}

LinearizedOperatingPoint linearize_operating_point(const NetworkModel& net, const Scenario& scenario,
                                                   const StabilityOptions& opts) {
    LinearizedOperatingPoint op;
    op.power_flow = solve_power_flow(net, scenario, opts.power_flow);
    op.equilibrium = init_equilibrium(op.power_flow);
    op.system = assemble(linearize_equilibrium(op.equilibrium, opts.linearize), op.equilibrium.topology);
    op.spectrum = eigenvalues(op.system.A, opts.zero_tol);
    exclude_reference_mode(op.spectrum, angle_state_mask(op.system));
    return op;
}

ScenarioResult scenario_abscissa(const NetworkModel& net, const Scenario& scenario, const StabilityOptions& opts) {
    ScenarioResult r;
    try {
        const auto op = linearize_operating_point(net, scenario, opts);
        r.abscissa = op.spectrum.abscissa();
        const auto w = op.spectrum.worst();
        if (w >= 0) r.worst = op.spectrum.values[w];
    } catch (const NumericalError& e) {
        r.reason = e.what();
    } catch (const InfeasibleError& e) {
        r.reason = e.what();
    }
    return r;
}

}  // namespace stabman
