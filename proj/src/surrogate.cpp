#include "stabman/parallel.hpp"
#include "stabman/random.hpp"
#include "stabman/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabman {

Real Evaluation::violation() const {
    Real v = 0.0;
    for (Real g : constraints) v += std::isfinite(g) ? std::max(0.0, g) : std::numeric_limits<Real>::infinity();
    return v;
}

bool Evaluation::feasible() const {
    return std::isfinite(objective) && std::all_of(constraints.begin(), constraints.end(), [](Real g) { return g <= 0.0; });
}

namespace {

constexpr Real kWeights[] = {0.3, 0.5, 0.8, 0.95};
constexpr Real kSigmaInit = 0.2;
constexpr Real kSigmaMin = 0.2 / 64.0;
constexpr Real kSigmaMax = 0.4;

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
    Real uniform() { return rng_.uniform(next_++); }
    Real normal() {
        const Real u1 = std::max(uniform(), 1e-300), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
    std::size_t below(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<Real>(n))); }

private:
    CounterRng rng_;
    std::uint64_t next_ = 0;
};

/// Cubic radial basis interpolant with a linear tail.
class CubicRbf {
public:
    CubicRbf(const std::vector<Vector>& pts, const std::vector<Real>& values) : pts_(pts) {
        const auto n = static_cast<Eigen::Index>(pts.size());
        const auto d = pts.front().size();
        const Eigen::Index m = n + d + 1;
        Matrix a = Matrix::Zero(m, m);
        Vector rhs = Vector::Zero(m);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = phi((pts[i] - pts[j]).norm());
            a(i, n) = a(n, i) = 1.0;
            for (Eigen::Index k = 0; k < d; ++k) a(i, n + 1 + k) = a(n + 1 + k, i) = pts[i][k];
            rhs[i] = values[static_cast<std::size_t>(i)];
        }
        coef_ = a.partialPivLu().solve(rhs);
        if (!coef_.allFinite())
            coef_ = a.completeOrthogonalDecomposition().solve(rhs);
    }

    Real operator()(const Vector& x) const {
        const auto n = static_cast<Eigen::Index>(pts_.size());
        Real s = coef_[n];
        for (Eigen::Index i = 0; i < n; ++i) s += coef_[i] * phi((x - pts_[i]).norm());
        for (Eigen::Index k = 0; k < x.size(); ++k) s += coef_[n + 1 + k] * x[k];
        return s;
    }

private:
    static Real phi(Real r) { return r * r * r; }
    const std::vector<Vector>& pts_;
    Vector coef_;
};

/// Normalized objective plus weighted normalized constraint violation.
/// Infeasible points sit above every feasible one.
std::vector<Real> merits(const std::vector<Evaluation>& evals, Real penalty) {
    Real fmin = std::numeric_limits<Real>::infinity(), fmax = -fmin;
    for (const auto& e : evals)
        if (std::isfinite(e.objective)) {
            fmin = std::min(fmin, e.objective);
            fmax = std::max(fmax, e.objective);
        }
    const bool any_finite = std::isfinite(fmin);
    const Real range = any_finite ? std::max(fmax - fmin, 1e-12) : 1.0;

    // median magnitude per constraint, so one extreme sample cannot flatten the rest
    const std::size_t nc = evals.front().constraints.size();
    std::vector<Real> scale(nc, 1e-12);
    for (std::size_t j = 0; j < nc; ++j) {
        std::vector<Real> mag;
        for (const auto& e : evals)
            if (std::isfinite(e.constraints[j]) && e.constraints[j] != 0.0) mag.push_back(std::abs(e.constraints[j]));
        if (mag.empty()) continue;
        std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2), mag.end());
        scale[j] = std::max(scale[j], mag[mag.size() / 2]);
    }

    std::vector<Real> out(evals.size());
    for (std::size_t i = 0; i < evals.size(); ++i) {
        const Real f = std::isfinite(evals[i].objective) ? evals[i].objective : (any_finite ? fmax + range : 0.0);
        Real viol = 0.0;
        for (std::size_t j = 0; j < nc; ++j) {
            const Real g = evals[i].constraints[j];
            viol += std::isfinite(g) ? std::max(0.0, g) / scale[j] : 1.0;
        }
        out[i] = (any_finite ? (f - fmin) / range : 0.0);
        if (viol > 0.0) out[i] += 1.0 + penalty * viol;
    }
    return out;
}

}  // namespace

SurrogateResult surrogate_optimize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                                   const ParameterDomain& domain, const SurrogateOptions& opts) {
    domain.validate();
    const std::size_t d = domain.dimension();
    const std::size_t n0 = 2 * (d + 1);
    if (opts.budget < n0)
        throw ValidationError("evaluation budget " + std::to_string(opts.budget) + " is below the initial design size " +
                              std::to_string(n0));
    if (opts.candidates < 2) throw ValidationError("surrogate needs at least two candidates per iteration");

    auto to_box = [&](const Vector& u) {
        std::vector<Real> x(d);
        for (std::size_t j = 0; j < d; ++j)
            x[j] = std::clamp(domain.lo[j] + u[static_cast<Eigen::Index>(j)] * (domain.hi[j] - domain.lo[j]),
                              domain.lo[j], domain.hi[j]);
        return x;
    };
    auto evaluate = [&](const std::vector<Real>& x) {
        Evaluation e;
        e.x = x;
        e.objective = objective(x);
        e.constraints = constraints ? constraints(x) : std::vector<Real>{};
        return e;
    };

    std::vector<Vector> unit;
    std::vector<Evaluation> evals;

    // Latin hypercube start, evaluated as one parallel batch
    {
        Stream rng(opts.seed, 1);
        std::vector<Vector> design(n0, Vector(d));
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<std::size_t> perm(n0);
            for (std::size_t k = 0; k < n0; ++k) perm[k] = k;
            for (std::size_t k = n0; k-- > 1;) std::swap(perm[k], perm[rng.below(k + 1)]);
            for (std::size_t k = 0; k < n0; ++k)
                design[k][static_cast<Eigen::Index>(j)] = (static_cast<Real>(perm[k]) + rng.uniform()) / static_cast<Real>(n0);
        }
        std::vector<Evaluation> batch(n0);
        parallel_for(n0, [&](std::size_t k) { batch[k] = evaluate(to_box(design[k])); });
        unit = design;
        evals = std::move(batch);
    }
    const std::size_t nc = evals.front().constraints.size();
    for (const auto& e : evals)
        if (e.constraints.size() != nc) throw ValidationError("constraint function changed its output length");

    Real sigma = kSigmaInit;
    std::size_t successes = 0, failures = 0;
    const std::size_t fail_limit = std::max<std::size_t>(d, 5);
    const Real p_base = std::min(1.0, 20.0 / static_cast<Real>(d));

    for (std::size_t iter = 0; evals.size() < opts.budget; ++iter) {
        std::vector<Real> merit = merits(evals, opts.penalty);
        const std::size_t best = static_cast<std::size_t>(std::min_element(merit.begin(), merit.end()) - merit.begin());

        // clip large values at the median so penalty jumps do not dominate the fit
        std::vector<Real> fit = merit;
        std::vector<Real> sorted = merit;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
        const Real median = sorted[sorted.size() / 2];
        for (Real& v : fit) v = std::min(v, median);
        const CubicRbf model(unit, fit);

        Stream rng(opts.seed, 100 + iter);
        const Real progress = static_cast<Real>(evals.size() - n0) / static_cast<Real>(std::max<std::size_t>(1, opts.budget - n0));
        const Real p_select = std::max(p_base * (1.0 - std::log1p(progress * (std::exp(1.0) - 1.0))), 1.0 / static_cast<Real>(d));
        std::vector<Vector> cand(opts.candidates, Vector(d));
        const std::size_t n_perturb = opts.candidates / 2;
        for (std::size_t c = 0; c < opts.candidates; ++c) {
            if (c < n_perturb) {
                cand[c] = unit[best];
                bool moved = false;
                for (std::size_t j = 0; j < d; ++j)
                    if (rng.uniform() < p_select) {
                        cand[c][static_cast<Eigen::Index>(j)] += sigma * rng.normal();
                        moved = true;
                    }
                if (!moved) cand[c][static_cast<Eigen::Index>(rng.below(d))] += sigma * rng.normal();
                for (Eigen::Index j = 0; j < cand[c].size(); ++j) {
                    Real& v = cand[c][j];
                    if (v < 0.0) v = -v;
                    if (v > 1.0) v = 2.0 - v;
                    v = std::clamp(v, 0.0, 1.0);
                }
            } else {
                for (Eigen::Index j = 0; j < cand[c].size(); ++j) cand[c][j] = rng.uniform();
            }
        }

        std::vector<Real> sval(cand.size()), dist(cand.size());
        parallel_for(cand.size(), [&](std::size_t c) {
            sval[c] = model(cand[c]);
            Real dm = std::numeric_limits<Real>::infinity();
            for (const auto& p : unit) dm = std::min(dm, (cand[c] - p).norm());
            dist[c] = dm;
        });
        Real smin = std::numeric_limits<Real>::infinity(), smax = -smin;
        Real dmin = smin, dmax = -smin;
        bool any = false;
        for (std::size_t c = 0; c < cand.size(); ++c) {
            if (dist[c] < 1e-9) continue;
            any = true;
            smin = std::min(smin, sval[c]);
            smax = std::max(smax, sval[c]);
            dmin = std::min(dmin, dist[c]);
            dmax = std::max(dmax, dist[c]);
        }
        if (!any) break;  // every candidate duplicates an evaluated point
        const Real w = kWeights[iter % std::size(kWeights)];
        std::size_t pick = cand.size();
        Real pick_score = std::numeric_limits<Real>::infinity();
        for (std::size_t c = 0; c < cand.size(); ++c) {
            if (dist[c] < 1e-9) continue;
            const Real vs = smax > smin ? (sval[c] - smin) / (smax - smin) : 1.0;
            const Real vd = dmax > dmin ? (dmax - dist[c]) / (dmax - dmin) : 1.0;
            const Real score = w * vs + (1.0 - w) * vd;
            if (score < pick_score) {
                pick_score = score;
                pick = c;
            }
        }

        unit.push_back(cand[pick]);
        evals.push_back(evaluate(to_box(cand[pick])));
        if (evals.back().constraints.size() != nc) throw ValidationError("constraint function changed its output length");

        const std::vector<Real> updated = merits(evals, opts.penalty);
        const Real old_best = *std::min_element(updated.begin(), updated.end() - 1);
        if (updated.back() < old_best - 1e-3 * std::abs(old_best)) {
            ++successes;
            failures = 0;
        } else {
            ++failures;
            successes = 0;
        }
        if (successes >= 3) {
            sigma = std::min(2.0 * sigma, kSigmaMax);
            successes = 0;
        }
        if (failures >= fail_limit) {
            sigma = std::max(0.5 * sigma, kSigmaMin);
            failures = 0;
        }
    }

    SurrogateResult res;
    res.evaluations = evals.size();
    std::optional<std::size_t> chosen;
    for (std::size_t i = 0; i < evals.size(); ++i)
        if (evals[i].feasible() && (!chosen || evals[i].objective < evals[*chosen].objective)) chosen = i;
    res.feasible = chosen.has_value();
    if (!chosen) {
        chosen = 0;
        for (std::size_t i = 1; i < evals.size(); ++i)
            if (evals[i].violation() < evals[*chosen].violation()) chosen = i;
    }
    res.x = evals[*chosen].x;
    res.objective = evals[*chosen].objective;
    res.constraints = evals[*chosen].constraints;
    res.history = std::move(evals);
    return res;
}

}  // namespace stabman
