#include "stabman/asm.hpp"
#include "stabman/parallel.hpp"
#include "stabman/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stabman {

UnitScaling ParameterDomain::scaling() const {
    UnitScaling s;
    s.lo = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    s.hi = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    return s;
}

bool ParameterDomain::contains(const std::vector<Real>& rho) const {
    if (rho.size() != dimension()) return false;
    for (std::size_t i = 0; i < rho.size(); ++i)
        if (!(rho[i] >= lo[i] && rho[i] <= hi[i])) return false;
    return true;
}

void ParameterDomain::validate() const {
    if (names.empty()) throw ValidationError("parameter domain needs at least one dimension");
    if (lo.size() != names.size() || hi.size() != names.size())
        throw ValidationError("parameter domain bounds do not match its names");
    for (std::size_t i = 0; i < names.size(); ++i)
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
            throw ValidationError("parameter domain for '" + names[i] + "' needs finite min < max");
}

void AsmConfig::validate() const {
    if (n_init < 2) throw ValidationError("N_init must be at least 2");
    if (n_a < 1) throw ValidationError("N_a must be at least 1");
    if (n_r < 10 * n_init) throw ValidationError("N_r must be at least 10 * N_init");
    if (n_r < n_a) throw ValidationError("N_r must be at least N_a");
    if (!(p_th > 0.0 && p_th < 1.0)) throw ValidationError("P_th must lie in (0, 1)");
}

Real ManifoldModel::predict_prob(const std::vector<Real>& rho) const {
    if (degenerate || !classifier) return constant_probability;
    return classifier->predict_prob(rho);
}

std::vector<std::vector<Real>> uniform_samples(const ParameterDomain& domain, std::size_t count, std::uint64_t seed,
                                               std::uint64_t stream) {
    const CounterRng rng(seed, stream);
    const std::size_t d = domain.dimension();
    std::vector<std::vector<Real>> out(count, std::vector<Real>(d));
    for (std::size_t k = 0; k < count; ++k)
        for (std::size_t j = 0; j < d; ++j) out[k][j] = rng.uniform(k * d + j, domain.lo[j], domain.hi[j]);
    return out;
}

std::vector<std::size_t> select_boundary_candidates(const std::vector<Real>& p, Real p_th, std::size_t n_a) {
    if (n_a > p.size()) throw ValidationError("candidate pool is smaller than N_a");
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto closer = [&](std::size_t a, std::size_t b) {
        const Real da = std::abs(p[a] - p_th), db = std::abs(p[b] - p_th);
        return da < db || (da == db && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_a), idx.end(), closer);
    idx.resize(n_a);
    return idx;
}

std::vector<std::size_t> select_boundary_candidates(const ManifoldModel& model,
                                                    const std::vector<std::vector<Real>>& pool, Real p_th,
                                                    std::size_t n_a) {
    std::vector<Real> p(pool.size());
    parallel_for(pool.size(), [&](std::size_t i) { p[i] = model.predict_prob(pool[i]); });
    return select_boundary_candidates(p, p_th, n_a);
}

namespace {

void label_all(const StabilityOracle& oracle, const std::vector<std::vector<Real>>& points,
               std::vector<LabeledSample>& out) {
    std::vector<int> labels(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const int s = oracle(points[i]);
        if (s != 0 && s != 1) throw ValidationError("stability oracle returned a label other than 0 or 1");
        labels[i] = s;
    });
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back({points[i], labels[i]});
}

CalibratedSvm fit(const std::vector<LabeledSample>& data, const ParameterDomain& domain, const SvmOptions& opts) {
    return calibrate(train_svm(data, domain.scaling(), opts), data);
}

}  // namespace

ManifoldModel run_asm(const StabilityOracle& oracle, const ParameterDomain& domain, const AsmConfig& cfg) {
    domain.validate();
    cfg.validate();
    ManifoldModel m;
    m.domain = domain;
    m.config = cfg;

    // steps 1-2
    label_all(oracle, uniform_samples(domain, cfg.n_init, cfg.seed, 1), m.samples);
    m.oracle_calls = cfg.n_init;
    const bool any_stable = std::any_of(m.samples.begin(), m.samples.end(), [](const auto& s) { return s.label == 1; });
    const bool any_unstable = std::any_of(m.samples.begin(), m.samples.end(), [](const auto& s) { return s.label == 0; });
    if (!any_stable || !any_unstable) {
        m.degenerate = true;
        m.constant_probability = any_stable ? 1.0 : 0.0;
        return m;
    }

    // step 3
    m.classifier = fit(m.samples, domain, cfg.svm);

    // step 4
    const auto pool = uniform_samples(domain, cfg.n_r, cfg.seed, 2);
    const auto chosen = select_boundary_candidates(m, pool, cfg.p_th, cfg.n_a);
    std::vector<std::vector<Real>> refine;
    refine.reserve(chosen.size());
    for (auto i : chosen) refine.push_back(pool[i]);
    label_all(oracle, refine, m.samples);
    m.oracle_calls += refine.size();
    m.classifier = fit(m.samples, domain, cfg.svm);
    return m;
}

std::vector<ManifoldGridPoint> export_manifold(const ManifoldModel& model, std::size_t resolution, const RpiMask& rpi) {
    if (resolution < 2) throw ValidationError("grid resolution must be at least 2");
    const std::size_t d = model.domain.dimension();
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) total *= resolution;
    std::vector<ManifoldGridPoint> grid(total);
    parallel_for(total, [&](std::size_t k) {
        std::vector<Real> rho(d);
        std::size_t rem = k;
        for (std::size_t j = d; j-- > 0;) {
            const std::size_t i = rem % resolution;
            rem /= resolution;
            const Real t = static_cast<Real>(i) / static_cast<Real>(resolution - 1);
            rho[j] = i + 1 == resolution ? model.domain.hi[j] : model.domain.lo[j] + t * (model.domain.hi[j] - model.domain.lo[j]);
        }
        grid[k].probability = model.predict_prob(rho);
        grid[k].in_rpi = rpi ? rpi(rho) : true;
        grid[k].rho = std::move(rho);
    });
    return grid;
}

nlohmann::json to_json(const ManifoldModel& m) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : m.samples) samples.push_back({{"rho", s.rho}, {"label", s.label}});
    nlohmann::json doc = {{"names", m.domain.names},
                          {"lo", m.domain.lo},
                          {"hi", m.domain.hi},
                          {"n_init", m.config.n_init},
                          {"n_r", m.config.n_r},
                          {"n_a", m.config.n_a},
                          {"p_th", m.config.p_th},
                          {"seed", m.config.seed},
                          {"degenerate", m.degenerate},
                          {"constant_probability", m.constant_probability},
                          {"oracle_calls", m.oracle_calls},
                          {"samples", samples}};
    if (m.classifier) doc["classifier"] = to_json(*m.classifier);
    return doc;
}

ManifoldModel manifold_from_json(const nlohmann::json& doc) {
    try {
        ManifoldModel m;
        m.domain.names = doc.at("names").get<std::vector<std::string>>();
        m.domain.lo = doc.at("lo").get<std::vector<Real>>();
        m.domain.hi = doc.at("hi").get<std::vector<Real>>();
        m.domain.validate();
        m.config.n_init = doc.at("n_init").get<std::size_t>();
        m.config.n_r = doc.at("n_r").get<std::size_t>();
        m.config.n_a = doc.at("n_a").get<std::size_t>();
        m.config.p_th = doc.at("p_th").get<Real>();
        m.config.seed = doc.at("seed").get<std::uint64_t>();
        m.degenerate = doc.at("degenerate").get<bool>();
        m.constant_probability = doc.at("constant_probability").get<Real>();
        m.oracle_calls = doc.at("oracle_calls").get<std::size_t>();
        for (const auto& s : doc.at("samples")) m.samples.push_back({s.at("rho").get<std::vector<Real>>(), s.at("label").get<int>()});
        if (doc.contains("classifier")) m.classifier = calibrated_svm_from_json(doc.at("classifier"));
        if (!m.degenerate && !m.classifier) throw ValidationError("manifold model has neither a classifier nor a constant");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifold model: ") + e.what());
    }
}

}  // namespace stabman
