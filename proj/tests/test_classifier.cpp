#include <catch_amalgamated.hpp>

#include "stabman/asm.hpp"
#include "stabman/classifier.hpp"
#include "stabman/parallel.hpp"

#include <cmath>

using namespace stabman;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

UnitScaling unit_box(int dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

std::vector<LabeledSample> ring_data() {
    // stable inside radius 0.3 around the box centre, on a regular grid
    std::vector<LabeledSample> d;
    for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 15; ++j) {
            const Real x = i / 14.0, y = j / 14.0;
            d.push_back({{x, y}, std::hypot(x - 0.5, y - 0.5) < 0.3 ? 1 : 0});
        }
    return d;
}

}  // namespace

TEST_CASE("unit scaling maps the box onto the unit cube", "[classifier]") {
    const UnitScaling s{Vector{{-2.0, 10.0}}, Vector{{2.0, 20.0}}};
    const Vector v = s.apply({0.0, 12.5});
    CHECK(v[0] == 0.5);
    CHECK(v[1] == 0.25);
}

TEST_CASE("median pairwise distance", "[classifier]") {
    std::vector<Vector> pts{Vector{{0.0}}, Vector{{1.0}}, Vector{{3.0}}};
    CHECK(median_pairwise_distance(pts) == 2.0);
}

TEST_CASE("linear SVM on separable data", "[classifier]") {
    std::vector<LabeledSample> d;
    for (int k = 0; k <= 10; ++k) {
        const Real x = k / 10.0;
        if (std::abs(x - 0.5) > 0.05) d.push_back({{x}, x > 0.5 ? 1 : 0});
    }
    SvmOptions o;
    o.kernel = KernelKind::Linear;
    o.c_box = 1e3;
    const auto m = train_svm(d, unit_box(1), o);
    for (const auto& s : d) CHECK((m.decision(s.rho) > 0.0) == (s.label == 1));
    // the maximum-margin boundary sits halfway between 0.4 and 0.6
    CHECK_THAT(m.decision({0.5}), WithinAbs(0.0, 1e-5));
    CHECK_THAT(m.decision({0.6}), WithinAbs(1.0, 1e-4));
}

TEST_CASE("SVM dual stays feasible", "[classifier]") {
    const auto d = ring_data();
    SvmOptions o;
    o.c_box = 5.0;
    const auto m = train_svm(d, unit_box(2), o);
    REQUIRE(m.alpha.size() == d.size());
    Real balance = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(m.alpha[i] >= 0.0);
        CHECK(m.alpha[i] <= 5.0 + 1e-12);
        balance += m.alpha[i] * (d[i].label ? 1.0 : -1.0);
    }
    CHECK_THAT(balance, WithinAbs(0.0, 1e-9));
    std::size_t wrong = 0;
    for (const auto& s : d) wrong += (m.decision(s.rho) > 0.0) != (s.label == 1);
    CHECK(wrong <= 2);
    CHECK(m.sigma > 0.0);
}

TEST_CASE("single-class training data is rejected", "[classifier]") {
    std::vector<LabeledSample> d{{{0.1}, 1}, {{0.7}, 1}};
    CHECK_THROWS_AS(train_svm(d, unit_box(1)), ValidationError);
}

TEST_CASE("Platt fit on two points hits the smoothed targets", "[classifier]") {
    // targets 2/3 and 1/3 are reachable exactly: a = -ln 2, b = 0
    const auto s = fit_platt({-1.0, 1.0}, {0, 1});
    CHECK_THAT(s.a, WithinAbs(-std::log(2.0), 1e-8));
    CHECK_THAT(s.b, WithinAbs(0.0, 1e-8));
    CHECK_THAT(s(1.0), WithinRel(2.0 / 3.0, 1e-8));
}

TEST_CASE("calibrated probabilities and serialization", "[classifier]") {
    const auto d = ring_data();
    const auto model = calibrate(train_svm(d, unit_box(2)), d);
    CHECK(model.predict_prob({0.5, 0.5}) > 0.8);
    CHECK(model.predict_prob({0.0, 0.0}) < 0.2);
    const auto again = calibrated_svm_from_json(to_json(model));
    for (const auto& s : d) CHECK(again.predict_prob(s.rho) == model.predict_prob(s.rho));
    CHECK_THROWS_AS(calibrated_svm_from_json(nlohmann::json{{"kernel", "rbf"}}), ValidationError);
}

TEST_CASE("uniform samples are reproducible and inside the box", "[asm]") {
    const ParameterDomain box{{"a", "b"}, {-1.0, 10.0}, {1.0, 20.0}};
    const auto s = uniform_samples(box, 500, 3, 0);
    CHECK(s.size() == 500);
    for (const auto& p : s) CHECK(box.contains(p));
    CHECK(s == uniform_samples(box, 500, 3, 0));
    CHECK(s != uniform_samples(box, 500, 3, 1));
    CHECK(s != uniform_samples(box, 500, 4, 0));
    // a longer draw extends a shorter one
    const auto head = uniform_samples(box, 10, 3, 0);
    CHECK(std::equal(head.begin(), head.end(), s.begin()));
}

TEST_CASE("boundary candidates rank by distance with index ties", "[asm]") {
    // binary fractions so that equal distances are exactly equal
    const std::vector<Real> p{0.5, 0.25, 0.75, 0.625, 0.875, 0.25};
    CHECK(select_boundary_candidates(p, 0.75, 3) == std::vector<std::size_t>{2, 3, 4});
    CHECK(select_boundary_candidates(p, 0.25, 2) == std::vector<std::size_t>{1, 5});
    CHECK(select_boundary_candidates(p, 0.75, 6).size() == 6);
    CHECK_THROWS_AS(select_boundary_candidates(p, 0.75, 7), ValidationError);
}

TEST_CASE("parameter domains validate", "[asm]") {
    CHECK_THROWS_AS((ParameterDomain{{"a"}, {1.0}, {1.0}}.validate()), ValidationError);
    CHECK_THROWS_AS((ParameterDomain{{"a", "b"}, {0.0}, {1.0}}.validate()), ValidationError);
    CHECK_THROWS_AS((ParameterDomain{{"a"}, {0.0}, {INFINITY}}.validate()), ValidationError);
    CHECK((ParameterDomain{{"a"}, {0.0}, {1.0}}.contains({1.0})));
    CHECK_FALSE((ParameterDomain{{"a"}, {0.0}, {1.0}}.contains({1.0 + 1e-12})));
}

TEST_CASE("ASM with a constant oracle is degenerate", "[asm]") {
    const ParameterDomain box{{"x", "y"}, {0.0, 0.0}, {1.0, 1.0}};
    AsmConfig cfg;
    cfg.n_init = 30;
    cfg.n_a = 10;
    cfg.n_r = 300;
    std::size_t calls = 0;
    const auto m = run_asm([&](const std::vector<Real>&) { return ++calls, 1; }, box, cfg);
    CHECK(m.degenerate);
    CHECK(calls == 30);
    CHECK(m.predict_prob({0.3, 0.3}) == 1.0);
}

TEST_CASE("ASM calls the oracle n_init + n_a times and is thread-count invariant", "[asm]") {
    const ParameterDomain box{{"x", "y"}, {0.0, 0.0}, {1.0, 1.0}};
    AsmConfig cfg;
    cfg.n_init = 60;
    cfg.n_a = 25;
    cfg.n_r = 1000;
    cfg.seed = 5;
    auto oracle = [](const std::vector<Real>& p) { return p[0] + 0.5 * p[1] < 0.7 ? 1 : 0; };

    worker_threads() = 1;
    const auto one = run_asm(oracle, box, cfg);
    worker_threads() = 4;
    const auto four = run_asm(oracle, box, cfg);
    worker_threads() = 1;
    CHECK(one.oracle_calls == 85);
    CHECK(one.samples.size() == 85);
    CHECK(to_json(one) == to_json(four));

    // refinement points lie near the boundary more often than the seed points
    auto near = [](const LabeledSample& s) { return std::abs(s.rho[0] + 0.5 * s.rho[1] - 0.7) < 0.15; };
    const auto seeds = std::count_if(one.samples.begin(), one.samples.begin() + 60, near);
    const auto refined = std::count_if(one.samples.begin() + 60, one.samples.end(), near);
    CHECK(refined / 25.0 > seeds / 60.0);

    const auto back = manifold_from_json(to_json(one));
    CHECK(back.predict_prob({0.2, 0.2}) == one.predict_prob({0.2, 0.2}));
}

TEST_CASE("manifold export grid", "[asm]") {
    const ParameterDomain box{{"x", "y"}, {0.0, 10.0}, {1.0, 20.0}};
    ManifoldModel m;
    m.domain = box;
    m.degenerate = true;
    m.constant_probability = 0.25;
    const auto g = export_manifold(m, 3, [](const std::vector<Real>& p) { return p[1] < 15.0; });
    REQUIRE(g.size() == 9);
    CHECK(g[0].rho == std::vector<Real>{0.0, 10.0});
    CHECK(g[1].rho == std::vector<Real>{0.0, 15.0});
    CHECK(g[3].rho == std::vector<Real>{0.5, 10.0});
    CHECK(g[8].rho == std::vector<Real>{1.0, 20.0});
    CHECK(g[0].in_rpi);
    CHECK_FALSE(g[1].in_rpi);
    CHECK(g[4].probability == 0.25);
    CHECK_THROWS_AS(export_manifold(m, 1), ValidationError);
}
