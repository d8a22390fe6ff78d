#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

#include "stabman/tuner.hpp"

#include <cmath>

using namespace stabman;
using namespace fixtures;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

LoopPlant plant() { return loop_plant(IbrPhysicalParams{}, 2.0 * kPi * 50.0, 0.98); }

}  // namespace

TEST_CASE("loop plant from physical data", "[tuner]") {
    const IbrPhysicalParams ph{};
    const auto p = plant();
    CHECK(p.R == ph.R);
    CHECK_THAT(p.L * 2.0 * kPi * 50.0, WithinRel(ph.L, 1e-15));
    CHECK_THAT(p.k_dc, WithinRel(ph.s_base * 1e6 / (ph.C * ph.v_base_dc * ph.v_base_dc), 1e-15));
    CHECK_THROWS_AS(loop_plant(ph, 0.0, 1.0), ValidationError);
}

TEST_CASE("PLL loop crossover in closed form", "[tuner]") {
    const auto p = plant();
    IbrControlParams c;
    c.kp_pll = 0.2;
    c.ki_pll = 9.0;
    // |L| = 1 with K = omega_b v_d0: w^4 = K^2 (kp^2 w^2 + ki^2)
    const Real K = p.omega_b * p.v_d0;
    const Real a = K * K * c.kp_pll * c.kp_pll;
    const Real w = std::sqrt(0.5 * (a + std::sqrt(a * a + 4.0 * K * K * c.ki_pll * c.ki_pll)));
    const Real pm = std::atan(c.kp_pll * w / c.ki_pll) * 180.0 / kPi;
    const auto m = loop_metric(Loop::Pll, c, p);
    REQUIRE(m.omega_c);
    CHECK_THAT(*m.omega_c, WithinRel(w, 1e-10));
    CHECK_THAT(*m.phase_margin, WithinAbs(pm, 1e-8));
}

TEST_CASE("proportional-only PLL is a first-order loop", "[tuner]") {
    auto p = plant();
    p.omega_b = 1.0;  // frequency output in rad/s instead of pu
    IbrControlParams c;
    c.kp_pll = 0.3;
    c.ki_pll = 0.0;
    const auto m = loop_metric(Loop::Pll, c, p);
    CHECK_THAT(*m.omega_c, WithinRel(0.3 * p.v_d0, 1e-10));
    CHECK_THAT(*m.phase_margin, WithinAbs(90.0, 1e-9));
    p.omega_b = 2.0 * kPi * 50.0;
    CHECK_THAT(*loop_metric(Loop::Pll, c, p).omega_c, WithinRel(0.3 * p.v_d0 * p.omega_b, 1e-10));
}

TEST_CASE("dc loop gain depends on the dc variant", "[tuner]") {
    auto p = plant();
    p.v_dc0 = 1.1;
    IbrControlParams c;
    c.kp_dc = 0.5;
    c.ki_dc = 0.0;
    c.dc_variant = DcVariant::Vdc;
    CHECK_THAT(*loop_metric(Loop::Dc, c, p).omega_c, WithinRel(0.5 * p.k_dc / 1.1, 1e-10));
    c.dc_variant = DcVariant::Vdc2;
    const auto m = loop_metric(Loop::Dc, c, p);
    CHECK_THAT(*m.omega_c, WithinRel(0.5 * 2.0 * p.k_dc, 1e-10));
    CHECK_THAT(*m.phase_margin, WithinAbs(90.0, 1e-9));
}

TEST_CASE("a loop with zero gains has no crossover", "[tuner]") {
    IbrControlParams c;
    c.kp_i = c.ki_i = 0.0;
    const auto m = loop_metric(Loop::Current, c, plant());
    CHECK_FALSE(m.omega_c);
    CHECK_FALSE(m.phase_margin);
    CHECK_FALSE(rpi_conditions(bw_pm(c, plant()), 314.0).c1);
}

TEST_CASE("RPI conditions", "[tuner]") {
    LoopMetrics m;
    m.current = {1000.0, 80.0};
    m.pll = {100.0, 60.0};
    m.dc = {600.0, 50.0};
    auto r = rpi_conditions(m, 314.159);
    CHECK(r.c1);
    CHECK(r.c2);
    CHECK(r.c3);
    m.pll.omega_c = 100.01;
    m.dc.omega_c = 629.0;
    m.current.phase_margin = 45.0;
    r = rpi_conditions(m, 314.159);
    CHECK_FALSE(r.c1);
    CHECK_FALSE(r.c2);
    CHECK_FALSE(r.c3);
}

TEST_CASE("RPI region agrees with pointwise membership", "[tuner]") {
    const ParameterDomain d{{"kp_pll", "ki_pll"}, {0.0, 0.0}, {0.35, 17.0}};
    IbrControlParams fixed;
    const auto p = plant();
    const auto region = rpi_region("kp_pll", "ki_pll", fixed, d, 9, p, 2.0 * kPi * 50.0);
    REQUIRE(region.size() == 81);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) {
            const std::vector<Real> rho{0.35 * i / 8.0, 17.0 * j / 8.0};
            CHECK(region[i * 9 + j] == in_rpi(d, rho, fixed, p, 2.0 * kPi * 50.0));
            inside += region[i * 9 + j];
        }
    CHECK(inside > 0);
    CHECK(inside < 81);
    CHECK_THROWS_AS(rpi_region("kp_pll", "kp_pll", fixed, d, 9, p, 314.0), ValidationError);
}

TEST_CASE("surrogate optimizer on a smooth box problem", "[tuner][surrogate]") {
    const ParameterDomain box{{"x", "y"}, {-1.0, -1.0}, {2.0, 2.0}};
    const auto f = [](const std::vector<Real>& x) { return std::pow(x[0] - 0.3, 2) + 2.0 * std::pow(x[1] + 0.2, 2); };
    const auto g = [](const std::vector<Real>&) { return std::vector<Real>{}; };
    SurrogateOptions o;
    o.budget = 120;
    o.seed = 3;
    const auto r = surrogate_optimize(f, g, box, o);
    CHECK(r.feasible);
    CHECK(r.evaluations == 120);
    CHECK(r.history.size() == 120);
    CHECK(r.objective < 1e-3);
    CHECK(box.contains(r.x));

    const auto again = surrogate_optimize(f, g, box, o);
    CHECK(again.x == r.x);
}

TEST_CASE("surrogate optimizer reports infeasibility", "[tuner][surrogate]") {
    const ParameterDomain box{{"x"}, {0.0}, {1.0}};
    const auto f = [](const std::vector<Real>& x) { return x[0]; };
    const auto g = [](const std::vector<Real>& x) { return std::vector<Real>{1.5 - x[0]}; };
    SurrogateOptions o;
    o.budget = 40;
    const auto r = surrogate_optimize(f, g, box, o);
    CHECK_FALSE(r.feasible);
    // the least violating point is returned
    CHECK(r.x[0] > 0.9);
}

TEST_CASE("evaluation bookkeeping", "[tuner][surrogate]") {
    Evaluation e{{0.0}, 1.0, {-0.5, 0.25, 0.0}};
    CHECK(e.violation() == 0.25);
    CHECK_FALSE(e.feasible());
    e.constraints[1] = -1.0;
    CHECK(e.feasible());
}

TEST_CASE("tuner problems validate", "[tuner]") {
    TunerProblem p;
    p.domain = default_tuning_domain(DcVariant::Vdc);
    CHECK_THROWS_AS(p.validate(), ValidationError);  // no cases
    p.cases.push_back(StudyCase{"toy", ibr_vs_source(), {"IBR1"}});
    p.scenarios.scenarios.push_back(Scenario{"base", {}, {}, {}});
    CHECK_NOTHROW(p.validate());
    p.eps = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.eps = 1e-3;
    p.domain.names[0] = "gain_x";
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("tuning the toy problem on a small budget", "[tuner]") {
    const auto net = ibr_vs_source();
    TunerProblem p;
    p.scenarios.scenarios.push_back(Scenario{"base", {}, {}, {}});
    p.cases.push_back(StudyCase{"toy", net, {"IBR1"}});
    p.base = net.device("IBR1").ibr.control;
    p.domain = ParameterDomain{{"kp_pll", "ki_pll"}, {0.0, 0.0}, {0.35, 17.0}};
    p.plant = loop_plant(net, "IBR1");
    p.omega_nom = net.system_frequency;
    p.budget = 40;
    p.seed = 2;
    const auto r = tune(p);
    CHECK(r.evaluations == 40);
    CHECK(r.history.size() == 40);
    for (const auto& e : r.history) CHECK(e.constraints.size() == 6);
    CHECK(r.in_bounds);
    CHECK(std::isfinite(r.alpha_max));

    const auto back = tuner_result_from_json(to_json(r));
    CHECK(back.rho == r.rho);
    CHECK(back.names == r.names);
    CHECK(back.feasible == r.feasible);
    CHECK(to_json(back) == to_json(r));
}
