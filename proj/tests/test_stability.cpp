#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

#include "stabman/network_io.hpp"
#include "stabman/stability.hpp"

#include <limits>

using namespace stabman;
using namespace fixtures;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

StateSpaceModel scalar_block(const std::string& name, Real a, Real b, Real c, Real d) {
    StateSpaceModel m;
    m.name = name;
    m.A = Matrix::Constant(1, 1, a);
    m.B = Matrix::Constant(1, 1, b);
    m.C = Matrix::Constant(1, 1, c);
    m.D = Matrix::Constant(1, 1, d);
    m.state_names = {"x"};
    m.inputs = {{"u", 1}};
    m.outputs = {{"y", 1}};
    return m;
}

}  // namespace

TEST_CASE("assembly closes the loop through feedthrough", "[assembler]") {
    // u1 = y2, u2 = y1: A_ps = A + B K (I - D K)^-1 C by hand
    const auto m1 = scalar_block("one", -1.0, 2.0, 1.0, 0.5);
    const auto m2 = scalar_block("two", -3.0, 1.0, 4.0, 0.25);
    Topology t;
    t.subsystems = {{"one", SubsystemKind::Device, "one", 0.0}, {"two", SubsystemKind::Device, "two", 0.0}};
    t.connections = {Connection{PortRef{0, "u"}, {CurrentTerm{PortRef{1, "y"}, 1.0}}, false},
                     Connection{PortRef{1, "u"}, {CurrentTerm{PortRef{0, "y"}, 1.0}}, false}};
    const auto sys = assemble({m1, m2}, t);

    Matrix A{{-1.0, 0.0}, {0.0, -3.0}}, B{{2.0, 0.0}, {0.0, 1.0}}, C{{1.0, 0.0}, {0.0, 4.0}}, D{{0.5, 0.0}, {0.0, 0.25}};
    Matrix K{{0.0, 1.0}, {1.0, 0.0}};
    const Matrix expected = A + B * K * (Matrix::Identity(2, 2) - D * K).inverse() * C;
    CHECK((sys.A - expected).norm() < 1e-14);
    CHECK(sys.state_labels == std::vector<std::string>{"one.x", "two.x"});
    CHECK(sys.B.cols() == 0);
}

TEST_CASE("external inputs stay as columns of B", "[assembler]") {
    const auto m1 = scalar_block("one", -1.0, 2.0, 1.0, 0.0);
    Topology t;
    t.subsystems = {{"one", SubsystemKind::Device, "one", 0.0}};
    t.connections = {Connection{PortRef{0, "u"}, {}, true}};
    const auto sys = assemble({m1}, t);
    CHECK(sys.A(0, 0) == -1.0);
    REQUIRE(sys.B.cols() == 1);
    CHECK(sys.B(0, 0) == 2.0);
}

TEST_CASE("algebraic loops without a solution are reported", "[assembler]") {
    const auto m1 = scalar_block("one", -1.0, 1.0, 1.0, 1.0);
    const auto m2 = scalar_block("two", -1.0, 1.0, 1.0, 1.0);
    Topology t;
    t.subsystems = {{"one", SubsystemKind::Device, "one", 0.0}, {"two", SubsystemKind::Device, "two", 0.0}};
    t.connections = {Connection{PortRef{0, "u"}, {CurrentTerm{PortRef{1, "y"}, 1.0}}, false},
                     Connection{PortRef{1, "u"}, {CurrentTerm{PortRef{0, "y"}, 1.0}}, false}};
    CHECK_THROWS_AS(assemble({m1, m2}, t), NumericalError);
}

TEST_CASE("topology of the chain", "[assembler]") {
    const auto topo = build_topology(three_bus_chain());
    // source, three branches, capacitors at B and C (A's is shunted by the source)
    CHECK(topo.subsystems.size() == 6);
    CHECK_NOTHROW(topo.index_of("L1"));
    CHECK_THROWS_AS(topo.index_of("nope"), ValidationError);
}

TEST_CASE("spectrum of a known matrix", "[stability]") {
    Matrix A{{-1.0, 5.0, 0.0}, {-5.0, -1.0, 0.0}, {0.0, 0.0, -0.5}};
    const auto s = eigenvalues(A);
    CHECK_THAT(s.abscissa(), WithinAbs(-0.5, 1e-12));
    CHECK(std::abs(s.values[s.worst()] - Complex(-0.5, 0.0)) < 1e-12);
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK_FALSE(s.structural_zero[k]);
        const auto i = static_cast<Eigen::Index>(k);
        CHECK((A.cast<Complex>() * s.vectors.col(i) - s.values[i] * s.vectors.col(i)).norm() < 1e-12);
        CHECK_THAT(s.vectors.col(i).norm(), WithinAbs(1.0, 1e-12));
    }
    CHECK(eigenvalues(Matrix(0, 0)).abscissa() == -kInf);
}

TEST_CASE("badly scaled matrices keep accurate eigenvalues", "[stability]") {
    Matrix A{{-1.0, 1e6}, {-1e-6, -2.0}};
    const auto s = eigenvalues(A);
    const Complex disc = std::sqrt(Complex(0.25 - 1.0, 0.0));
    std::vector<Complex> want{-1.5 + disc, -1.5 - disc};
    CHECK(fixtures::spectrum_distance(s.values, Eigen::Map<CVector>(want.data(), 2), 1e-12) < 1e-10);
}

TEST_CASE("the reference-angle zero is excluded only when it is uniform", "[stability]") {
    // two angle states driven by their difference: a rigid rotation is a zero mode
    Matrix A{{-1.0, 1.0, 0.0}, {1.0, -1.0, 0.0}, {0.0, 0.0, -2.0}};
    auto s = eigenvalues(A);
    CHECK(std::count(s.structural_zero.begin(), s.structural_zero.end(), true) == 1);
    CHECK(s.abscissa() == 0.0);
    exclude_reference_mode(s, {true, true, false});
    CHECK_THAT(s.abscissa(), WithinAbs(-2.0, 1e-12));

    // a zero that moves only one angle is a genuine marginal mode
    Matrix B{{0.0, 0.0, 0.0}, {0.0, -1.0, 0.0}, {0.0, 0.0, -2.0}};
    auto t = eigenvalues(B);
    exclude_reference_mode(t, {true, true, false});
    CHECK(t.abscissa() == 0.0);
}

TEST_CASE("dominant state of a mode", "[stability]") {
    Matrix A{{-1.0, 0.0}, {0.0, -7.0}};
    const auto s = eigenvalues(A);
    for (Eigen::Index k = 0; k < 2; ++k) {
        const std::string want = std::abs(s.values[k].real() + 1.0) < 1e-12 ? "first" : "second";
        CHECK(dominant_state(s, k, {"first", "second"}) == want);
    }
}

TEST_CASE("verdict semantics", "[stability]") {
    CHECK(verdict_from_abscissae({-1.0, -0.2}).label == 1);
    CHECK(verdict_from_abscissae({-1.0, 0.0}).label == 0);
    const auto v = verdict_from_abscissae({-1.0, std::nan(""), -3.0, kInf});
    CHECK(v.label == 0);
    CHECK(v.failing == std::vector<std::size_t>{1, 3});
    CHECK(verdict_from_abscissae({-0.05}, 0.1).label == 0);
    CHECK(verdict_from_abscissae({-0.15}, 0.1).label == 1);
}

TEST_CASE("gain names", "[stability]") {
    CHECK(gain_names().size() == 6);
    CHECK(canonical_gain_name("kp_pll") == "kp_pll");
    CHECK(canonical_gain_name("k_p_pll") == "kp_pll");
    CHECK_THROWS_AS(canonical_gain_name("kp_turbo"), ValidationError);
    IbrControlParams c;
    gain_ref(c, "ki_i") = 12.5;
    CHECK(c.ki_i == 12.5);
    CHECK(gain_value(c, "ki_i") == 12.5);
}

TEST_CASE("parameter points overwrite the focus devices", "[stability]") {
    const StudyCase ctx{"toy", ibr_vs_source(), {"IBR1"}};
    const auto net = apply_parameters(ctx, {"kp_pll", "ki_dc"}, {0.2, 40.0});
    CHECK(net.device("IBR1").ibr.control.kp_pll == 0.2);
    CHECK(net.device("IBR1").ibr.control.ki_dc == 40.0);
    CHECK(ctx.net.device("IBR1").ibr.control.kp_pll != 0.2);
    CHECK_THROWS_AS(apply_parameters(ctx, {"kp_pll"}, {0.2, 1.0}), ValidationError);
    const StudyCase wrong{"toy", ibr_vs_source(), {"IBR9"}};
    CHECK_THROWS_AS(apply_parameters(wrong, {"kp_pll"}, {0.2}), ValidationError);
}

TEST_CASE("operating points that cannot be evaluated are unstable", "[stability]") {
    Scenario heavy{"heavy", {}, {}, {}};
    heavy.dispatch["IBR1"].p_mw = 1e4;
    const auto r = scenario_abscissa(ibr_vs_source(), heavy);
    CHECK(r.abscissa == kInf);
    CHECK_FALSE(r.reason.empty());
}

TEST_CASE("pipeline on the bundled networks", "[stability]") {
    const auto toy = network_from_json(read_json_file(data_file("toy_ibr_grid.json")));
    const auto op = linearize_operating_point(toy, Scenario{});
    CHECK(op.spectrum.abscissa() < 0.0);
    CHECK(op.system.A.rows() == static_cast<Eigen::Index>(op.system.state_labels.size()));

    const auto net = network_from_json(read_json_file(data_file("example_12bus.json")));
    const auto big = linearize_operating_point(net, Scenario{});
    CHECK(big.spectrum.abscissa() < 0.0);
    // four machines, one common rotation: exactly one mode is set aside
    CHECK(std::count(big.spectrum.excluded.begin(), big.spectrum.excluded.end(), true) == 1);
}

TEST_CASE("pssa takes the worst case and scenario", "[stability]") {
    const StudyCase a{"a", ibr_vs_source(), {"IBR1"}};
    const ScenarioSet one{{Scenario{"base", {}, {}, {}}}};
    const Real single = scenario_abscissa(a.net, one.scenarios[0]).abscissa;
    CHECK(pssa({}, {}, {a}, one) == single);
    Scenario heavy{"heavy", {}, {}, {}};
    heavy.dispatch["IBR1"].p_mw = 1e4;
    ScenarioSet two = one;
    two.scenarios.push_back(heavy);
    CHECK(pssa({}, {}, {a}, two) == kInf);
}
