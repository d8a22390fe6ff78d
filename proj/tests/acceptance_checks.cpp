#include "acceptance_checks.hpp"

#include "fixtures.hpp"

#include "stabman/network_io.hpp"

#include <cstdio>

namespace acceptance {

using namespace stabman;
using namespace fixtures;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct DeviceCase {
    std::string label;
    NetworkModel net;
    std::string device;
};

}  // namespace

// 1 --------------------------------------------------------------------------
Outcome linearization() {
    Real worst = 0.0;
    std::string worst_at;
    auto track = [&](Real e, const std::string& where) {
        if (e > worst || !(e == e)) {
            worst = e;
            worst_at = where;
        }
    };

    const std::vector<DeviceCase> devices{{"SG", sg_vs_source(), "G1"},
                                          {"IBR vdc", ibr_vs_source(DcVariant::Vdc), "IBR1"},
                                          {"IBR vdc2", ibr_vs_source(DcVariant::Vdc2), "IBR1"}};
    LinearizeOptions keep_all;
    keep_all.drop_inert_states = false;
    for (const auto& c : devices) {
        const auto eq = init_equilibrium(solve_power_flow(c.net));
        const std::size_t k = eq.topology.index_of(c.device);
        const auto& model = *eq.devices[k];
        const Vector x0 = eq.x[k], u0 = eq.u[k];
        const auto ss = linearize_device(model, x0, u0, keep_all);
        const auto fx = [&](const Vector& x) { return eval_nonlinear_dynamics(model, x, u0); };
        const auto fu = [&](const Vector& u) { return eval_nonlinear_dynamics(model, x0, u); };
        const auto gx = [&](const Vector& x) { return eval_device_output(model, x, u0); };
        const auto gu = [&](const Vector& u) { return eval_device_output(model, x0, u); };
        track(max_relative_error(ss.A, central_jacobian(fx, x0)), c.label + " A");
        track(max_relative_error(ss.B, central_jacobian(fu, u0)), c.label + " B");
        track(max_relative_error(ss.C, central_jacobian(gx, x0)), c.label + " C");
        track(max_relative_error(ss.D, central_jacobian(gu, u0)), c.label + " D");
    }

    // passive kinds at an arbitrary non-equilibrium point; they are exactly linear
    const Real wb = 2.0 * kPi * 50.0;
    std::vector<PassiveElement> passives(4);
    passives[0] = {"series", PassiveKind::SeriesRl, {}};
    passives[0].params.r = 0.02;
    passives[0].params.x = 0.2;
    passives[1] = {"load", PassiveKind::RlLoad, {}};
    passives[1].params.r = 1.5;
    passives[1].params.x = 0.7;
    passives[2] = {"trafo", PassiveKind::Transformer, {}};
    passives[2].params.r1 = passives[2].params.r2 = 0.004;
    passives[2].params.x1 = passives[2].params.x2 = 0.06;
    passives[2].params.r_m = 300.0;
    passives[2].params.x_m = 250.0;
    passives[3] = {"cap", PassiveKind::ShuntCapacitor, {}};
    passives[3].params.b = 0.08;
    for (const auto& el : passives) {
        const auto ss = linearize_passive(el, wb);
        Vector x0(ss.order()), u0(ss.input_size());
        for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = 0.3 - 0.17 * static_cast<Real>(i);
        for (Eigen::Index i = 0; i < u0.size(); ++i) u0[i] = 0.9 + 0.05 * static_cast<Real>(i);
        const auto fx = [&](const Vector& x) { return eval_passive_dynamics(el, wb, x, u0); };
        const auto fu = [&](const Vector& u) { return eval_passive_dynamics(el, wb, x0, u); };
        const auto gx = [&](const Vector& x) { return eval_passive_output(el, x, u0); };
        track(max_relative_error(ss.A, central_jacobian(fx, x0)), el.name + " A");
        track(max_relative_error(ss.B, central_jacobian(fu, u0)), el.name + " B");
        track(max_relative_error(ss.C, central_jacobian(gx, x0)), el.name + " C");
    }
    return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " (" + worst_at + ")"};
}

// 2 --------------------------------------------------------------------------
Matrix monolithic_chain(const NetworkModel& net) {
    // states (complex): i_L1, v_B, i_L2, v_C, i_LD
    const Real wb = net.system_frequency;
    const auto& l1 = net.branches[0].params;
    const auto& l2 = net.branches[1].params;
    const auto& ld = net.branches[2].params;
    const Real bB = 0.5 * l1.b_total + 0.5 * l2.b_total, bC = 0.5 * l2.b_total;
    const Complex j(0.0, 1.0);
    CMatrix Ac = CMatrix::Zero(5, 5);
    Ac(0, 0) = -wb * l1.r / l1.x - j * wb;
    Ac(0, 1) = -wb / l1.x;
    Ac(1, 0) = wb / bB;
    Ac(1, 2) = -wb / bB;
    Ac(1, 1) = -j * wb;
    Ac(2, 1) = wb / l2.x;
    Ac(2, 3) = -wb / l2.x;
    Ac(2, 2) = -wb * l2.r / l2.x - j * wb;
    Ac(3, 2) = wb / bC;
    Ac(3, 4) = -wb / bC;
    Ac(3, 3) = -j * wb;
    Ac(4, 3) = wb / ld.x;
    Ac(4, 4) = -wb * ld.r / ld.x - j * wb;
    Matrix A(10, 10);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            const Complex z = Ac(r, c);
            A.block<2, 2>(2 * r, 2 * c) << z.real(), -z.imag(), z.imag(), z.real();
        }
    return A;
}

Outcome assembly_oracle() {
    const auto net = three_bus_chain();
    const auto op = linearize_operating_point(net, Scenario{});
    const Matrix oracle = monolithic_chain(op.power_flow.network);
    const Real e_oracle = spectrum_distance(op.spectrum.values, eigenvalues(oracle).values, 1e-12);

    // same circuit with subsystems listed in a different order
    auto shuffled = net;
    std::reverse(shuffled.branches.begin(), shuffled.branches.end());
    const auto op2 = linearize_operating_point(shuffled, Scenario{});
    const Real e_perm = spectrum_distance(op2.spectrum.values, op.spectrum.values, 1e-12);
    const bool ok = op.system.A.rows() == 10 && e_oracle < 1e-8 && e_perm < 1e-10;
    return {ok, "oracle " + fmt("%.2e", e_oracle) + ", permutation " + fmt("%.2e", e_perm)};
}

// 3 --------------------------------------------------------------------------
Outcome aggregation() {
    const int N = 70;
    Device unit;
    unit.id = "unit";
    unit.bus = "PCC";
    unit.kind = DeviceKind::IBR;
    unit.rating_mva = 5.0;
    unit.ibr.n_units = 1;
    Device agg = unit;
    agg.id = "agg";
    agg.rating_mva = 5.0 * N;
    agg.ibr.n_units = N;

    const Real wb = 2.0 * kPi * 50.0, base = 100.0;
    const Complex v(1.01, -0.07), s_unit(0.036, 0.004);
    auto m1 = make_device_model(unit, wb, base);
    auto mN = make_device_model(agg, wb, base);
    const auto [x1, u1] = std::get<Inverter>(m1).initialize(v, s_unit);
    const auto [xN, uN] = std::get<Inverter>(mN).initialize(v, s_unit * static_cast<Real>(N));
    const auto ss1 = linearize_device(m1, x1, u1);
    const auto ssN = linearize_device(mN, xN, uN);
    const auto vref = *ss1.input_offset("V_ref"), cur = *ss1.input_offset("i");

    Real worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Real w = std::pow(10.0, -1.0 + 5.0 * k / 19.0);
        const Complex s(0.0, w);
        const CMatrix T1 = ss1.transfer(s), TN = ssN.transfer(s);
        // N identical units sharing the terminal voltage split the current evenly
        CMatrix expected(2, 3);
        expected.col(0) = T1.col(vref);
        expected.rightCols(2) = T1.middleCols(cur, 2) / static_cast<Real>(N);
        CMatrix got(2, 3);
        got.col(0) = TN.col(vref);
        got.rightCols(2) = TN.middleCols(cur, 2);
        worst = std::max(worst, (got - expected).norm() / expected.norm());
    }
    return {worst < 1e-8, "max relative deviation over 20 frequencies " + fmt("%.2e", worst)};
}

// 4 --------------------------------------------------------------------------
Outcome power_flow() {
    std::string detail;
    bool ok = true;

    // no load, no charging: the flat start is the solution
    auto flat = empty_net("flat");
    flat.buses = {{"A", BusRole::Slack, 20.0, 1.0}, {"B", BusRole::PQ, 20.0, 1.0}, {"C", BusRole::PQ, 20.0, 1.0}};
    flat.devices.push_back(ideal_source("SRC", "A"));
    flat.branches.push_back(line("AB", "A", "B", 0.01, 0.1));
    flat.branches.push_back(line("BC", "B", "C", 0.02, 0.1));
    flat.branches.push_back(line("CA", "C", "A", 0.01, 0.2));
    const auto f = solve_power_flow(flat);
    const bool flat_ok = (f.vm.array() == 1.0).all() && (f.va.array() == 0.0).all() && f.iterations == 0;
    ok &= flat_ok;
    detail += flat_ok ? "flat exact" : "flat NOT exact";

    // two-bus closed form, Q = 0: V2 = cos(t), P = V2 sin(t) / x, t found by bisection
    auto two = empty_net("two");
    two.buses = {{"S", BusRole::Slack, 20.0, 1.0}, {"L", BusRole::PQ, 20.0, 1.0}};
    two.devices.push_back(ideal_source("SRC", "S"));
    two.branches.push_back(line("SL", "S", "L", 0.0, 0.1));
    two.branches.push_back(pq_load("LD1", "L", {0.25, 0.1}));
    two.branches.push_back(pq_load("LD2", "L", {0.25, -0.1}));
    const auto t = solve_power_flow(two);
    Real lo = -kPi / 4.0, hi = 0.0;
    for (int it = 0; it < 200; ++it) {
        const Real mid = 0.5 * (lo + hi);
        (std::cos(mid) * std::sin(mid) / 0.1 + 0.5 < 0.0 ? lo : hi) = mid;
    }
    const Real theta = 0.5 * (lo + hi);
    const Real e2 = std::max(std::abs(t.vm[1] - std::cos(theta)), std::abs(t.va[1] - theta));
    ok &= e2 < 1e-6;
    detail += ", two-bus error " + fmt("%.1e", e2);

    // illustrative 12-bus network over its scenario set
    const auto net = network_from_json(read_json_file(data_file("example_12bus.json")));
    const auto set = read_scenario_file(net, data_file("scenarios_12bus.json"));
    Real res = 0.0, balance = 0.0;
    for (const auto& sc : set.scenarios) {
        const auto pf = solve_power_flow(net, sc);
        res = std::max(res, equilibrium_residual(init_equilibrium(pf)));
        // injections = consumption + losses, with losses computed branch by branch
        const CMatrix Y = bus_admittance(pf.network);
        CVector V(pf.vm.size());
        for (Eigen::Index i = 0; i < V.size(); ++i) V[i] = std::polar(pf.vm[i], pf.va[i]);
        const Complex injected_by_network = (V.array() * (Y * V).conjugate().array()).sum();
        Complex devices(0.0, 0.0);
        for (const auto& s : pf.device_power) devices += s;
        balance = std::max(balance, std::abs(devices - pf.bus_load.sum() - injected_by_network));
    }
    ok &= res < 1e-6 && balance < 1e-8;
    detail += ", 12-bus residual " + fmt("%.1e", res) + " over " + std::to_string(set.size()) + " scenarios" +
              ", balance " + fmt("%.1e", balance);
    return {ok, detail};
}

}  // namespace acceptance
