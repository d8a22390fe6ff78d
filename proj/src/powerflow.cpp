#include "stabman/powerflow.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace stabman {

Complex PowerFlowSolution::voltage(const std::string& bus) const {
    for (std::size_t i = 0; i < bus_ids.size(); ++i)
        if (bus_ids[i] == bus) return std::polar(vm[static_cast<Eigen::Index>(i)], va[static_cast<Eigen::Index>(i)]);
    throw ValidationError("power flow has no bus '" + bus + "'");
}

Complex PowerFlowSolution::device_injection(const std::string& device) const {
    for (std::size_t i = 0; i < device_ids.size(); ++i)
        if (device_ids[i] == device) return device_power[i];
    throw ValidationError("power flow has no device '" + device + "'");
}

Complex PowerFlowSolution::losses() const {
    Complex total = -bus_load.sum();
    for (const auto& s : device_power) total += s;
    return total;
}

CMatrix bus_admittance(const NetworkModel& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    CMatrix Y = CMatrix::Zero(n, n);
    const Complex j(0.0, 1.0);
    auto idx = [&](const std::string& bus) { return static_cast<Eigen::Index>(*net.bus_index(bus)); };
    for (const auto& br : net.branches) {
        const auto& p = br.params;
        switch (br.kind) {
            case BranchKind::PiLine: {
                const auto a = idx(br.terminals[0]), c = idx(br.terminals[1]);
                const Complex y = 1.0 / Complex(p.r, p.x);
                Y(a, a) += y + j * (0.5 * p.b_total);
                Y(c, c) += y + j * (0.5 * p.b_total);
                Y(a, c) -= y;
                Y(c, a) -= y;
                break;
            }
            case BranchKind::Transformer: {
                const auto a = idx(br.terminals[0]), c = idx(br.terminals[1]);
                const Complex z1(p.r1, p.x1), z2(p.r2, p.x2);
                const Complex zm = p.r_m * Complex(0.0, p.x_m) / Complex(p.r_m, p.x_m);
                const Complex det = z1 * z2 + z1 * zm + z2 * zm;
                Y(a, a) += (z2 + zm) / det;
                Y(c, c) += (z1 + zm) / det;
                Y(a, c) -= zm / det;
                Y(c, a) -= zm / det;
                break;
            }
            case BranchKind::ShuntCap: Y(idx(br.terminals[0]), idx(br.terminals[0])) += j * p.b; break;
            case BranchKind::RlLoad: break;
        }
    }
    return Y;
}

CVector load_demand(const NetworkModel& net) {
    CVector s = CVector::Zero(static_cast<Eigen::Index>(net.buses.size()));
    for (const auto& br : net.branches)
        if (br.kind == BranchKind::RlLoad)
            s[static_cast<Eigen::Index>(*net.bus_index(br.terminals[0]))] += 1.0 / std::conj(Complex(br.params.r, br.params.x));
    return s;
}

namespace {

using Index = Eigen::Index;

const Device* device_at(const NetworkModel& net, const std::string& bus) {
    for (const auto& d : net.devices)
        if (d.bus == bus) return &d;
    return nullptr;
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkModel& input, const PowerFlowOptions& opts) {
    validate_network(input);
    NetworkModel net = expand_thevenin_sources(input);
    const Index n = static_cast<Index>(net.buses.size());
    const CMatrix Y = bus_admittance(net);
    const CVector load = load_demand(net);
    const Real base = net.power_base_mva;

    CVector s_spec = -load;
    std::vector<Index> pvpq, pq;
    Vector vm = Vector::Ones(n), va = Vector::Zero(n);
    for (Index k = 0; k < n; ++k) {
        const auto& bus = net.buses[static_cast<std::size_t>(k)];
        const Device* dev = device_at(net, bus.id);
        if (bus.role == BusRole::Slack) {
            vm[k] = bus.v_ref;
            continue;
        }
        if (dev) s_spec[k] += Complex(dev->p_mw, bus.role == BusRole::PQ ? dev->q_mvar : 0.0) / base;
        pvpq.push_back(k);
        if (bus.role == BusRole::PV)
            vm[k] = bus.v_ref;
        else
            pq.push_back(k);
    }
    const Index npv = static_cast<Index>(pvpq.size()), npq = static_cast<Index>(pq.size());

    auto voltages = [&] {
        CVector v(n);
        for (Index k = 0; k < n; ++k) v[k] = std::polar(vm[k], va[k]);
        return v;
    };

    PowerFlowSolution sol;
    int it = 0;
    Real mis = 0.0;
    int polish = 0;  // extra Newton steps past the tolerance, cheap at quadratic convergence
    Real last = std::numeric_limits<Real>::infinity();
    for (;; ++it) {
        const CVector V = voltages();
        const CVector I = Y * V;
        const CVector S = V.cwiseProduct(I.conjugate());
        const CVector dS = S - s_spec;
        Vector F(npv + npq);
        for (Index i = 0; i < npv; ++i) F[i] = dS[pvpq[i]].real();
        for (Index i = 0; i < npq; ++i) F[npv + i] = dS[pq[i]].imag();
        mis = F.size() ? F.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(mis)) throw NumericalError("power flow diverged (non-finite mismatch)");
        if (mis < opts.tolerance && (polish++ >= 2 || mis >= 0.5 * last || mis < 1e-13)) break;
        last = mis;
        if (it >= opts.max_iterations) {
            std::ostringstream os;
            os << "power flow did not converge in " << opts.max_iterations << " iterations (mismatch " << mis
               << " pu)";
            throw NumericalError(os.str());
        }

        // dS/dVa and dS/dVm in the polar form
        const CMatrix diagV = V.asDiagonal();
        CVector Vn(n);
        for (Index k = 0; k < n; ++k) Vn[k] = V[k] / std::abs(V[k]);
        const CMatrix dSa = Complex(0.0, 1.0) * diagV * (CMatrix(I.asDiagonal()) - Y * diagV).conjugate();
        const CMatrix dSm = diagV * (Y * Vn.asDiagonal()).conjugate() + CMatrix(I.conjugate().asDiagonal()) * Vn.asDiagonal();
        Matrix J(npv + npq, npv + npq);
        for (Index r = 0; r < npv; ++r) {
            for (Index c = 0; c < npv; ++c) J(r, c) = dSa(pvpq[r], pvpq[c]).real();
            for (Index c = 0; c < npq; ++c) J(r, npv + c) = dSm(pvpq[r], pq[c]).real();
        }
        for (Index r = 0; r < npq; ++r) {
            for (Index c = 0; c < npv; ++c) J(npv + r, c) = dSa(pq[r], pvpq[c]).imag();
            for (Index c = 0; c < npq; ++c) J(npv + r, npv + c) = dSm(pq[r], pq[c]).imag();
        }
        Eigen::FullPivLU<Matrix> lu(J);
        if (!lu.isInvertible()) throw NumericalError("power flow Jacobian is singular");
        const Vector dx = lu.solve(-F);
        for (Index i = 0; i < npv; ++i) va[pvpq[i]] += dx[i];
        for (Index i = 0; i < npq; ++i) vm[pq[i]] += dx[npv + i];
        if (!dx.allFinite() || (vm.array() <= 0.0).any())
            throw NumericalError("power flow diverged (voltage collapse)");
    }

    const CVector V = voltages();
    const CVector S = V.cwiseProduct((Y * V).conjugate());
    sol.bus_ids.reserve(net.buses.size());
    for (const auto& b : net.buses) sol.bus_ids.push_back(b.id);
    sol.vm = vm;
    sol.va = va;
    sol.mismatch = mis;
    sol.iterations = it;
    sol.bus_load = load;
    for (const auto& d : net.devices) {
        const Index k = static_cast<Index>(*net.bus_index(d.bus));
        sol.device_ids.push_back(d.id);
        sol.device_power.push_back(S[k] + load[k]);
    }

    // loads become the impedances that draw the same power at the solved voltage
    for (auto& br : net.branches) {
        if (br.kind != BranchKind::RlLoad) continue;
        const Real v2 = std::norm(V[static_cast<Index>(*net.bus_index(br.terminals[0]))]);
        br.params.r *= v2;
        br.params.x *= v2;
    }
    sol.network = std::move(net);
    return sol;
}

PowerFlowSolution solve_power_flow(const NetworkModel& net, const Scenario& scenario, const PowerFlowOptions& opts) {
    return solve_power_flow(apply_scenario(net, scenario), opts);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Port> subsystem_inputs(const EquilibriumState& eq, std::size_t k) {
    if (eq.devices[k])
        return std::visit([](const auto& m) { return std::decay_t<decltype(m)>::input_ports(); }, *eq.devices[k]);
    return passive_input_ports(eq.passives[k]);
}

std::vector<Port> subsystem_outputs(const EquilibriumState& eq, std::size_t k) {
    if (eq.devices[k]) return {{"v", 2}};
    return passive_output_ports(eq.passives[k]);
}

Index port_offset(const std::vector<Port>& ports, const std::string& name) {
    Index off = 0;
    for (const auto& p : ports) {
        if (p.name == name) return off;
        off += p.size;
    }
    throw ValidationError("no port '" + name + "'");
}

Index port_total(const std::vector<Port>& ports) {
    Index n = 0;
    for (const auto& p : ports) n += p.size;
    return n;
}

const Branch& branch_by_id(const NetworkModel& net, const std::string& id) {
    for (const auto& br : net.branches)
        if (br.id == id) return br;
    throw ValidationError("unknown branch '" + id + "'");
}

}  // namespace

EquilibriumState init_equilibrium(const PowerFlowSolution& pf) {
    const NetworkModel& net = pf.network;
    EquilibriumState eq;
    eq.topology = build_topology(net);
    eq.omega_base = net.system_frequency;
    const std::size_t ns = eq.topology.subsystems.size();
    eq.devices.resize(ns);
    eq.passives.resize(ns);
    eq.x.resize(ns);
    eq.u.resize(ns);

    for (std::size_t k = 0; k < ns; ++k) {
        const auto& info = eq.topology.subsystems[k];
        switch (info.kind) {
            case SubsystemKind::Device: {
                const Device& dev = net.device(info.element_id);
                DeviceModel model = make_device_model(dev, net.system_frequency, net.power_base_mva);
                const Complex v = pf.voltage(dev.bus);
                const Complex s = pf.device_injection(dev.id);
                auto [x, u] = std::visit([&](auto& m) { return m.initialize(v, s); }, model);
                if (std::holds_alternative<IdealSource>(model)) {
                    // the topology drops shunt capacitance in parallel with the source, so its
                    // current is what the series elements draw
                    Real b_shunt = 0.0;
                    for (const auto& br : net.branches) {
                        if (br.kind == BranchKind::ShuntCap && br.terminals[0] == dev.bus) b_shunt += br.params.b;
                        if (br.kind == BranchKind::PiLine)
                            for (const auto& t : br.terminals)
                                if (t == dev.bus) b_shunt += 0.5 * br.params.b_total;
                    }
                    const Complex i_in = -std::conj(s / v) + Complex(0.0, b_shunt) * v;
                    u[0] = i_in.real();
                    u[1] = i_in.imag();
                }
                eq.devices[k] = std::move(model);
                eq.x[k] = std::move(x);
                eq.u[k] = std::move(u);
                break;
            }
            case SubsystemKind::Branch: {
                const Branch& br = branch_by_id(net, info.element_id);
                eq.passives[k] = passive_element(net, info);
                std::vector<Complex> in;
                for (const auto& t : br.terminals) in.push_back(pf.voltage(t));
                eq.x[k] = passive_steady_state(eq.passives[k], in);
                break;
            }
            case SubsystemKind::BusCapacitor: {
                eq.passives[k] = passive_element(net, info);
                const Complex v = pf.voltage(info.element_id);
                eq.x[k] = passive_steady_state(eq.passives[k], {Complex(0.0, info.susceptance) * v});
                break;
            }
        }
    }
    return eq;
}

Real equilibrium_residual(const EquilibriumState& eq) {
    const std::size_t ns = eq.topology.subsystems.size();
    std::vector<Vector> y(ns), u(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        if (eq.devices[k]) {
            y[k] = eval_device_output(*eq.devices[k], eq.x[k], eq.u[k]);
            u[k] = eq.u[k];
        } else {
            y[k] = eval_passive_output(eq.passives[k], eq.x[k], Vector());
            u[k] = Vector::Zero(port_total(subsystem_inputs(eq, k)));
        }
    }
    for (const auto& c : eq.topology.connections) {
        if (c.external) continue;
        const auto in_off = port_offset(subsystem_inputs(eq, c.input.subsystem), c.input.port);
        Vector value = Vector::Zero(2);
        for (const auto& t : c.terms)
            value += t.sign *
                     y[t.output.subsystem].segment(port_offset(subsystem_outputs(eq, t.output.subsystem), t.output.port), 2);
        u[c.input.subsystem].segment(in_off, 2) = value;
    }
    Real res = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
        Vector dx;
        if (eq.devices[k]) {
            if (u[k].size()) res = std::max(res, (u[k] - eq.u[k]).cwiseAbs().maxCoeff());
            dx = eval_nonlinear_dynamics(*eq.devices[k], eq.x[k], u[k]);
        } else {
            dx = eval_passive_dynamics(eq.passives[k], eq.omega_base, eq.x[k], u[k]);
        }
        if (dx.size()) res = std::max(res, dx.cwiseAbs().maxCoeff());
    }
    return res;
}

std::vector<StateSpaceModel> linearize_equilibrium(const EquilibriumState& eq, const LinearizeOptions& opts) {
    std::vector<StateSpaceModel> models;
    models.reserve(eq.topology.subsystems.size());
    for (std::size_t k = 0; k < eq.topology.subsystems.size(); ++k) {
        if (eq.devices[k])
            models.push_back(linearize_device(*eq.devices[k], eq.x[k], eq.u[k], opts));
        else
            models.push_back(linearize_passive(eq.passives[k], eq.omega_base));
    }
    return models;
}

}  // namespace stabman
