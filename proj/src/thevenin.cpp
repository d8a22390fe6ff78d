#include "stabman/netmodel.hpp"
#include "stabman/powerflow.hpp"

#include <cmath>

namespace stabman {

namespace {

bool has_impedance(const Device& d) {
    return d.kind == DeviceKind::TheveninSource && (d.thevenin.r != 0.0 || d.thevenin.x != 0.0);
}

const Device* local_device(const NetworkModel& net, const std::string& bus) {
    for (const auto& d : net.devices)
        if (d.bus == bus && !has_impedance(d)) return &d;
    return nullptr;
}

}  // namespace

NetworkModel expand_thevenin_sources(const NetworkModel& net) {
    NetworkModel out = net;
    for (auto& dev : out.devices) {
        if (dev.kind != DeviceKind::TheveninSource) continue;
        const std::size_t b = *out.bus_index(dev.bus);
        if (!has_impedance(dev)) {
            out.buses[b].v_ref = dev.thevenin.v;
            continue;
        }
        Bus emf{dev.id + "#emf", BusRole::Slack, out.buses[b].base_voltage_kv, dev.thevenin.v};
        Branch z{dev.id + "#z", BranchKind::PiLine, {emf.id, dev.bus}, {}};
        z.params.r = dev.thevenin.r;
        z.params.x = dev.thevenin.x;
        const Device* other = local_device(out, dev.bus);
        out.buses[b].role = other && other->kind == DeviceKind::SG ? BusRole::PV : BusRole::PQ;
        dev.bus = emf.id;
        dev.thevenin.r = dev.thevenin.x = 0.0;
        out.buses.push_back(std::move(emf));
        out.branches.push_back(std::move(z));
    }
    return out;
}

Complex driving_point_impedance(const NetworkModel& input, const std::string& bus) {
    if (!input.bus_index(bus)) throw ValidationError("unknown bus '" + bus + "'");
    const NetworkModel net = expand_thevenin_sources(input);
    CMatrix Y = bus_admittance(net);
    const auto n = Y.rows();
    std::vector<bool> grounded(static_cast<std::size_t>(n), false);
    for (const auto& br : net.branches)
        if (br.kind == BranchKind::RlLoad) {
            const auto k = static_cast<Eigen::Index>(*net.bus_index(br.terminals[0]));
            Y(k, k) += 1.0 / Complex(br.params.r, br.params.x);
        }
    const Device* own = local_device(net, bus);
    for (const auto& d : net.devices) {
        if (&d == own) continue;
        const auto k = static_cast<Eigen::Index>(*net.bus_index(d.bus));
        if (d.kind == DeviceKind::SG) {
            // subtransient reactance on the system base
            const Real scale = net.power_base_mva / d.rating_mva;
            Y(k, k) += 1.0 / (Complex(d.sg.rs, d.sg.xd2) * scale);
        } else if (d.kind == DeviceKind::TheveninSource) {
            grounded[static_cast<std::size_t>(k)] = true;
        }
    }
    const auto target = static_cast<Eigen::Index>(*net.bus_index(bus));
    if (grounded[static_cast<std::size_t>(target)]) return {0.0, 0.0};

    std::vector<Eigen::Index> keep;
    Eigen::Index pos = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (grounded[static_cast<std::size_t>(k)]) continue;
        if (k == target) pos = static_cast<Eigen::Index>(keep.size());
        keep.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    CMatrix Yr(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) Yr(r, c) = Y(keep[r], keep[c]);
    Eigen::FullPivLU<CMatrix> lu(Yr);
    if (!lu.isInvertible()) throw NumericalError("singular network reduction at bus '" + bus + "' (isolated part)");
    CVector e = CVector::Zero(m);
    e[pos] = 1.0;
    return lu.solve(e)[pos];
}

NetworkModel thevenin_reduce(const NetworkModel& net, const std::string& keep_bus, const Scenario& scenario) {
    validate_network(net);
    if (!net.bus_index(keep_bus)) throw ValidationError("unknown bus '" + keep_bus + "'");
    const NetworkModel applied = apply_scenario(net, scenario);
    const PowerFlowSolution full = solve_power_flow(applied);

    NetworkModel open = applied;
    const Device* dev = local_device(applied, keep_bus);
    std::optional<Device> kept;
    auto& bus = open.buses[*open.bus_index(keep_bus)];
    if (dev) {
        if (bus.role == BusRole::Slack)
            throw ValidationError("bus '" + keep_bus + "' hosts the slack device; choose another bus to keep");
        kept = *dev;
        std::erase_if(open.devices, [&](const Device& d) { return d.id == dev->id; });
        bus.role = BusRole::PQ;
    }
    const PowerFlowSolution oc = solve_power_flow(open);
    const Complex v_oc = oc.voltage(keep_bus);
    Complex z = driving_point_impedance(oc.network, keep_bus);
    if (std::abs(z) == 0.0)
        throw ValidationError("bus '" + keep_bus + "' is held by an ideal source; its thevenin impedance is zero");
    if (z.real() < 0.0 && z.real() > -1e-12 * std::abs(z)) z.real(0.0);

    NetworkModel out;
    out.name = net.name + " (thevenin at " + keep_bus + ")";
    out.system_frequency = net.system_frequency;
    out.power_base_mva = net.power_base_mva;
    const Bus& orig = applied.buses[*applied.bus_index(keep_bus)];
    out.buses.push_back(Bus{keep_bus, BusRole::Slack, orig.base_voltage_kv, std::abs(full.voltage(keep_bus))});

    Device th;
    th.id = "thevenin";
    th.bus = keep_bus;
    th.kind = DeviceKind::TheveninSource;
    th.thevenin = {z.real(), z.imag(), std::abs(v_oc)};
    if (kept) {
        if (kept->id == th.id) th.id = "thevenin#grid";
        const Complex s = full.device_injection(kept->id) * net.power_base_mva;
        kept->p_mw = s.real();
        kept->q_mvar = s.imag();
        out.devices.push_back(*kept);
    }
    out.devices.push_back(th);
    return out;
}

}  // namespace stabman
