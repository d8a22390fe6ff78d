#include "stabman/assembler.hpp"

#include <optional>

namespace stabman {

std::size_t Topology::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < subsystems.size(); ++i)
        if (subsystems[i].name == name) return i;
    throw ValidationError("topology has no subsystem '" + name + "'");
}

namespace {

std::string cap_name(const std::string& bus) { return "C@" + bus; }

Connection wire(std::size_t input, const std::string& port, std::size_t source) {
    return Connection{PortRef{input, port}, {CurrentTerm{PortRef{source, "v"}, 1.0}}, false};
}

Connection external(std::size_t input, const std::string& port) { return Connection{PortRef{input, port}, {}, true}; }

}  // namespace

Topology build_topology(const NetworkModel& net) {
    Topology topo;
    const std::size_t nb = net.buses.size();

    std::vector<std::optional<std::size_t>> definer(nb);
    std::vector<Real> bus_b(nb, 0.0);
    std::vector<std::vector<CurrentTerm>> inflow(nb);

    for (const auto& dev : net.devices) {
        if (dev.kind == DeviceKind::TheveninSource && (dev.thevenin.r != 0.0 || dev.thevenin.x != 0.0))
            throw ValidationError("device '" + dev.id + "': expand thevenin sources before building the topology");
        const std::size_t b = *net.bus_index(dev.bus);
        if (definer[b]) throw ValidationError("bus '" + dev.bus + "' hosts more than one device");
        definer[b] = topo.subsystems.size();
        topo.subsystems.push_back({dev.id, SubsystemKind::Device, dev.id, 0.0});
    }

    for (const auto& br : net.branches) {
        if (br.kind == BranchKind::ShuntCap) {
            bus_b[*net.bus_index(br.terminals[0])] += br.params.b;
            continue;
        }
        if (br.kind == BranchKind::PiLine) {
            bus_b[*net.bus_index(br.terminals[0])] += 0.5 * br.params.b_total;
            bus_b[*net.bus_index(br.terminals[1])] += 0.5 * br.params.b_total;
        }
        topo.subsystems.push_back({br.id, SubsystemKind::Branch, br.id, 0.0});
    }

    for (std::size_t b = 0; b < nb; ++b) {
        if (bus_b[b] <= 0.0) continue;
        if (definer[b]) {
            const auto& dev = net.devices[*net.device_index(topo.subsystems[*definer[b]].element_id)];
            // an ideal source in parallel with a capacitor: the capacitor has no effect
            if (dev.kind == DeviceKind::TheveninSource) continue;
            throw ValidationError("bus '" + net.buses[b].id + "' has both device '" + dev.id +
                                  "' and shunt capacitance; both would define the junction voltage");
        }
        definer[b] = topo.subsystems.size();
        topo.subsystems.push_back({cap_name(net.buses[b].id), SubsystemKind::BusCapacitor, net.buses[b].id, bus_b[b]});
    }

    auto voltage_of = [&](const std::string& bus) -> std::size_t {
        const std::size_t b = *net.bus_index(bus);
        if (!definer[b]) throw ValidationError("no voltage source at junction '" + bus + "'");
        return *definer[b];
    };

    for (std::size_t s = 0; s < topo.subsystems.size(); ++s) {
        const auto& info = topo.subsystems[s];
        if (info.kind != SubsystemKind::Branch) continue;
        const Branch* found = nullptr;
        for (const auto& candidate : net.branches)
            if (candidate.id == info.element_id) found = &candidate;
        const Branch& br = *found;
        const std::size_t a = *net.bus_index(br.terminals[0]);
        switch (br.kind) {
            case BranchKind::PiLine: {
                const std::size_t c = *net.bus_index(br.terminals[1]);
                topo.connections.push_back(wire(s, "v_from", voltage_of(br.terminals[0])));
                topo.connections.push_back(wire(s, "v_to", voltage_of(br.terminals[1])));
                inflow[a].push_back(CurrentTerm{PortRef{s, "i"}, -1.0});
                inflow[c].push_back(CurrentTerm{PortRef{s, "i"}, +1.0});
                break;
            }
            case BranchKind::Transformer: {
                const std::size_t c = *net.bus_index(br.terminals[1]);
                topo.connections.push_back(wire(s, "v1", voltage_of(br.terminals[0])));
                topo.connections.push_back(wire(s, "v2", voltage_of(br.terminals[1])));
                inflow[a].push_back(CurrentTerm{PortRef{s, "i1"}, -1.0});
                inflow[c].push_back(CurrentTerm{PortRef{s, "i2"}, +1.0});
                break;
            }
            case BranchKind::RlLoad:
                topo.connections.push_back(wire(s, "v", voltage_of(br.terminals[0])));
                inflow[a].push_back(CurrentTerm{PortRef{s, "i"}, -1.0});
                break;
            case BranchKind::ShuntCap: break;
        }
    }

    for (std::size_t b = 0; b < nb; ++b) {
        if (!definer[b]) continue;
        topo.connections.push_back(Connection{PortRef{*definer[b], "i"}, inflow[b], false});
        const auto& info = topo.subsystems[*definer[b]];
        if (info.kind != SubsystemKind::Device) continue;
        const auto& dev = net.devices[*net.device_index(info.element_id)];
        if (dev.kind == DeviceKind::SG) {
            topo.connections.push_back(external(*definer[b], "P_ref"));
            topo.connections.push_back(external(*definer[b], "V_ref"));
        } else if (dev.kind == DeviceKind::IBR) {
            topo.connections.push_back(external(*definer[b], "I_dc"));
            topo.connections.push_back(external(*definer[b], "V_ref"));
        }
    }
    return topo;
}

PassiveElement passive_element(const NetworkModel& net, const SubsystemInfo& info) {
    if (info.kind == SubsystemKind::BusCapacitor) {
        PassiveElement el{info.name, PassiveKind::ShuntCapacitor, {}};
        el.params.b = info.susceptance;
        return el;
    }
    if (info.kind == SubsystemKind::Branch)
        for (const auto& br : net.branches)
            if (br.id == info.element_id) return passive_from_branch(br);
    throw ValidationError("subsystem '" + info.name + "' is not a passive element");
}

}  // namespace stabman
