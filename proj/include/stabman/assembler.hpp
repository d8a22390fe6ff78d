#pragma once

#include "stabman/components.hpp"
#include "stabman/netmodel.hpp"
#include "stabman/state_space.hpp"

#include <string>
#include <vector>

namespace stabman {

// Sign convention: a junction's voltage-defining element (device or merged bus
// capacitor) receives as input the net current flowing into the bus from the
// series elements, i.e. currents are positive into devices.

struct PortRef {
    std::size_t subsystem = 0;
    std::string port;
};

struct CurrentTerm {
    PortRef output;
    Real sign = 1.0;
};

/// Binds one input port to a signed sum of output ports. An external binding
/// leaves the input as a retained reference input of the assembled system.
struct Connection {
    PortRef input;
    std::vector<CurrentTerm> terms;
    bool external = false;
};

enum class SubsystemKind { Device, Branch, BusCapacitor };

struct SubsystemInfo {
    std::string name;
    SubsystemKind kind = SubsystemKind::Branch;
    std::string element_id;  ///< device id, branch id or bus id
    Real susceptance = 0.0;  ///< merged capacitance for BusCapacitor
};

struct Topology {
    std::vector<SubsystemInfo> subsystems;
    std::vector<Connection> connections;

    [[nodiscard]] std::size_t index_of(const std::string& name) const;
};

/// Port graph of a validated network whose thevenin sources have been expanded.
Topology build_topology(const NetworkModel& net);

/// Passive element realized by a Branch or BusCapacitor subsystem.
PassiveElement passive_element(const NetworkModel& net, const SubsystemInfo& info);

struct AssembledSystem {
    Matrix A;                              ///< global state matrix A_ps
    Matrix B;                              ///< retained external inputs
    std::vector<std::string> state_labels; ///< "subsystem.state"
    std::vector<std::string> input_labels; ///< "subsystem.port[k]"
    std::vector<std::size_t> state_offset; ///< first state of each subsystem
};

/// A_ps = A + B K (I - D K)^-1 C for block-diagonal subsystems and the
/// interconnection K implied by the topology.
AssembledSystem assemble(const std::vector<StateSpaceModel>& models, const Topology& topo);

}  // namespace stabman
