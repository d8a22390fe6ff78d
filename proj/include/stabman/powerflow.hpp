#pragma once

#include "stabman/assembler.hpp"
#include "stabman/components.hpp"
#include "stabman/netmodel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stabman {

struct PowerFlowOptions {
    Real tolerance = 1e-8;  ///< max |mismatch|, pu
    int max_iterations = 50;
};

/// Converged operating point. rl_load branches are constant-power loads in the
/// load flow (S = 1/conj(z) at 1 pu); `network` carries them as the equivalent
/// impedances at the solved voltage, with thevenin sources already expanded.
struct PowerFlowSolution {
    NetworkModel network;
    std::vector<std::string> bus_ids;
    Vector vm;  ///< pu
    Vector va;  ///< rad, slack = 0
    std::vector<std::string> device_ids;
    std::vector<Complex> device_power;  ///< injected, system pu
    CVector bus_load;                   ///< rl_load demand per bus, pu
    Real mismatch = 0.0;
    int iterations = 0;

    [[nodiscard]] Complex voltage(const std::string& bus) const;
    [[nodiscard]] Complex device_injection(const std::string& device) const;
    /// Total series and shunt losses, pu (injections minus load consumption).
    [[nodiscard]] Complex losses() const;
};

/// Newton-Raphson in polar coordinates from a flat start. The network must be
/// validated; scenarios are applied by the overload taking one.
PowerFlowSolution solve_power_flow(const NetworkModel& net, const PowerFlowOptions& opts = {});
PowerFlowSolution solve_power_flow(const NetworkModel& net, const Scenario& scenario,
                                   const PowerFlowOptions& opts = {});

/// Bus admittance matrix of the series/shunt elements (rl_load excluded).
CMatrix bus_admittance(const NetworkModel& net);

/// Complex power drawn by every rl_load at its bus under the constant-power
/// interpretation, per bus index.
CVector load_demand(const NetworkModel& net);

/// Steady states of every subsystem of the operating-point topology. The
/// order of `models`, `x` and `u` matches `topology.subsystems`; passive
/// entries carry an empty model slot.
struct EquilibriumState {
    Topology topology;
    std::vector<std::optional<DeviceModel>> devices;
    std::vector<PassiveElement> passives;  ///< valid for non-device subsystems
    std::vector<Vector> x;
    std::vector<Vector> u;  ///< devices only; passive inputs follow from the network
    Real omega_base = 0.0;
};

/// Back-solves every device and passive state from the power-flow phasors.
EquilibriumState init_equilibrium(const PowerFlowSolution& pf);

/// Max |dx/dt| over all subsystems with inputs recomputed from the network
/// interconnection, together with the largest input inconsistency.
Real equilibrium_residual(const EquilibriumState& eq);

/// Linear subsystem models in topology order.
std::vector<StateSpaceModel> linearize_equilibrium(const EquilibriumState& eq, const LinearizeOptions& opts = {});

}  // namespace stabman
