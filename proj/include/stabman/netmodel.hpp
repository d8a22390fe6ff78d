#pragma once

#include "stabman/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

// -----------------------------------------------------------------------------
// Network data model. All impedances/admittances are per unit on the system
// power base and the bus voltage base; device parameters are on their own base
// (machine rating for SGs, single-unit base for IBRs) and converted at the
// device boundary.
// -----------------------------------------------------------------------------

enum class BusRole { Slack, PV, PQ };

struct Bus {
    std::string id;
    BusRole role = BusRole::PQ;
    Real base_voltage_kv = 1.0;
    Real v_ref = 1.0;  ///< pu, used for slack and PV buses
};

enum class BranchKind { PiLine, Transformer, RlLoad, ShuntCap };

/// Kind-specific per-unit values. Fields not used by a kind stay zero.
struct BranchParams {
    Real r = 0.0, x = 0.0, b_total = 0.0;           // pi_line; rl_load uses r, x
    Real r1 = 0.0, x1 = 0.0, r2 = 0.0, x2 = 0.0;    // transformer windings
    Real r_m = 0.0, x_m = 0.0;                      // transformer magnetizing branch (parallel R, L)
    Real b = 0.0;                                   // shunt_cap
};

struct Branch {
    std::string id;
    BranchKind kind = BranchKind::PiLine;
    std::vector<std::string> terminals;
    BranchParams params;
};

struct IbrPhysicalParams {
    Real R = 0.05;      ///< filter resistance, pu
    Real L = 0.15;      ///< filter inductance, pu
    Real C_f = 0.05;    ///< filter capacitance, pu
    Real R_f = 0.0016;  ///< damping resistance in series with C_f, pu
    Real C = 15e-3;     ///< dc-link capacitance, F
    Real I_dc = 0.0;    ///< dc source current, A (set by the operating point)
    Real s_base = 5.0;        ///< MVA
    Real v_base_ac = 660.0;   ///< V
    Real v_base_dc = 1500.0;  ///< V

    bool operator==(const IbrPhysicalParams&) const = default;
};

enum class DcVariant { Vdc, Vdc2 };

/// Controller gains in per unit of the single-unit base. For DcVariant::Vdc2
/// the dc gain pair holds k_p_2dc / k_i_2dc.
struct IbrControlParams {
    Real kp_pll = 0.1, ki_pll = 2.0;
    Real kp_i = 1.0, ki_i = 100.0;
    DcVariant dc_variant = DcVariant::Vdc;
    Real kp_dc = 1.5, ki_dc = 50.0;
    Real k_P = 20.0;         ///< P/omega droop, pu power per pu frequency
    Real k_Q = 1.0 / 1.1;    ///< Q/v droop, pu reactive power per pu voltage

    bool operator==(const IbrControlParams&) const = default;
};

/// Reference values carried alongside the aggregated model (Q_ref scales with N).
struct IbrReferences {
    Real q_ref = 0.0;
    Real v_dc_ref = 1.0;
    Real v_d_ref = 1.0;
    Real omega_ref = 1.0;
};

struct GovernorParams {
    Real droop = 0.05;  ///< steady-state frequency droop
    Real t_g = 0.2;     ///< governor time constant, s
    Real t_ch = 0.3;    ///< steam chest, s
    Real t_rh = 7.0;    ///< reheater, s
    Real f_hp = 0.3;    ///< high-pressure turbine fraction
};

/// IEEE Type 1 excitation system without saturation.
struct AvrParams {
    Real t_r = 0.02;
    Real k_a = 50.0;
    Real t_a = 0.05;
    Real k_e = 1.0;
    Real t_e = 0.5;
    Real k_f = 0.06;
    Real t_f = 1.0;
};

/// Sixth-order machine constants on the machine base.
struct SgParams {
    Real h = 4.0;        ///< inertia constant, s
    Real d = 0.0;        ///< damping, pu torque per pu speed
    Real xd = 1.8, xd1 = 0.3, xd2 = 0.25;
    Real xq = 1.7, xq1 = 0.55, xq2 = 0.25;
    Real xl = 0.2;
    Real rs = 0.0025;
    Real td0_1 = 8.0, td0_2 = 0.03;
    Real tq0_1 = 0.4, tq0_2 = 0.05;
    GovernorParams governor;
    AvrParams avr;
};

struct TheveninParams {
    Real r = 0.0, x = 0.0;  ///< pu on system base
    Real v = 1.0;           ///< pu EMF magnitude
};

enum class DeviceKind { SG, IBR, TheveninSource };

struct IbrData {
    IbrPhysicalParams physical;
    IbrControlParams control;  ///< single-unit gains; aggregation happens at model build
    int n_units = 1;
};

struct Device {
    std::string id;
    std::string bus;
    DeviceKind kind = DeviceKind::SG;
    Real rating_mva = 100.0;
    Real p_mw = 0.0;     ///< default active-power dispatch (overridden by scenarios)
    Real q_mvar = 0.0;   ///< IBR reactive setpoint for the load flow
    SgParams sg;
    IbrData ibr;
    TheveninParams thevenin;
};

struct NetworkModel {
    std::string name;
    Real system_frequency = 2.0 * kPi * 50.0;  ///< rad/s
    Real power_base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Device> devices;

    [[nodiscard]] Real frequency_hz() const { return system_frequency / (2.0 * kPi); }
    [[nodiscard]] std::optional<std::size_t> bus_index(const std::string& id) const;
    [[nodiscard]] std::optional<std::size_t> device_index(const std::string& id) const;
    [[nodiscard]] const Device& device(const std::string& id) const;
    [[nodiscard]] Device& device(const std::string& id);
    [[nodiscard]] std::size_t slack_index() const;
};

struct DeviceDispatch {
    std::optional<Real> p_mw;
    std::optional<Real> v_ref;
    bool available = true;
    Real rating_scale = 1.0;
};

struct Scenario {
    std::string name;
    std::map<std::string, Real> load_multipliers;   ///< by bus id, default 1
    std::map<std::string, Real> shunt_multipliers;  ///< by bus id, default 1
    std::map<std::string, DeviceDispatch> dispatch; ///< by device id
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    [[nodiscard]] std::size_t size() const { return scenarios.size(); }
};

// -----------------------------------------------------------------------------
// Operations
// -----------------------------------------------------------------------------

/// Checks every data-model invariant and connectivity. Returns the network
/// unchanged or throws ValidationError naming the offending element.
const NetworkModel& validate_network(const NetworkModel& net);

/// Checks a scenario set against a network (ids exist, multipliers >= 0).
void validate_scenarios(const NetworkModel& net, const ScenarioSet& set);

struct AggregatedIbr {
    IbrPhysicalParams physical;
    IbrControlParams control;
    Real reference_scale = 1.0;  ///< multiplies Q_ref; other references are unchanged
};

/// Equivalent of N identical units in parallel on the single-unit base.
AggregatedIbr aggregate_ibr(const IbrPhysicalParams& physical, const IbrControlParams& control, int n);

/// Network with the scenario applied: loads and shunts scaled, dispatch and
/// ratings overridden, unavailable devices removed.
NetworkModel apply_scenario(const NetworkModel& net, const Scenario& scenario);

struct ScenarioSpec {
    std::vector<Real> daily_curve;                 ///< samples in (0, 1]
    std::map<std::string, int> time_shift;         ///< per bus, in samples
    Real noise_amplitude = 0.03;
    std::uint64_t seed = 1;
    bool include_peak = true;                      ///< append a noise-free peak-load point
    /// Each variant replicates the operating points with device ratings scaled.
    std::vector<std::map<std::string, Real>> rating_variants{{}};
};

/// Load multiplier for one bus at one operating point. Exposed for tests.
Real scenario_multiplier(const ScenarioSpec& spec, std::size_t bus_ordinal, int shift, std::size_t t,
                         std::uint64_t stream);

ScenarioSet synthesize_scenarios(const NetworkModel& base, const ScenarioSpec& spec);

/// Proportional-share dispatch: generators other than the slack get
/// P = P_load * S_i / S_G; the slack absorbs the residual in the load flow.
void proportional_dispatch(const NetworkModel& net, Scenario& scenario);

/// Replaces a bus-level thevenin_source with internal impedance by an ideal
/// EMF on a hidden slack bus connected through an RL branch.
NetworkModel expand_thevenin_sources(const NetworkModel& net);

/// Thevenin equivalent of the network seen from keep_bus, plus the device
/// originally at keep_bus.
NetworkModel thevenin_reduce(const NetworkModel& net, const std::string& keep_bus, const Scenario& scenario);

/// Driving-point impedance at a bus with SGs as subtransient reactances and
/// IBRs as open circuits. Exposed for tests.
Complex driving_point_impedance(const NetworkModel& net, const std::string& bus);

std::string to_string(BusRole r);
std::string to_string(BranchKind k);
std::string to_string(DeviceKind k);

}  // namespace stabman
