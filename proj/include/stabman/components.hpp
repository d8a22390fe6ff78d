#pragma once

#include "stabman/netmodel.hpp"
#include "stabman/state_space.hpp"

#include <string>
#include <variant>
#include <vector>

namespace stabman {

// -----------------------------------------------------------------------------
// Device models. Every device exposes output port "v" (terminal voltage, global
// frame, system pu) and input port "i" (terminal current flowing INTO the
// device, global frame, system pu), plus scalar reference inputs. States are
// per unit on the device base with time in seconds.
// -----------------------------------------------------------------------------

/// Sixth-order two-axis machine with subtransient dynamics (stator algebraic),
/// swing equation, single-reheat steam governor and IEEE Type 1 exciter.
///
/// States: delta, omega, eq1 (E'q), ed1 (E'd), psi1d, psi2q, p_gv, p_ch, p_rh,
///         v_m, v_r, e_fd, x_f.
/// Inputs: P_ref (machine pu), V_ref (pu), i_d, i_q.
class SyncMachine {
public:
    static constexpr int kStates = 13;
    static constexpr int kInputs = 4;

    SyncMachine(const Device& dev, Real omega_base, Real system_base_mva);

    template <class T>
    void derivatives(const T* x, const T* u, T* dx) const;
    template <class T>
    void output(const T* x, const T* u, T* y) const;

    /// Steady-state back-solve from the terminal voltage and injected power
    /// (system pu). Returns (x0, u0).
    [[nodiscard]] std::pair<Vector, Vector> initialize(Complex v_terminal, Complex s_injected) const;

    [[nodiscard]] static const std::vector<std::string>& state_names();
    [[nodiscard]] static std::vector<Port> input_ports();
    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] const SgParams& params() const { return p_; }
    [[nodiscard]] Real current_scale() const { return k_; }

private:
    template <class T>
    void stator(const T* x, const T* u, T& id, T& iq, T& vd, T& vq, T& psid, T& psiq) const;

    std::string id_;
    SgParams p_;
    Real omega_base_;
    Real k_;  ///< system-base to machine-base current factor
};

/// Aggregated grid-following inverter: RL filter with damped C_f, dc link, PLL,
/// dq current control with feed-forward, dc-voltage (or energy) control,
/// P/omega and Q/v droop and instantaneous power-to-current transformation.
/// Internal quantities live in the PLL frame.
///
/// States: i_fd, i_fq, v_cd, v_cq, v_dc, delta_pll, x_pll, x_id, x_iq, x_dc.
/// Inputs: I_dc (dc pu of the unit base), V_ref (v_d reference), i_d, i_q.
class Inverter {
public:
    static constexpr int kStates = 10;
    static constexpr int kInputs = 4;

    Inverter(const Device& dev, Real omega_base, Real system_base_mva);

    template <class T>
    void derivatives(const T* x, const T* u, T* dx) const;
    template <class T>
    void output(const T* x, const T* u, T* y) const;

    /// Back-solve; also fixes the Q reference that holds the operating point.
    std::pair<Vector, Vector> initialize(Complex v_terminal, Complex s_injected);

    [[nodiscard]] static const std::vector<std::string>& state_names();
    [[nodiscard]] static std::vector<Port> input_ports();
    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] const IbrPhysicalParams& physical() const { return phys_; }
    [[nodiscard]] const IbrControlParams& control() const { return ctrl_; }
    [[nodiscard]] const IbrReferences& references() const { return refs_; }
    void set_references(const IbrReferences& r) { refs_ = r; }
    [[nodiscard]] Real dc_rate() const { return k_dc_; }
    [[nodiscard]] Real current_scale() const { return k_; }
    /// dc current base of the unit, A per pu.
    [[nodiscard]] Real dc_current_base() const { return phys_.s_base * 1e6 / phys_.v_base_dc; }

private:
    template <class T>
    void pcc_voltage(const T* x, const T* u, T& vd, T& vq, T& igd, T& igq) const;

    std::string id_;
    IbrPhysicalParams phys_;  ///< aggregated
    IbrControlParams ctrl_;   ///< aggregated
    IbrReferences refs_;
    Real omega_base_;
    Real k_;     ///< system-base to unit-base current factor
    Real k_dc_;  ///< dc-link rate S_base / (C V_dc_base^2), 1/s
};

/// Ideal voltage source: fixed global-frame phasor, no states.
class IdealSource {
public:
    static constexpr int kStates = 0;
    static constexpr int kInputs = 2;

    explicit IdealSource(const Device& dev) : id_(dev.id) {}

    template <class T>
    void derivatives(const T*, const T*, T*) const {}
    template <class T>
    void output(const T*, const T*, T* y) const {
        y[0] = T(v_.real());
        y[1] = T(v_.imag());
    }
    std::pair<Vector, Vector> initialize(Complex v_terminal, Complex /*s_injected*/) {
        v_ = v_terminal;
        return {Vector(0), Vector::Zero(2)};
    }

    [[nodiscard]] static const std::vector<std::string>& state_names();
    [[nodiscard]] static std::vector<Port> input_ports() { return {{"i", 2}}; }
    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] Complex voltage() const { return v_; }

private:
    std::string id_;
    Complex v_{1.0, 0.0};
};

using DeviceModel = std::variant<SyncMachine, Inverter, IdealSource>;

DeviceModel make_device_model(const Device& dev, Real omega_base, Real system_base_mva);

/// State derivative of a device in its own frame; throws on non-finite input.
Vector eval_nonlinear_dynamics(const DeviceModel& model, const Vector& x, const Vector& u);
/// Terminal voltage output (global frame, system pu).
Vector eval_device_output(const DeviceModel& model, const Vector& x, const Vector& u);

const std::string& device_id(const DeviceModel& model);
int device_order(const DeviceModel& model);

struct LinearizeOptions {
    Real equilibrium_tolerance = 1e-6;  ///< max |dx| allowed at the expansion point; <= 0 disables
    bool drop_inert_states = true;      ///< remove states whose derivative is identically zero
};

/// Exact Jacobians (forward-mode automatic differentiation) of the device
/// dynamics and output at (x0, u0), with ports per device kind.
StateSpaceModel linearize_device(const DeviceModel& model, const Vector& x0, const Vector& u0,
                                 const LinearizeOptions& opts = {});

// -----------------------------------------------------------------------------
// Passive elements (exactly linear, global frame).
// -----------------------------------------------------------------------------

enum class PassiveKind { SeriesRl, RlLoad, Transformer, ShuntCapacitor };

/// Primitive passive element after topology processing. Pi-line shunt halves
/// and shunt_cap branches are merged into one ShuntCapacitor per bus.
struct PassiveElement {
    std::string name;
    PassiveKind kind = PassiveKind::SeriesRl;
    BranchParams params;  ///< SeriesRl/RlLoad: r, x; Transformer: r1..x_m; ShuntCapacitor: b
};

/// Passive element of a network branch (pi_line -> series RL part only).
PassiveElement passive_from_branch(const Branch& br);

int passive_order(const PassiveElement& el);
std::vector<Port> passive_input_ports(const PassiveElement& el);
std::vector<Port> passive_output_ports(const PassiveElement& el);

/// Circuit equations evaluated directly: returns dx for state x and inputs u.
Vector eval_passive_dynamics(const PassiveElement& el, Real omega_base, const Vector& x, const Vector& u);
Vector eval_passive_output(const PassiveElement& el, const Vector& x, const Vector& u);

StateSpaceModel linearize_passive(const PassiveElement& el, Real omega_base);

/// Steady-state (phasor) states of an element given its port inputs as
/// phasors: series elements take terminal voltages, capacitors the current.
Vector passive_steady_state(const PassiveElement& el, const std::vector<Complex>& inputs);

}  // namespace stabman
