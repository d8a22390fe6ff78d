#include "autodiff.hpp"
#include "stabman/components.hpp"

#include <cmath>

namespace stabman {

namespace {
enum S { kDelta, kOmega, kEq1, kEd1, kPsi1d, kPsi2q, kPgv, kPch, kPrh, kVm, kVr, kEfd, kXf };
enum U { kPref, kVref, kId, kIq };
}  // namespace

SyncMachine::SyncMachine(const Device& dev, Real omega_base, Real system_base_mva)
    : id_(dev.id), p_(dev.sg), omega_base_(omega_base), k_(system_base_mva / dev.rating_mva) {}

const std::vector<std::string>& SyncMachine::state_names() {
    static const std::vector<std::string> names{"delta", "omega", "eq1", "ed1", "psi1d", "psi2q", "p_gv",
                                                "p_ch",  "p_rh",  "v_m", "v_r", "e_fd",  "x_f"};
    return names;
}

std::vector<Port> SyncMachine::input_ports() { return {{"P_ref", 1}, {"V_ref", 1}, {"i", 2}}; }

template <class T>
void SyncMachine::stator(const T* x, const T* u, T& id, T& iq, T& vd, T& vq, T& psid, T& psiq) const {
    const auto& p = p_;
    // generator-convention current in machine pu; input is current into the device
    const T igd = -k_ * u[kId];
    const T igq = -k_ * u[kIq];
    const T angle = x[kDelta] - kPi / 2.0;
    rotate_to_internal(igd, igq, angle, id, iq);

    const Real ad = p.xd1 - p.xl, aq = p.xq1 - p.xl;
    const T psid_sub = x[kEq1] * ((p.xd2 - p.xl) / ad) + x[kPsi1d] * ((p.xd1 - p.xd2) / ad);
    const T psiq_sub = -x[kEd1] * ((p.xq2 - p.xl) / aq) + x[kPsi2q] * ((p.xq1 - p.xq2) / aq);
    psid = -p.xd2 * id + psid_sub;
    psiq = -p.xq2 * iq + psiq_sub;
    // stator transients neglected, speed voltages at synchronous speed
    vd = -p.rs * id - psiq;
    vq = -p.rs * iq + psid;
}

template <class T>
void SyncMachine::derivatives(const T* x, const T* u, T* dx) const {
    using std::sqrt;
    const auto& p = p_;
    const auto& g = p.governor;
    const auto& a = p.avr;
    T id, iq, vd, vq, psid, psiq;
    stator(x, u, id, iq, vd, vq, psid, psiq);

    const T te = psid * iq - psiq * id;
    const T tm = g.f_hp * x[kPch] + (1.0 - g.f_hp) * x[kPrh];
    const T dw = x[kOmega] - 1.0;

    dx[kDelta] = omega_base_ * dw;
    dx[kOmega] = (tm - te - p.d * dw) / (2.0 * p.h);

    const Real ad = p.xd1 - p.xl, aq = p.xq1 - p.xl;
    const T d_inner = x[kPsi1d] + ad * id - x[kEq1];
    dx[kEq1] = (-x[kEq1] - (p.xd - p.xd1) * (id - (p.xd1 - p.xd2) / (ad * ad) * d_inner) + x[kEfd]) / p.td0_1;
    dx[kPsi1d] = (-x[kPsi1d] + x[kEq1] - ad * id) / p.td0_2;
    const T q_inner = x[kPsi2q] + aq * iq + x[kEd1];
    dx[kEd1] = (-x[kEd1] + (p.xq - p.xq1) * (iq - (p.xq1 - p.xq2) / (aq * aq) * q_inner)) / p.tq0_1;
    dx[kPsi2q] = (-x[kPsi2q] - x[kEd1] - aq * iq) / p.tq0_2;

    dx[kPgv] = (u[kPref] - dw / g.droop - x[kPgv]) / g.t_g;
    dx[kPch] = (x[kPgv] - x[kPch]) / g.t_ch;
    dx[kPrh] = (x[kPch] - x[kPrh]) / g.t_rh;

    const T vt = sqrt(vd * vd + vq * vq);
    const T vf = (a.k_f / a.t_f) * (x[kEfd] - x[kXf]);
    dx[kVm] = (vt - x[kVm]) / a.t_r;
    dx[kVr] = (a.k_a * (u[kVref] - x[kVm] - vf) - x[kVr]) / a.t_a;
    dx[kEfd] = (x[kVr] - a.k_e * x[kEfd]) / a.t_e;
    dx[kXf] = (x[kEfd] - x[kXf]) / a.t_f;
}

template <class T>
void SyncMachine::output(const T* x, const T* u, T* y) const {
    T id, iq, vd, vq, psid, psiq;
    stator(x, u, id, iq, vd, vq, psid, psiq);
    rotate_to_global(vd, vq, T(x[kDelta] - kPi / 2.0), y[0], y[1]);
}

std::pair<Vector, Vector> SyncMachine::initialize(Complex v_terminal, Complex s_injected) const {
    const auto& p = p_;
    if (!(std::abs(v_terminal) > 1e-6))
        throw NumericalError("device '" + id_ + "': terminal voltage collapsed, cannot initialize");
    const Complex i_sys = std::conj(s_injected / v_terminal);
    const Complex i_m = k_ * i_sys;
    const Complex e = v_terminal + Complex(p.rs, p.xq) * i_m;
    const Real delta = std::arg(e);
    const Complex rot = std::polar(1.0, -(delta - kPi / 2.0));
    const Complex I = i_m * rot, V = v_terminal * rot;
    const Real id = I.real(), iq = I.imag(), vq = V.imag();

    const Real ed1 = (p.xq - p.xq1) * iq;
    const Real psi2q = -ed1 - (p.xq1 - p.xl) * iq;
    const Real eq1 = vq + p.rs * iq + p.xd1 * id;
    const Real psi1d = eq1 - (p.xd1 - p.xl) * id;
    const Real efd = eq1 + (p.xd - p.xd1) * id;
    if (!std::isfinite(efd)) throw NumericalError("device '" + id_ + "': non-finite field voltage at equilibrium");

    Vector x(kStates), u(kInputs);
    x[kDelta] = delta;
    x[kOmega] = 1.0;
    x[kEq1] = eq1;
    x[kEd1] = ed1;
    x[kPsi1d] = psi1d;
    x[kPsi2q] = psi2q;
    x[kEfd] = efd;
    x[kXf] = efd;
    x[kVr] = p.avr.k_e * efd;
    x[kVm] = std::abs(v_terminal);
    u[kId] = -i_sys.real();
    u[kIq] = -i_sys.imag();
    u[kVref] = 0.0;
    u[kPref] = 0.0;

    // electrical torque from the stator solution sets the mechanical operating point
    Real idm, iqm, vdm, vqm, psid, psiq;
    stator(x.data(), u.data(), idm, iqm, vdm, vqm, psid, psiq);
    const Real te = psid * iqm - psiq * idm;
    x[kPgv] = x[kPch] = x[kPrh] = te;
    u[kPref] = te;
    u[kVref] = x[kVm] + (p.avr.k_a > 0.0 ? x[kVr] / p.avr.k_a : 0.0);
    if (p.avr.k_a == 0.0 && std::abs(x[kVr]) > 0.0)
        throw NumericalError("device '" + id_ + "': zero AVR gain cannot hold the field voltage");
    return {x, u};
}

template void SyncMachine::derivatives<double>(const double*, const double*, double*) const;
template void SyncMachine::output<double>(const double*, const double*, double*) const;
template void SyncMachine::derivatives<detail::Ad>(const detail::Ad*, const detail::Ad*, detail::Ad*) const;
template void SyncMachine::output<detail::Ad>(const detail::Ad*, const detail::Ad*, detail::Ad*) const;

}  // namespace stabman
