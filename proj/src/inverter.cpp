#include "autodiff.hpp"
#include "stabman/components.hpp"

#include <cmath>

namespace stabman {

namespace {
enum S { kIfd, kIfq, kVcd, kVcq, kVdc, kDelta, kXpll, kXid, kXiq, kXdc };
enum U { kIdc, kVref, kId, kIq };
}  // namespace

Inverter::Inverter(const Device& dev, Real omega_base, Real system_base_mva)
    : id_(dev.id), omega_base_(omega_base) {
    const auto agg = aggregate_ibr(dev.ibr.physical, dev.ibr.control, dev.ibr.n_units);
    phys_ = agg.physical;
    ctrl_ = agg.control;
    if (!(phys_.L > 0.0) || !(phys_.C_f > 0.0) || !(phys_.C > 0.0))
        throw NumericalError("device '" + id_ + "': filter L, C_f and dc capacitance must be nonzero");
    k_ = system_base_mva / phys_.s_base;
    k_dc_ = phys_.s_base * 1e6 / (phys_.C * phys_.v_base_dc * phys_.v_base_dc);
}

const std::vector<std::string>& Inverter::state_names() {
    static const std::vector<std::string> names{"i_fd",  "i_fq",  "v_cd", "v_cq", "v_dc",
                                                "delta", "x_pll", "x_id", "x_iq", "x_dc"};
    return names;
}

std::vector<Port> Inverter::input_ports() { return {{"I_dc", 1}, {"V_ref", 1}, {"i", 2}}; }

template <class T>
void Inverter::pcc_voltage(const T* x, const T* u, T& vd, T& vq, T& igd, T& igq) const {
    // current injected into the grid, unit-base pu, PLL frame
    const T gd = -k_ * u[kId];
    const T gq = -k_ * u[kIq];
    rotate_to_internal(gd, gq, x[kDelta], igd, igq);
    vd = x[kVcd] + phys_.R_f * (x[kIfd] - igd);
    vq = x[kVcq] + phys_.R_f * (x[kIfq] - igq);
}

template <class T>
void Inverter::derivatives(const T* x, const T* u, T* dx) const {
    const auto& c = ctrl_;
    const auto& ph = phys_;
    const Real wb = omega_base_;
    T vd, vq, igd, igq;
    pcc_voltage(x, u, vd, vq, igd, igq);

    // PLL: PI on the error (0 - v_q); its output is subtracted from the frequency reference
    const T e_pll = -vq;
    const T w = refs_.omega_ref - (c.kp_pll * e_pll + x[kXpll]);
    dx[kDelta] = wb * (w - 1.0);
    dx[kXpll] = c.ki_pll * e_pll;

    const T e_dc = c.dc_variant == DcVariant::Vdc ? T(refs_.v_dc_ref - x[kVdc])
                                                  : T(refs_.v_dc_ref * refs_.v_dc_ref - x[kVdc] * x[kVdc]);
    const T p_dc = -(c.kp_dc * e_dc + x[kXdc]);
    dx[kXdc] = c.ki_dc * e_dc;

    const T p_cmd = p_dc + c.k_P * (refs_.omega_ref - w);
    const T q_cmd = refs_.q_ref + c.k_Q * (u[kVref] - vd);
    const T ird = p_cmd / vd;
    const T irq = -q_cmd / vd;

    const T eid = ird - x[kIfd];
    const T eiq = irq - x[kIfq];
    dx[kXid] = c.ki_i * eid;
    dx[kXiq] = c.ki_i * eiq;
    const T vcd = vd - w * ph.L * x[kIfq] + c.kp_i * eid + x[kXid];
    const T vcq = vq + w * ph.L * x[kIfd] + c.kp_i * eiq + x[kXiq];

    dx[kIfd] = wb / ph.L * (vcd - ph.R * x[kIfd] - vd) + wb * w * x[kIfq];
    dx[kIfq] = wb / ph.L * (vcq - ph.R * x[kIfq] - vq) - wb * w * x[kIfd];
    dx[kVcd] = wb / ph.C_f * (x[kIfd] - igd) + wb * w * x[kVcq];
    dx[kVcq] = wb / ph.C_f * (x[kIfq] - igq) - wb * w * x[kVcd];

    const T p_conv = vcd * x[kIfd] + vcq * x[kIfq];
    dx[kVdc] = k_dc_ * (u[kIdc] - p_conv / x[kVdc]);
}

template <class T>
void Inverter::output(const T* x, const T* u, T* y) const {
    T vd, vq, igd, igq;
    pcc_voltage(x, u, vd, vq, igd, igq);
    rotate_to_global(vd, vq, x[kDelta], y[0], y[1]);
}

std::pair<Vector, Vector> Inverter::initialize(Complex v_terminal, Complex s_injected) {
    const Real vmag = std::abs(v_terminal);
    if (!(vmag > 1e-6)) throw NumericalError("device '" + id_ + "': terminal voltage collapsed, cannot initialize");
    const auto& ph = phys_;
    const Complex s_dev = k_ * s_injected;
    const Complex v(vmag, 0.0);
    const Complex ig = std::conj(s_dev / v);
    const Complex vc = v / Complex(1.0, ph.R_f * ph.C_f);
    const Complex i_f = ig + Complex(0.0, ph.C_f) * vc;
    const Complex v_conv = v + Complex(ph.R, ph.L) * i_f;
    const Real p_cmd = i_f.real() * vmag;
    const Real q_cmd = -i_f.imag() * vmag;
    const Real p_conv = (v_conv * std::conj(i_f)).real();

    refs_ = IbrReferences{};
    refs_.q_ref = q_cmd - ctrl_.k_Q * (refs_.v_d_ref - vmag);

    Vector x(kStates), u(kInputs);
    x[kIfd] = i_f.real();
    x[kIfq] = i_f.imag();
    x[kVcd] = vc.real();
    x[kVcq] = vc.imag();
    x[kVdc] = refs_.v_dc_ref;
    x[kDelta] = std::arg(v_terminal);
    x[kXpll] = 0.0;
    x[kXid] = ph.R * i_f.real();
    x[kXiq] = ph.R * i_f.imag();
    x[kXdc] = -p_cmd;
    u[kIdc] = p_conv / refs_.v_dc_ref;
    u[kVref] = refs_.v_d_ref;
    const Complex i_into = -ig * std::polar(1.0, std::arg(v_terminal)) / k_;
    u[kId] = i_into.real();
    u[kIq] = i_into.imag();
    if (u[kIdc] < 0.0)
        throw NumericalError("device '" + id_ + "': operating point needs negative dc source current");
    return {x, u};
}

template void Inverter::derivatives<double>(const double*, const double*, double*) const;
template void Inverter::output<double>(const double*, const double*, double*) const;
template void Inverter::derivatives<detail::Ad>(const detail::Ad*, const detail::Ad*, detail::Ad*) const;
template void Inverter::output<detail::Ad>(const detail::Ad*, const detail::Ad*, detail::Ad*) const;

}  // namespace stabman
