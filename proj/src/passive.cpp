#include "stabman/components.hpp"

namespace stabman {

PassiveElement passive_from_branch(const Branch& br) {
    PassiveElement el{br.id, PassiveKind::SeriesRl, br.params};
    switch (br.kind) {
        case BranchKind::PiLine: el.kind = PassiveKind::SeriesRl; break;
        case BranchKind::RlLoad: el.kind = PassiveKind::RlLoad; break;
        case BranchKind::Transformer: el.kind = PassiveKind::Transformer; break;
        case BranchKind::ShuntCap: el.kind = PassiveKind::ShuntCapacitor; break;
    }
    return el;
}

int passive_order(const PassiveElement& el) { return el.kind == PassiveKind::Transformer ? 6 : 2; }

std::vector<Port> passive_input_ports(const PassiveElement& el) {
    switch (el.kind) {
        case PassiveKind::SeriesRl: return {{"v_from", 2}, {"v_to", 2}};
        case PassiveKind::RlLoad: return {{"v", 2}};
        case PassiveKind::Transformer: return {{"v1", 2}, {"v2", 2}};
        case PassiveKind::ShuntCapacitor: return {{"i", 2}};
    }
    return {};
}

std::vector<Port> passive_output_ports(const PassiveElement& el) {
    switch (el.kind) {
        case PassiveKind::SeriesRl:
        case PassiveKind::RlLoad: return {{"i", 2}};
        case PassiveKind::Transformer: return {{"i1", 2}, {"i2", 2}};
        case PassiveKind::ShuntCapacitor: return {{"v", 2}};
    }
    return {};
}

namespace {

void require_storage(const PassiveElement& el) {
    const auto& p = el.params;
    auto fail = [&](const std::string& what) {
        throw ValidationError("passive element '" + el.name + "': " + what + " (stateless branch unsupported)");
    };
    switch (el.kind) {
        case PassiveKind::SeriesRl:
        case PassiveKind::RlLoad:
            if (!(p.x > 0.0)) fail("series inductance must be positive");
            break;
        case PassiveKind::Transformer:
            if (!(p.x1 > 0.0 && p.x2 > 0.0 && p.x_m > 0.0)) fail("winding and magnetizing inductances must be positive");
            break;
        case PassiveKind::ShuntCapacitor:
            if (!(p.b > 0.0)) fail("capacitance must be positive");
            break;
    }
}

/// dq inductor: (x/wb) di/dt = v - r i - j x i
void rl_rhs(Real wb, Real r, Real x, Real id, Real iq, Real vd, Real vq, Real& did, Real& diq) {
    did = wb / x * (vd - r * id) + wb * iq;
    diq = wb / x * (vq - r * iq) - wb * id;
}

}  // namespace

Vector eval_passive_dynamics(const PassiveElement& el, Real wb, const Vector& x, const Vector& u) {
    require_storage(el);
    const auto& p = el.params;
    Vector dx(passive_order(el));
    switch (el.kind) {
        case PassiveKind::SeriesRl:
            rl_rhs(wb, p.r, p.x, x[0], x[1], u[0] - u[2], u[1] - u[3], dx[0], dx[1]);
            break;
        case PassiveKind::RlLoad:
            rl_rhs(wb, p.r, p.x, x[0], x[1], u[0], u[1], dx[0], dx[1]);
            break;
        case PassiveKind::Transformer: {
            // states: i1 (into winding 1), i2 (out of winding 2), magnetizing inductor current
            const Real vmd = p.r_m * (x[0] - x[2] - x[4]);
            const Real vmq = p.r_m * (x[1] - x[3] - x[5]);
            rl_rhs(wb, p.r1, p.x1, x[0], x[1], u[0] - vmd, u[1] - vmq, dx[0], dx[1]);
            rl_rhs(wb, p.r2, p.x2, x[2], x[3], vmd - u[2], vmq - u[3], dx[2], dx[3]);
            rl_rhs(wb, 0.0, p.x_m, x[4], x[5], vmd, vmq, dx[4], dx[5]);
            break;
        }
        case PassiveKind::ShuntCapacitor:
            // (b/wb) dv/dt = i - j b v
            dx[0] = wb / p.b * u[0] + wb * x[1];
            dx[1] = wb / p.b * u[1] - wb * x[0];
            break;
    }
    return dx;
}

Vector eval_passive_output(const PassiveElement& el, const Vector& x, const Vector&) {
    if (el.kind == PassiveKind::Transformer) return x.head(4);
    return x.head(2);
}

StateSpaceModel linearize_passive(const PassiveElement& el, Real wb) {
    require_storage(el);
    const auto& p = el.params;
    const Matrix I2 = Matrix::Identity(2, 2);
    Matrix J(2, 2);  // coupling of the rotating frame: -j w on a phasor
    J << 0.0, wb, -wb, 0.0;

    StateSpaceModel ss;
    ss.name = el.name;
    ss.inputs = passive_input_ports(el);
    ss.outputs = passive_output_ports(el);
    switch (el.kind) {
        case PassiveKind::SeriesRl:
        case PassiveKind::RlLoad: {
            ss.A = -(wb * p.r / p.x) * I2 + J;
            const Matrix Bv = (wb / p.x) * I2;
            if (el.kind == PassiveKind::SeriesRl) {
                ss.B.resize(2, 4);
                ss.B << Bv, -Bv;
            } else {
                ss.B = Bv;
            }
            ss.C = I2;
            ss.D = Matrix::Zero(2, ss.B.cols());
            ss.state_names = {"i_d", "i_q"};
            break;
        }
        case PassiveKind::Transformer: {
            // v_m = r_m (i1 - i2 - i_m)
            Matrix M(2, 6);
            M << p.r_m * I2, -p.r_m * I2, -p.r_m * I2;
            ss.A = Matrix::Zero(6, 6);
            ss.A.block(0, 0, 2, 2) = -(wb * p.r1 / p.x1) * I2 + J;
            ss.A.block(2, 2, 2, 2) = -(wb * p.r2 / p.x2) * I2 + J;
            ss.A.block(4, 4, 2, 2) = J;
            ss.A.middleRows(0, 2) += -(wb / p.x1) * M;
            ss.A.middleRows(2, 2) += (wb / p.x2) * M;
            ss.A.middleRows(4, 2) += (wb / p.x_m) * M;
            ss.B = Matrix::Zero(6, 4);
            ss.B.block(0, 0, 2, 2) = (wb / p.x1) * I2;
            ss.B.block(2, 2, 2, 2) = -(wb / p.x2) * I2;
            ss.C = Matrix::Zero(4, 6);
            ss.C.leftCols(4) = Matrix::Identity(4, 4);
            ss.D = Matrix::Zero(4, 4);
            ss.state_names = {"i1_d", "i1_q", "i2_d", "i2_q", "im_d", "im_q"};
            break;
        }
        case PassiveKind::ShuntCapacitor:
            ss.A = J;
            ss.B = (wb / p.b) * I2;
            ss.C = I2;
            ss.D = Matrix::Zero(2, 2);
            ss.state_names = {"v_d", "v_q"};
            break;
    }
    ss.check();
    return ss;
}

Vector passive_steady_state(const PassiveElement& el, const std::vector<Complex>& in) {
    const auto& p = el.params;
    Vector x(passive_order(el));
    auto put = [&](int k, Complex z) {
        x[2 * k] = z.real();
        x[2 * k + 1] = z.imag();
    };
    switch (el.kind) {
        case PassiveKind::SeriesRl: put(0, (in.at(0) - in.at(1)) / Complex(p.r, p.x)); break;
        case PassiveKind::RlLoad: put(0, in.at(0) / Complex(p.r, p.x)); break;
        case PassiveKind::Transformer: {
            const Complex z1(p.r1, p.x1), z2(p.r2, p.x2);
            const Complex zm = Complex(p.r_m, 0.0) * Complex(0.0, p.x_m) / Complex(p.r_m, p.x_m);
            // node equation at the magnetizing node
            const Complex vm = (in.at(0) / z1 + in.at(1) / z2) / (1.0 / z1 + 1.0 / z2 + 1.0 / zm);
            put(0, (in.at(0) - vm) / z1);
            put(1, (vm - in.at(1)) / z2);
            put(2, vm / Complex(0.0, p.x_m));
            break;
        }
        case PassiveKind::ShuntCapacitor: put(0, in.at(0) / Complex(0.0, p.b)); break;
    }
    return x;
}

}  // namespace stabman
