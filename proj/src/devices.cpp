#include "autodiff.hpp"
#include "stabman/components.hpp"

#include <cmath>

namespace stabman {

const std::vector<std::string>& IdealSource::state_names() {
    static const std::vector<std::string> names;
    return names;
}

DeviceModel make_device_model(const Device& dev, Real omega_base, Real system_base_mva) {
    switch (dev.kind) {
        case DeviceKind::SG: return SyncMachine(dev, omega_base, system_base_mva);
        case DeviceKind::IBR: return Inverter(dev, omega_base, system_base_mva);
        case DeviceKind::TheveninSource:
            if (dev.thevenin.r != 0.0 || dev.thevenin.x != 0.0)
                throw ValidationError("device '" + dev.id +
                                      "': thevenin source with impedance must be expanded before modeling");
            return IdealSource(dev);
    }
    throw ValidationError("unknown device kind");
}

const std::string& device_id(const DeviceModel& model) {
    return std::visit([](const auto& m) -> const std::string& { return m.id(); }, model);
}

int device_order(const DeviceModel& model) {
    return std::visit([](const auto& m) { return std::decay_t<decltype(m)>::kStates; }, model);
}

namespace {

template <class M>
void check_sizes(const M&, const Vector& x, const Vector& u) {
    if (x.size() != M::kStates || u.size() != M::kInputs)
        throw ValidationError("device state/input dimensions do not match the model");
}

void check_finite(const std::string& id, const Vector& x, const Vector& u) {
    if (!x.allFinite() || !u.allFinite()) throw NumericalError("device '" + id + "': non-finite state or input");
}

}  // namespace

Vector eval_nonlinear_dynamics(const DeviceModel& model, const Vector& x, const Vector& u) {
    return std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            check_sizes(m, x, u);
            check_finite(m.id(), x, u);
            Vector dx(M::kStates);
            m.template derivatives<double>(x.data(), u.data(), dx.data());
            return dx;
        },
        model);
}

Vector eval_device_output(const DeviceModel& model, const Vector& x, const Vector& u) {
    return std::visit(
        [&](const auto& m) {
            check_sizes(m, x, u);
            check_finite(m.id(), x, u);
            Vector y(2);
            m.template output<double>(x.data(), u.data(), y.data());
            return y;
        },
        model);
}

namespace {

/// Removes states with identically zero derivative rows, repeatedly, since a
/// constant state can make another one constant in turn.
void drop_inert(StateSpaceModel& ss) {
    for (;;) {
        const auto n = ss.A.rows();
        Eigen::Index inert = -1;
        for (Eigen::Index i = 0; i < n && inert < 0; ++i)
            if ((ss.A.row(i).array() == 0.0).all() && (ss.B.row(i).array() == 0.0).all()) inert = i;
        if (inert < 0) return;
        auto keep = [&](Eigen::Index k) { return k < inert ? k : k + 1; };
        Matrix A(n - 1, n - 1), B(n - 1, ss.B.cols()), C(ss.C.rows(), n - 1);
        for (Eigen::Index i = 0; i < n - 1; ++i) {
            B.row(i) = ss.B.row(keep(i));
            C.col(i) = ss.C.col(keep(i));
            for (Eigen::Index j = 0; j < n - 1; ++j) A(i, j) = ss.A(keep(i), keep(j));
        }
        ss.A = std::move(A);
        ss.B = std::move(B);
        ss.C = std::move(C);
        ss.state_names.erase(ss.state_names.begin() + inert);
    }
}

}  // namespace

StateSpaceModel linearize_device(const DeviceModel& model, const Vector& x0, const Vector& u0,
                                 const LinearizeOptions& opts) {
    return std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            using detail::Ad;
            constexpr int n = M::kStates, nu = M::kInputs, dirs = n + nu;
            static_assert(dirs <= detail::kMaxAdDirections);
            check_sizes(m, x0, u0);
            check_finite(m.id(), x0, u0);

            if (opts.equilibrium_tolerance > 0.0 && n > 0) {
                Vector dx(n);
                m.template derivatives<double>(x0.data(), u0.data(), dx.data());
                const Real res = dx.cwiseAbs().maxCoeff();
                if (!(res < opts.equilibrium_tolerance))
                    throw NumericalError("device '" + m.id() + "': not at equilibrium (residual " + std::to_string(res) +
                                         ")");
            }

            std::array<Ad, static_cast<std::size_t>(n > 0 ? n : 1)> x{};
            std::array<Ad, static_cast<std::size_t>(nu)> u{};
            for (int i = 0; i < n; ++i) x[i] = Ad(x0[i], dirs, i);
            for (int i = 0; i < nu; ++i) u[i] = Ad(u0[i], dirs, n + i);
            std::array<Ad, static_cast<std::size_t>(n > 0 ? n : 1)> dx{};
            std::array<Ad, 2> y{};
            m.template derivatives<Ad>(x.data(), u.data(), dx.data());
            m.template output<Ad>(x.data(), u.data(), y.data());

            StateSpaceModel ss;
            ss.name = m.id();
            ss.A = Matrix::Zero(n, n);
            ss.B = Matrix::Zero(n, nu);
            ss.C = Matrix::Zero(2, n);
            ss.D = Matrix::Zero(2, nu);
            auto fill = [&](const Ad& v, Matrix& a, Matrix& b, int row) {
                const auto& g = v.derivatives();
                for (int j = 0; j < dirs && j < g.size(); ++j) {
                    if (j < n)
                        a(row, j) = g[j];
                    else
                        b(row, j - n) = g[j];
                }
            };
            for (int i = 0; i < n; ++i) fill(dx[i], ss.A, ss.B, i);
            for (int i = 0; i < 2; ++i) fill(y[i], ss.C, ss.D, i);
            ss.state_names = M::state_names();
            ss.inputs = M::input_ports();
            ss.outputs = {{"v", 2}};
            if (opts.drop_inert_states) drop_inert(ss);
            ss.check();
            return ss;
        },
        model);
}

}  // namespace stabman
