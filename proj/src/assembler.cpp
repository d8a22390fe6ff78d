#include "stabman/assembler.hpp"

namespace stabman {

AssembledSystem assemble(const std::vector<StateSpaceModel>& models, const Topology& topo) {
    if (models.size() != topo.subsystems.size())
        throw ValidationError("assemble: " + std::to_string(models.size()) + " models for " +
                              std::to_string(topo.subsystems.size()) + " subsystems");

    const std::size_t ns = models.size();
    std::vector<Eigen::Index> xo(ns + 1, 0), uo(ns + 1, 0), yo(ns + 1, 0);
    for (std::size_t k = 0; k < ns; ++k) {
        models[k].check();
        xo[k + 1] = xo[k] + models[k].order();
        uo[k + 1] = uo[k] + models[k].input_size();
        yo[k + 1] = yo[k] + models[k].output_size();
    }
    const Eigen::Index n = xo[ns], nu = uo[ns], ny = yo[ns];

    Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, nu), C = Matrix::Zero(ny, n), D = Matrix::Zero(ny, nu);
    for (std::size_t k = 0; k < ns; ++k) {
        const auto& m = models[k];
        A.block(xo[k], xo[k], m.order(), m.order()) = m.A;
        B.block(xo[k], uo[k], m.order(), m.input_size()) = m.B;
        C.block(yo[k], xo[k], m.output_size(), m.order()) = m.C;
        D.block(yo[k], uo[k], m.output_size(), m.input_size()) = m.D;
    }

    auto input_at = [&](const PortRef& p) -> std::pair<Eigen::Index, int> {
        const auto& m = models.at(p.subsystem);
        const auto off = m.input_offset(p.port);
        if (!off) throw ValidationError("subsystem '" + m.name + "' has no input port '" + p.port + "'");
        return {uo[p.subsystem] + *off, m.input_port(p.port)->size};
    };
    auto output_at = [&](const PortRef& p) -> std::pair<Eigen::Index, int> {
        const auto& m = models.at(p.subsystem);
        const auto off = m.output_offset(p.port);
        if (!off) throw ValidationError("subsystem '" + m.name + "' has no output port '" + p.port + "'");
        return {yo[p.subsystem] + *off, m.output_port(p.port)->size};
    };

    Matrix K = Matrix::Zero(nu, ny);
    std::vector<int> bound(static_cast<std::size_t>(nu), 0);
    std::vector<Eigen::Index> external;
    AssembledSystem out;
    for (const auto& c : topo.connections) {
        const auto [ui, usz] = input_at(c.input);
        for (int r = 0; r < usz; ++r) ++bound[static_cast<std::size_t>(ui + r)];
        if (c.external) {
            for (int r = 0; r < usz; ++r) {
                external.push_back(ui + r);
                out.input_labels.push_back(models[c.input.subsystem].name + "." + c.input.port +
                                           (usz > 1 ? "[" + std::to_string(r) + "]" : ""));
            }
            continue;
        }
        for (const auto& t : c.terms) {
            const auto [yi, ysz] = output_at(t.output);
            if (ysz != usz)
                throw ValidationError("port size mismatch binding '" + models[t.output.subsystem].name + "." +
                                      t.output.port + "' to '" + models[c.input.subsystem].name + "." + c.input.port +
                                      "'");
            for (int r = 0; r < usz; ++r) K(ui + r, yi + r) += t.sign;
        }
    }
    for (std::size_t k = 0; k < ns; ++k)
        for (const auto& p : models[k].inputs) {
            const auto off = uo[k] + *models[k].input_offset(p.name);
            const int b = bound[static_cast<std::size_t>(off)];
            if (b != 1)
                throw ValidationError("input '" + models[k].name + "." + p.name + "' is bound " + std::to_string(b) +
                                      " times (expected once)");
        }

    Matrix E = Matrix::Zero(nu, static_cast<Eigen::Index>(external.size()));
    for (std::size_t j = 0; j < external.size(); ++j) E(external[j], static_cast<Eigen::Index>(j)) = 1.0;

    // u = K (C x + D u) + E w  =>  u = M^-1 (K C x + E w)
    const Matrix M = Matrix::Identity(nu, nu) - K * D;
    Eigen::FullPivLU<Matrix> lu(M);
    if (nu > 0 && !lu.isInvertible())
        throw NumericalError("algebraic loop: interconnection matrix I - K D is singular");
    const Matrix KC = K * C;
    out.A = A + B * lu.solve(KC);
    out.B = B * lu.solve(E);

    out.state_offset.assign(xo.begin(), xo.end() - 1);
    for (std::size_t k = 0; k < ns; ++k)
        for (const auto& s : models[k].state_names) out.state_labels.push_back(models[k].name + "." + s);
    if (!out.A.allFinite()) throw NumericalError("assembled state matrix is not finite");
    return out;
}

}  // namespace stabman
