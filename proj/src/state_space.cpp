#include "stabman/state_space.hpp"

#include <set>

namespace stabman {

namespace {

Eigen::Index total(const std::vector<Port>& ports) {
    Eigen::Index n = 0;
    for (const auto& p : ports) n += p.size;
    return n;
}

std::optional<Eigen::Index> offset(const std::vector<Port>& ports, const std::string& name) {
    Eigen::Index off = 0;
    for (const auto& p : ports) {
        if (p.name == name) return off;
        off += p.size;
    }
    return std::nullopt;
}

const Port* find(const std::vector<Port>& ports, const std::string& name) {
    for (const auto& p : ports)
        if (p.name == name) return &p;
    return nullptr;
}

}  // namespace

Eigen::Index StateSpaceModel::input_size() const { return total(inputs); }
Eigen::Index StateSpaceModel::output_size() const { return total(outputs); }

std::optional<Eigen::Index> StateSpaceModel::input_offset(const std::string& port) const { return offset(inputs, port); }
std::optional<Eigen::Index> StateSpaceModel::output_offset(const std::string& port) const {
    return offset(outputs, port);
}
const Port* StateSpaceModel::input_port(const std::string& port) const { return find(inputs, port); }
const Port* StateSpaceModel::output_port(const std::string& port) const { return find(outputs, port); }

void StateSpaceModel::check() const {
    const auto n = A.rows(), m = input_size(), p = output_size();
    auto fail = [&](const std::string& what) { throw ValidationError("state-space model '" + name + "': " + what); };
    if (A.cols() != n) fail("A is not square");
    if (B.rows() != n || B.cols() != m) fail("B has wrong dimensions");
    if (C.rows() != p || C.cols() != n) fail("C has wrong dimensions");
    if (D.rows() != p || D.cols() != m) fail("D has wrong dimensions");
    if (!state_names.empty() && static_cast<Eigen::Index>(state_names.size()) != n) fail("state name count mismatch");
    std::set<std::string> seen;
    for (const auto& port : inputs)
        if (!seen.insert(port.name).second) fail("duplicate input port '" + port.name + "'");
    seen.clear();
    for (const auto& port : outputs)
        if (!seen.insert(port.name).second) fail("duplicate output port '" + port.name + "'");
}

CMatrix StateSpaceModel::transfer(Complex s) const {
    const auto n = A.rows();
    CMatrix sI_A = s * CMatrix::Identity(n, n) - A.cast<Complex>();
    CMatrix X = sI_A.partialPivLu().solve(B.cast<Complex>());
    return C.cast<Complex>() * X + D.cast<Complex>();
}

DqPhasor FrameRotation::to_internal(DqPhasor g) const {
    DqPhasor z;
    rotate_to_internal(g.d, g.q, angle, z.d, z.q);
    return z;
}

DqPhasor FrameRotation::to_global(DqPhasor z) const {
    DqPhasor g;
    rotate_to_global(z.d, z.q, angle, g.d, g.q);
    return g;
}

DqPhasor FrameRotation::to_internal_sensitivity(DqPhasor g) const {
    const Real c = std::cos(angle), s = std::sin(angle);
    return {-g.d * s + g.q * c, -g.d * c - g.q * s};
}

DqPhasor FrameRotation::to_global_sensitivity(DqPhasor z) const {
    const Real c = std::cos(angle), s = std::sin(angle);
    return {-z.d * s - z.q * c, z.d * c - z.q * s};
}

}  // namespace stabman
