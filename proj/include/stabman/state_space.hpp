#pragma once

#include "stabman/core.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

/// Phasor in a rotating dq frame, x = d + j q.
struct DqPhasor {
    Real d = 0.0;
    Real q = 0.0;
    [[nodiscard]] Real magnitude() const { return std::hypot(d, q); }
    [[nodiscard]] Complex as_complex() const { return {d, q}; }
};

struct Port {
    std::string name;
    int size = 2;  ///< 2 for dq phasors, 1 for scalar references
};

/// Linear subsystem dx = A x + B u, y = C x + D u with named ports. Inputs and
/// outputs are stacked in port order.
struct StateSpaceModel {
    std::string name;
    Matrix A, B, C, D;
    std::vector<std::string> state_names;
    std::vector<Port> inputs;
    std::vector<Port> outputs;

    [[nodiscard]] Eigen::Index order() const { return A.rows(); }
    [[nodiscard]] Eigen::Index input_size() const;
    [[nodiscard]] Eigen::Index output_size() const;
    [[nodiscard]] std::optional<Eigen::Index> input_offset(const std::string& port) const;
    [[nodiscard]] std::optional<Eigen::Index> output_offset(const std::string& port) const;
    [[nodiscard]] const Port* input_port(const std::string& port) const;
    [[nodiscard]] const Port* output_port(const std::string& port) const;

    /// Throws ValidationError if dimensions or port names are inconsistent.
    void check() const;

    /// Transfer matrix C (sI - A)^-1 B + D at s.
    [[nodiscard]] CMatrix transfer(Complex s) const;
};

/// Rotation between a device-internal dq frame and the common global frame.
/// The internal frame leads the global one by `angle`.
struct FrameRotation {
    Real angle = 0.0;

    [[nodiscard]] DqPhasor to_internal(DqPhasor g) const;
    [[nodiscard]] DqPhasor to_global(DqPhasor z) const;
    /// d(to_internal(g))/d(angle), the linearized rotation sensitivity.
    [[nodiscard]] DqPhasor to_internal_sensitivity(DqPhasor g) const;
    /// d(to_global(z))/d(angle).
    [[nodiscard]] DqPhasor to_global_sensitivity(DqPhasor z) const;
};

template <class T>
inline void rotate_to_internal(const T& gd, const T& gq, const T& angle, T& d, T& q) {
    using std::cos;
    using std::sin;
    const T c = cos(angle), s = sin(angle);
    d = gd * c + gq * s;
    q = -gd * s + gq * c;
}

template <class T>
inline void rotate_to_global(const T& d, const T& q, const T& angle, T& gd, T& gq) {
    using std::cos;
    using std::sin;
    const T c = cos(angle), s = sin(angle);
    gd = d * c - q * s;
    gq = d * s + q * c;
}

}  // namespace stabman
