#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stabman {

using Real = double;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Real kPi = std::numbers::pi;

/// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input or a violated data-model invariant (exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Solver failure: non-convergence, singular systems, NaN (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// No point satisfying all constraints was found (exit code 4).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

}  // namespace stabman
