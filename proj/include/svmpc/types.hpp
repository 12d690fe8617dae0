#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace svmpc {

// Upper bounds on problem size. Vectors and matrices below are dynamically
// sized but stack allocated, which keeps the solver inner loops free of heap
// traffic.
inline constexpr int kMaxStateDim = 12;
inline constexpr int kMaxControlDim = 6;

using State = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDim, 1>;
using Control = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxControlDim, 1>;
using Costate = State;

using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStateDim, kMaxStateDim>;
using InputMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStateDim, kMaxControlDim>;
using GainMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxControlDim, kMaxStateDim>;
using ControlMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxControlDim, kMaxControlDim>;

// Raised when a caller breaks a documented precondition (dimension mismatch,
// NaN input, out-of-range configuration).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace svmpc
