#pragma once

#include <complex>
#include <limits>

#include <Eigen/Dense>

namespace dpt {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Rates and overlap exponents that diverge (overlap underflowed to zero) are
// reported as +inf. Overlaps below this threshold count as zero.
inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();
inline constexpr double kOverlapFloor = 1e-300;

inline bool is_infinite_rate(double r) { return r == kInfiniteRate; }

}  // namespace dpt
