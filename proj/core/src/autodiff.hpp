#pragma once

// Forward-mode AD helpers over Eigen's AutoDiffScalar with a fixed 16-wide
// derivative vector (12 state + 4 input directions).

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace bvpc::ad {

using Deriv16 = Eigen::Matrix<double, 16, 1>;
using Scalar16 = Eigen::AutoDiffScalar<Deriv16>;

/// Lifts `v` to AD scalars whose derivative directions start at `offset`.
template <int Dim>
Eigen::Matrix<Scalar16, Dim, 1> seed(const Eigen::Matrix<double, Dim, 1>& v, int offset) {
  Eigen::Matrix<Scalar16, Dim, 1> out;
  for (int i = 0; i < Dim; ++i) {
    out(i) = Scalar16(v(i), 16, offset + i);
  }
  return out;
}

template <int Rows>
Eigen::Matrix<double, Rows, 16> jacobian(const Eigen::Matrix<Scalar16, Rows, 1>& f) {
  Eigen::Matrix<double, Rows, 16> j;
  for (int i = 0; i < Rows; ++i) {
    // Outputs that never touched an active variable carry an empty derivative.
    if (f(i).derivatives().size() == 16) {
      j.row(i) = f(i).derivatives().transpose();
    } else {
      j.row(i).setZero();
    }
  }
  return j;
}

template <int Rows>
Eigen::Matrix<double, Rows, 1> values(const Eigen::Matrix<Scalar16, Rows, 1>& f) {
  Eigen::Matrix<double, Rows, 1> out;
  for (int i = 0; i < Rows; ++i) out(i) = f(i).value();
  return out;
}

}  // namespace bvpc::ad
