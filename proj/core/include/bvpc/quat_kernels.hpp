#pragma once

// Scalar-generic quaternion kernels. Quaternions are raw 4-vectors stored
// (w, x, y, z) with the Hamilton product. The rotation formula is the
// quadratic form, which equals the rotation matrix action for unit inputs and
// stays smooth off the unit sphere so it can be differentiated in flat
// coordinates.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bvpc::kernel {

template <typename T>
using Quat = Eigen::Matrix<T, 4, 1>;
template <typename T>
using V3 = Eigen::Matrix<T, 3, 1>;

template <typename T>
Quat<T> quat_mul(const Quat<T>& a, const Quat<T>& b) {
  const V3<T> av = a.template tail<3>();
  const V3<T> bv = b.template tail<3>();
  Quat<T> out;
  out(0) = a(0) * b(0) - av.dot(bv);
  out.template tail<3>() = a(0) * bv + b(0) * av + av.cross(bv);
  return out;
}

template <typename T>
Quat<T> quat_conj(const Quat<T>& q) {
  Quat<T> out = q;
  out.template tail<3>() = -q.template tail<3>();
  return out;
}

/// q ⊙ v
template <typename T>
V3<T> quat_rotate(const Quat<T>& q, const V3<T>& v) {
  const T w = q(0);
  const V3<T> e = q.template tail<3>();
  return (w * w - e.squaredNorm()) * v + T(2) * e.dot(v) * e + T(2) * w * e.cross(v);
}

/// q⁻¹ ⊙ v for unit q.
template <typename T>
V3<T> quat_rotate_inv(const Quat<T>& q, const V3<T>& v) {
  return quat_rotate<T>(quat_conj<T>(q), v);
}

/// q ⊙ e_z, i.e. the third column of the rotation matrix.
template <typename T>
V3<T> bearing(const Quat<T>& q) {
  const T w = q(0), x = q(1), y = q(2), z = q(3);
  return V3<T>(T(2) * (x * z + w * y), T(2) * (y * z - w * x), w * w - x * x - y * y + z * z);
}

template <typename T>
V3<T> rotated_ex(const Quat<T>& q) {
  const T w = q(0), x = q(1), y = q(2), z = q(3);
  return V3<T>(w * w + x * x - y * y - z * z, T(2) * (x * y + w * z), T(2) * (x * z - w * y));
}

template <typename T>
V3<T> rotated_ey(const Quat<T>& q) {
  const T w = q(0), x = q(1), y = q(2), z = q(3);
  return V3<T>(T(2) * (x * y - w * z), w * w - x * x + y * y - z * z, T(2) * (y * z + w * x));
}

/// ½ [0; ω] ⊗ q for ω expressed in the outer frame of q.
template <typename T>
Quat<T> quat_rate(const V3<T>& omega, const Quat<T>& q) {
  Quat<T> pure;
  pure << T(0), omega;
  return T(0.5) * quat_mul<T>(pure, q);
}

/// ½ q ⊗ [0; ω] for ω expressed in the inner (body) frame of q.
template <typename T>
Quat<T> quat_rate_body(const V3<T>& omega, const Quat<T>& q) {
  Quat<T> pure;
  pure << T(0), omega;
  return T(0.5) * quat_mul<T>(q, pure);
}

template <typename T>
Eigen::Matrix<T, 3, 3> skew(const V3<T>& a) {
  Eigen::Matrix<T, 3, 3> m;
  m << T(0), -a.z(), a.y(),
       a.z(), T(0), -a.x(),
       -a.y(), a.x(), T(0);
  return m;
}

}  // namespace bvpc::kernel
