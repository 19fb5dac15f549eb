#pragma once

#include <Eigen/Core>

#include "bvpc/quat_kernels.hpp"

namespace bvpc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Coordinates in the tangent plane of a bearing vector, spanned by N(q).
using TangentVec2 = Eigen::Vector2d;

/// Depth below which a 3D vector is considered not projectable.
inline constexpr double kProjectionEps = 1e-6;
/// Tolerance on b·a > -1 used by angle_axis_between.
inline constexpr double kAntiparallelEps = 1e-9;

/// Unit quaternion, (w, x, y, z) storage, Hamilton convention.
///
/// Every constructor normalizes, so the norm is 1 up to rounding. q and -q are
/// distinct values but the same rotation; use same_rotation() to compare
/// rotations.
class UnitQuaternion {
 public:
  UnitQuaternion() : c_(1.0, 0.0, 0.0, 0.0) {}
  UnitQuaternion(double w, double x, double y, double z);
  /// Normalizes `wxyz`; throws std::invalid_argument on a zero or non-finite vector.
  explicit UnitQuaternion(const Vec4& wxyz);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
  static UnitQuaternion from_rotation_matrix(const Mat3& r);
  /// Yaw-only rotation about world +z.
  static UnitQuaternion from_yaw(double yaw);

  double w() const { return c_(0); }
  double x() const { return c_(1); }
  double y() const { return c_(2); }
  double z() const { return c_(3); }
  const Vec4& coeffs() const { return c_; }

  UnitQuaternion inverse() const { return UnitQuaternion(kernel::quat_conj<double>(c_), kTrusted); }
  UnitQuaternion operator-() const { return UnitQuaternion(Vec4(-c_), kTrusted); }
  Mat3 rotation_matrix() const;
  /// Yaw of the rotated body x axis, atan2 of its world xy projection.
  double yaw() const;

  bool same_rotation(const UnitQuaternion& other, double tol = 1e-9) const;

 private:
  struct TrustedTag {};
  static constexpr TrustedTag kTrusted{};
  UnitQuaternion(const Vec4& wxyz, TrustedTag) : c_(wxyz) {}

  Vec4 c_;
};

/// Point on the normalized image plane; the third homogeneous coordinate is
/// implicitly 1.
struct HomogeneousImagePoint {
  double u = 0.0;
  double v = 0.0;

  Vec2 vec() const { return {u, v}; }
  Vec3 homogeneous() const { return {u, v, 1.0}; }
};

/// Hamilton product q1 ⊗ q2, renormalized.
UnitQuaternion quat_mul(const UnitQuaternion& q1, const UnitQuaternion& q2);
inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) { return quat_mul(a, b); }

/// q ⊙ v
Vec3 quat_rotate(const UnitQuaternion& q, const Vec3& v);

/// Exponential map of a rotation vector.
UnitQuaternion quat_exp(const Vec3& r);
/// Inverse of quat_exp; angle in [0, π].
Vec3 quat_log(const UnitQuaternion& q);

/// n(q) = q ⊙ e_z
Vec3 bearing_n(const UnitQuaternion& q);
/// N(q) = [q ⊙ e_x, q ⊙ e_y]
Mat32 bearing_N(const UnitQuaternion& q);

/// [v]_z = (x/z, y/z). Throws DegenerateProjection when z <= kProjectionEps.
HomogeneousImagePoint to_homogeneous(const Vec3& v);

/// Rotation vector carrying b onto a: angle arccos(bᵀa), axis (b×a)/‖b×a‖.
/// Returns exactly zero when a == b. Throws AntiparallelInput when
/// bᵀa <= -1 + kAntiparallelEps.
Vec3 angle_axis_between(const Vec3& a, const Vec3& b);

/// Minimal-twist bearing quaternion whose image is `s`.
UnitQuaternion bearing_from_image(const HomogeneousImagePoint& s);
/// [n(q)]_z; throws DegenerateProjection when the bearing points away.
HomogeneousImagePoint image_from_bearing(const UnitQuaternion& q);

Mat3 skew(const Vec3& v);

}  // namespace bvpc
