#include "bvpc/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bvpc/errors.hpp"

namespace bvpc {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) : UnitQuaternion(Vec4(w, x, y, z)) {}

UnitQuaternion::UnitQuaternion(const Vec4& wxyz) {
  const double n = wxyz.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw std::invalid_argument("UnitQuaternion: cannot normalize zero or non-finite vector");
  }
  c_ = wxyz / n;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-12) return identity();
  return quat_exp(axis / n * angle);
}

UnitQuaternion UnitQuaternion::from_rotation_matrix(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  return UnitQuaternion(q.w(), q.x(), q.y(), q.z());
}

UnitQuaternion UnitQuaternion::from_yaw(double yaw) {
  return UnitQuaternion(std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw));
}

Mat3 UnitQuaternion::rotation_matrix() const {
  Mat3 r;
  r.col(0) = kernel::rotated_ex<double>(c_);
  r.col(1) = kernel::rotated_ey<double>(c_);
  r.col(2) = kernel::bearing<double>(c_);
  return r;
}

double UnitQuaternion::yaw() const {
  const Vec3 ex = kernel::rotated_ex<double>(c_);
  return std::atan2(ex.y(), ex.x());
}

bool UnitQuaternion::same_rotation(const UnitQuaternion& other, double tol) const {
  return std::abs(c_.dot(other.c_)) >= 1.0 - tol;
}

UnitQuaternion quat_mul(const UnitQuaternion& q1, const UnitQuaternion& q2) {
  return UnitQuaternion(kernel::quat_mul<double>(q1.coeffs(), q2.coeffs()));
}

Vec3 quat_rotate(const UnitQuaternion& q, const Vec3& v) { return kernel::quat_rotate<double>(q.coeffs(), v); }

UnitQuaternion quat_exp(const Vec3& r) {
  const double angle = r.norm();
  if (angle < 1e-8) {
    // sin(θ/2)/θ ≈ 1/2 - θ²/48
    const double k = 0.5 - angle * angle / 48.0;
    return UnitQuaternion(Vec4(1.0 - angle * angle / 8.0, k * r.x(), k * r.y(), k * r.z()));
  }
  const double k = std::sin(0.5 * angle) / angle;
  return UnitQuaternion(Vec4(std::cos(0.5 * angle), k * r.x(), k * r.y(), k * r.z()));
}

Vec3 quat_log(const UnitQuaternion& q) {
  Vec4 c = q.coeffs();
  if (c(0) < 0.0) c = -c;
  const Vec3 v = c.tail<3>();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  return 2.0 * std::atan2(s, c(0)) * v / s;
}

Vec3 bearing_n(const UnitQuaternion& q) { return kernel::bearing<double>(q.coeffs()); }

Mat32 bearing_N(const UnitQuaternion& q) {
  Mat32 n;
  n.col(0) = kernel::rotated_ex<double>(q.coeffs());
  n.col(1) = kernel::rotated_ey<double>(q.coeffs());
  return n;
}

HomogeneousImagePoint to_homogeneous(const Vec3& v) {
  if (!(v.z() > kProjectionEps)) {
    throw DegenerateProjection("to_homogeneous: depth " + std::to_string(v.z()) + " is not in front of the image plane");
  }
  return {v.x() / v.z(), v.y() / v.z()};
}

Vec3 angle_axis_between(const Vec3& a, const Vec3& b) {
  const double c = b.dot(a);
  if (c <= -1.0 + kAntiparallelEps) {
    throw AntiparallelInput("angle_axis_between: inputs are antiparallel");
  }
  const Vec3 axis = b.cross(a);
  const double s = axis.norm();
  if (s == 0.0) return Vec3::Zero();
  // atan2 agrees with arccos(bᵀa) and keeps precision near a == b.
  return std::atan2(s, c) / s * axis;
}

UnitQuaternion bearing_from_image(const HomogeneousImagePoint& s) {
  const Vec3 dir = s.homogeneous().normalized();
  return quat_exp(angle_axis_between(dir, Vec3::UnitZ()));
}

HomogeneousImagePoint image_from_bearing(const UnitQuaternion& q) { return to_homogeneous(bearing_n(q)); }

Mat3 skew(const Vec3& v) { return kernel::skew<double>(v); }

}  // namespace bvpc
