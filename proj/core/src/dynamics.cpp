#include "bvpc/dynamics.hpp"

#include <unsupported/Eigen/AutoDiff>

#include "autodiff.hpp"

namespace bvpc {

StateVec QuadVisualState::to_vector() const {
  StateVec x;
  x.segment<3>(idx::kVel) = v_w;
  x.segment<4>(idx::kAtt) = q_wb.coeffs();
  x.segment<4>(idx::kBearing) = q_cl.coeffs();
  x(idx::kDist) = d;
  return x;
}

QuadVisualState QuadVisualState::from_vector(const StateVec& x) {
  QuadVisualState s;
  s.v_w = x.segment<3>(idx::kVel);
  s.q_wb = UnitQuaternion(Vec4(x.segment<4>(idx::kAtt)));
  s.q_cl = UnitQuaternion(Vec4(x.segment<4>(idx::kBearing)));
  s.d = x(idx::kDist);
  return s;
}

bool QuadVisualState::is_valid() const {
  return v_w.allFinite() && std::isfinite(d) && d > 0.0 && std::abs(q_wb.coeffs().norm() - 1.0) < 1e-9 &&
         std::abs(q_cl.coeffs().norm() - 1.0) < 1e-9;
}

CameraExtrinsics CameraExtrinsics::forward_looking() {
  Mat3 r_bc;
  // Columns: camera x (right), y (down), z (optical axis) in body coordinates.
  r_bc << 0.0, 0.0, 1.0,
         -1.0, 0.0, 0.0,
          0.0, -1.0, 0.0;
  return {Vec3(0.1, 0.0, 0.0), UnitQuaternion::from_rotation_matrix(r_bc)};
}

StateVec StateDerivative::to_vector() const {
  StateVec x;
  x.segment<3>(idx::kVel) = dv_w;
  x.segment<4>(idx::kAtt) = dq_wb;
  x.segment<4>(idx::kBearing) = dq_cl;
  x(idx::kDist) = dd;
  return x;
}

QuadRates quad_dynamics(const Vec3& v_w, const UnitQuaternion& q_wb, const ControlInput& u) {
  (void)v_w;
  QuadRates r;
  r.dv_w = quat_rotate(q_wb, Vec3(0.0, 0.0, u.c)) + Vec3(0.0, 0.0, -kGravity);
  r.dq_wb = kernel::quat_rate_body<double>(u.omega_b, q_wb.coeffs());
  return r;
}

CameraTwist camera_twist(const Vec3& v_w, const Vec3& omega_b, const UnitQuaternion& q_wb,
                         const CameraExtrinsics& ext) {
  const UnitQuaternion q_cb = ext.q_bc.inverse();
  CameraTwist t;
  t.v_c = quat_rotate(q_cb, Vec3(quat_rotate(q_wb.inverse(), v_w) + omega_b.cross(ext.p_b_cb)));
  t.omega_c = quat_rotate(q_cb, omega_b);
  return t;
}

ImageRates image_dynamics(const UnitQuaternion& q_cl, double d, const CameraTwist& twist) {
  const Vec3 n = bearing_n(q_cl);
  const Mat32 nn = bearing_N(q_cl);
  const Vec3 w = -twist.omega_c - n.cross(twist.v_c) / d;
  ImageRates r;
  r.u_mu = nn.transpose() * w;
  r.dd = -n.dot(twist.v_c);
  r.dq_cl = kernel::quat_rate<double>(Vec3(nn * r.u_mu), q_cl.coeffs());
  return r;
}

StateDerivative full_dynamics(const QuadVisualState& x, const ControlInput& u, const CameraExtrinsics& ext) {
  const QuadRates quad = quad_dynamics(x.v_w, x.q_wb, u);
  const ImageRates img = image_dynamics(x.q_cl, x.d, camera_twist(x.v_w, u.omega_b, x.q_wb, ext));
  return {quad.dv_w, quad.dq_wb, img.dq_cl, img.dd};
}

StateVec rk4_step_flat(const StateVec& x, const InputVec& u, double dt, const CameraExtrinsics& ext) {
  return kernel::rk4<double>(x, u, dt, ext);
}

QuadVisualState rk4_step(const QuadVisualState& x, const ControlInput& u, double dt, const CameraExtrinsics& ext) {
  return QuadVisualState::from_vector(rk4_step_flat(x.to_vector(), u.to_vector(), dt, ext));
}

DynamicsJacobians dynamics_jacobians(const QuadVisualState& x, const ControlInput& u, const CameraExtrinsics& ext) {
  using ad::Scalar16;
  const auto xa = ad::seed<kStateDim>(x.to_vector(), 0);
  const auto ua = ad::seed<kInputDim>(u.to_vector(), kStateDim);
  const Eigen::Matrix<Scalar16, kStateDim, 1> f = kernel::flow<Scalar16>(xa, ua, ext);
  const auto jac = ad::jacobian(f);
  return {jac.leftCols<kStateDim>(), jac.rightCols<kInputDim>()};
}

DiscreteStep rk4_step_linearized(const StateVec& x, const InputVec& u, double dt, const CameraExtrinsics& ext) {
  using ad::Scalar16;
  const auto xa = ad::seed<kStateDim>(x, 0);
  const auto ua = ad::seed<kInputDim>(u, kStateDim);
  const Eigen::Matrix<Scalar16, kStateDim, 1> next = kernel::rk4<Scalar16>(xa, ua, dt, ext);
  const auto jac = ad::jacobian(next);
  return {ad::values(next), jac.leftCols<kStateDim>(), jac.rightCols<kInputDim>()};
}

HomogeneousRates homogeneous_image_dynamics(const HomogeneousImagePoint& s, double Z, const CameraTwist& twist) {
  const double u = s.u, v = s.v;
  const Vec3& vc = twist.v_c;
  const Vec3& w = twist.omega_c;
  HomogeneousRates r;
  r.ds.x() = -vc.x() / Z + u * vc.z() / Z + u * v * w.x() - (1.0 + u * u) * w.y() + v * w.z();
  r.ds.y() = -vc.y() / Z + v * vc.z() / Z + (1.0 + v * v) * w.x() - u * v * w.y() - u * w.z();
  r.dZ = -vc.z() - Z * (w.x() * v - w.y() * u);
  return r;
}

BearingFeature propagate_bearing(const BearingFeature& f, const CameraTwist& twist, double dt) {
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  const auto rate = [&](const Vec5& y) {
    const Vec4 q = y.head<4>();
    const Vec3 n = kernel::bearing<double>(q);
    const Vec3 nx = kernel::rotated_ex<double>(q);
    const Vec3 ny = kernel::rotated_ey<double>(q);
    const Vec3 w = -twist.omega_c - n.cross(twist.v_c) / y(4);
    Vec5 out;
    out.head<4>() = kernel::quat_rate<double>(Vec3(nx * nx.dot(w) + ny * ny.dot(w)), q);
    out(4) = -n.dot(twist.v_c);
    return out;
  };
  Vec5 y;
  y << f.q_cl.coeffs(), f.d;
  const Vec5 k1 = rate(y);
  const Vec5 k2 = rate(y + 0.5 * dt * k1);
  const Vec5 k3 = rate(y + 0.5 * dt * k2);
  const Vec5 k4 = rate(y + dt * k3);
  y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {UnitQuaternion(Vec4(y.head<4>())), std::max(y(4), kDistanceFloor)};
}

HomogeneousFeature propagate_homogeneous(const HomogeneousFeature& f, const CameraTwist& twist, double dt) {
  const auto rate = [&](const Vec3& y) {
    const HomogeneousRates r = homogeneous_image_dynamics({y.x(), y.y()}, y.z(), twist);
    return Vec3(r.ds.x(), r.ds.y(), r.dZ);
  };
  Vec3 y(f.s.u, f.s.v, f.Z);
  const Vec3 k1 = rate(y);
  const Vec3 k2 = rate(y + 0.5 * dt * k1);
  const Vec3 k3 = rate(y + 0.5 * dt * k2);
  const Vec3 k4 = rate(y + dt * k3);
  y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {{y.x(), y.y()}, y.z()};
}

}  // namespace bvpc
