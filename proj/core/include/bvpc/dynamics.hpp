#pragma once

#include <Eigen/Core>

#include "bvpc/geometry.hpp"
#include "bvpc/quat_kernels.hpp"

namespace bvpc {

inline constexpr double kGravity = 9.81;
/// Lower clamp applied to the feature distance after every integration step.
inline constexpr double kDistanceFloor = 0.05;

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 4;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using InputVec = Eigen::Matrix<double, kInputDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using StateInputMat = Eigen::Matrix<double, kStateDim, kInputDim>;

/// Offsets into the flattened state [v_w, q_wb, q_cl, d].
namespace idx {
inline constexpr int kVel = 0;
inline constexpr int kAtt = 3;
inline constexpr int kBearing = 7;
inline constexpr int kDist = 11;
}  // namespace idx

/// Controller state: world velocity, body attitude, landmark bearing, distance.
/// Contains no position by construction.
struct QuadVisualState {
  Vec3 v_w = Vec3::Zero();
  UnitQuaternion q_wb;
  UnitQuaternion q_cl;
  double d = 1.0;

  StateVec to_vector() const;
  /// Quaternion blocks are renormalized on the way in.
  static QuadVisualState from_vector(const StateVec& x);
  bool is_valid() const;
};

/// Mass-normalized collective thrust along body z (m/s²) and body rates (rad/s).
struct ControlInput {
  double c = kGravity;
  Vec3 omega_b = Vec3::Zero();

  InputVec to_vector() const { return {c, omega_b.x(), omega_b.y(), omega_b.z()}; }
  static ControlInput from_vector(const InputVec& u) { return {u(0), u.tail<3>()}; }
  static ControlInput hover() { return {}; }
};

/// Camera mounting: position in the body frame and camera→body rotation.
struct CameraExtrinsics {
  Vec3 p_b_cb = Vec3::Zero();
  UnitQuaternion q_bc;

  /// Camera 0.1 m ahead of the body origin, optical axis along body +x,
  /// image x to the right and image y down.
  static CameraExtrinsics forward_looking();
};

struct CameraTwist {
  Vec3 v_c = Vec3::Zero();
  Vec3 omega_c = Vec3::Zero();
};

struct QuadRates {
  Vec3 dv_w;
  Vec4 dq_wb;
};

struct ImageRates {
  /// Minimal bearing rate in the tangent basis N(q_cl).
  TangentVec2 u_mu;
  double dd = 0.0;
  /// ½ [0; N u_mu] ⊗ q_cl
  Vec4 dq_cl;
};

struct StateDerivative {
  Vec3 dv_w;
  Vec4 dq_wb;
  Vec4 dq_cl;
  double dd = 0.0;

  StateVec to_vector() const;
};

struct HomogeneousRates {
  Vec2 ds;
  double dZ = 0.0;
};

struct DynamicsJacobians {
  StateMat A;
  StateInputMat B;
};

QuadRates quad_dynamics(const Vec3& v_w, const UnitQuaternion& q_wb, const ControlInput& u);
CameraTwist camera_twist(const Vec3& v_w, const Vec3& omega_b, const UnitQuaternion& q_wb,
                         const CameraExtrinsics& ext);
/// Requires d > 0.
ImageRates image_dynamics(const UnitQuaternion& q_cl, double d, const CameraTwist& twist);
StateDerivative full_dynamics(const QuadVisualState& x, const ControlInput& u, const CameraExtrinsics& ext);

/// Classical RK4 on the flattened state, then quaternion renormalization and
/// the distance floor.
QuadVisualState rk4_step(const QuadVisualState& x, const ControlInput& u, double dt, const CameraExtrinsics& ext);

/// ∂f/∂x, ∂f/∂u of full_dynamics in flat coordinates (forward-mode AD).
DynamicsJacobians dynamics_jacobians(const QuadVisualState& x, const ControlInput& u, const CameraExtrinsics& ext);

/// Flat-coordinate RK4 step and its sensitivities (forward-mode AD).
struct DiscreteStep {
  StateVec next;
  StateMat A;
  StateInputMat B;
};
DiscreteStep rk4_step_linearized(const StateVec& x, const InputVec& u, double dt, const CameraExtrinsics& ext);
StateVec rk4_step_flat(const StateVec& x, const InputVec& u, double dt, const CameraExtrinsics& ext);

/// Point-feature kinematics in normalized image coordinates plus depth.
/// Requires Z > 0.
HomogeneousRates homogeneous_image_dynamics(const HomogeneousImagePoint& s, double Z, const CameraTwist& twist);

/// Feature-only state under a prescribed camera twist, for open-loop prediction.
struct BearingFeature {
  UnitQuaternion q_cl;
  double d = 1.0;
};
struct HomogeneousFeature {
  HomogeneousImagePoint s;
  double Z = 1.0;
};
BearingFeature propagate_bearing(const BearingFeature& f, const CameraTwist& twist, double dt);
HomogeneousFeature propagate_homogeneous(const HomogeneousFeature& f, const CameraTwist& twist, double dt);

namespace kernel {

/// ẋ = f(x, u) on the flattened 12-vector.
template <typename T>
Eigen::Matrix<T, kStateDim, 1> flow(const Eigen::Matrix<T, kStateDim, 1>& x, const Eigen::Matrix<T, kInputDim, 1>& u,
                                    const CameraExtrinsics& ext) {
  using V = V3<T>;
  const V v_w = x.template segment<3>(idx::kVel);
  const Quat<T> q_wb = x.template segment<4>(idx::kAtt);
  const Quat<T> q_cl = x.template segment<4>(idx::kBearing);
  const T d = x(idx::kDist);
  const T c = u(0);
  const V omega_b = u.template tail<3>();

  Eigen::Matrix<T, kStateDim, 1> dx;
  dx.template segment<3>(idx::kVel) = quat_rotate<T>(q_wb, V(T(0), T(0), c)) + V(T(0), T(0), T(-kGravity));
  dx.template segment<4>(idx::kAtt) = quat_rate_body<T>(omega_b, q_wb);

  const Quat<T> q_bc = ext.q_bc.coeffs().cast<T>();
  const V p_cb = ext.p_b_cb.cast<T>();
  const V v_body = quat_rotate_inv<T>(q_wb, v_w) + omega_b.cross(p_cb);
  const V v_c = quat_rotate_inv<T>(q_bc, v_body);
  const V omega_c = quat_rotate_inv<T>(q_bc, omega_b);

  const V n = bearing<T>(q_cl);
  const V nx = rotated_ex<T>(q_cl);
  const V ny = rotated_ey<T>(q_cl);
  const V w = -omega_c - n.cross(v_c) / d;
  const T ua = nx.dot(w);
  const T ub = ny.dot(w);
  dx.template segment<4>(idx::kBearing) = quat_rate<T>(V(nx * ua + ny * ub), q_cl);
  dx(idx::kDist) = -n.dot(v_c);
  return dx;
}

template <typename T>
Eigen::Matrix<T, kStateDim, 1> rk4(const Eigen::Matrix<T, kStateDim, 1>& x, const Eigen::Matrix<T, kInputDim, 1>& u,
                                   double dt, const CameraExtrinsics& ext) {
  using S = Eigen::Matrix<T, kStateDim, 1>;
  const T h(dt);
  const S k1 = flow<T>(x, u, ext);
  const S k2 = flow<T>(S(x + T(0.5) * h * k1), u, ext);
  const S k3 = flow<T>(S(x + T(0.5) * h * k2), u, ext);
  const S k4 = flow<T>(S(x + h * k3), u, ext);
  S out = x + h / T(6) * (k1 + T(2) * k2 + T(2) * k3 + k4);
  using std::sqrt;
  const T na = sqrt(out.template segment<4>(idx::kAtt).squaredNorm());
  out.template segment<4>(idx::kAtt) /= na;
  const T nb = sqrt(out.template segment<4>(idx::kBearing).squaredNorm());
  out.template segment<4>(idx::kBearing) /= nb;
  if (out(idx::kDist) < T(kDistanceFloor)) out(idx::kDist) = T(kDistanceFloor);
  return out;
}

}  // namespace kernel

}  // namespace bvpc
