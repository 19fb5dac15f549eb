#pragma once

#include <Eigen/Core>
#include <cmath>

#include "bvpc/dynamics.hpp"
#include "bvpc/geometry.hpp"

namespace bvpc {

/// Value returned by image-based costs when the bearing cannot be projected.
inline constexpr double kPenaltyCeiling = 1e6;
/// Upper clamp on the distance used by dynamic_visual_weight.
inline constexpr double kDistanceCap = 10.0;

/// Diagonal weights of the three stage objectives.
struct CostWeights {
  Vec2 q_s{2.0, 2.0};
  double q_d = 2.0;
  Vec2 q_p{20.0, 20.0};
  Vec3 q_v{2.0, 2.0, 2.0};
  Vec4 q_q{1.0, 50.0, 50.0, 1.0};

  bool is_valid() const;
};

/// Visibility box on the normalized image plane and actuation boxes.
struct Bounds {
  Vec2 s_min{-1.0, -1.0};
  Vec2 s_max{1.0, 1.0};
  double c_min = 2.0;
  double c_max = 20.0;
  Vec3 omega_min{-3.0, -3.0, -3.0};
  Vec3 omega_max{3.0, 3.0, 3.0};

  bool is_valid() const;
  InputVec input_lower() const { return {c_min, omega_min.x(), omega_min.y(), omega_min.z()}; }
  InputVec input_upper() const { return {c_max, omega_max.x(), omega_max.y(), omega_max.z()}; }
};

/// Per-horizon-step target: compensated image, distance, velocity, attitude.
struct ReferencePoint {
  HomogeneousImagePoint s_star;
  double d_star = 1.0;
  Vec3 v_star = Vec3::Zero();
  UnitQuaternion q_star;
};

/// [n(q_bc⁻¹ ⊗ q_wb ⊗ q_bc ⊗ q_cl)]_z: the feature as seen by the camera of a
/// body with identity attitude. Throws DegenerateProjection.
HomogeneousImagePoint rotation_compensated_image(const UnitQuaternion& q_wb, const UnitQuaternion& q_cl,
                                                 const UnitQuaternion& q_bc);

/// Image and distance error. `w.q_s` is used as given; scale it with
/// dynamic_visual_weight beforehand.
double visual_servo_cost(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w,
                         const UnitQuaternion& q_bc);
/// ‖[n(q_cl)]_z‖² weighted by q_p.
double perception_cost(const QuadVisualState& x, const CostWeights& w);
/// Velocity error plus sign-aligned quaternion error.
double action_cost(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w);

/// base · clamp(d², 1, d_cap²)
Vec2 dynamic_visual_weight(double d_measured, const Vec2& base, double d_cap = kDistanceCap);

/// (s_c - s_min, s_max - s_c); all entries >= 0 iff the feature is inside the box.
Eigen::Vector4d visibility_residual(const QuadVisualState& x, const Bounds& b);

ControlInput clamp_input(const ControlInput& u, const Bounds& b);

namespace kernel {

inline constexpr int kResidualDim = 12;

/// Least-squares residual r with ‖r‖² = L_vs + L_p + L_a.
/// Layout: [image(2), distance(1), perception(2), velocity(3), attitude(4)].
template <typename T>
Eigen::Matrix<T, kResidualDim, 1> stage_residual(const Eigen::Matrix<T, kStateDim, 1>& x, const ReferencePoint& ref,
                                                 const CostWeights& w, const UnitQuaternion& q_bc) {
  using std::sqrt;
  const double root_penalty = std::sqrt(kPenaltyCeiling);
  Eigen::Matrix<T, kResidualDim, 1> r;
  r.setZero();
  const Quat<T> q_wb = x.template segment<4>(idx::kAtt);
  const Quat<T> q_cl = x.template segment<4>(idx::kBearing);

  const Quat<T> qbc = q_bc.coeffs().cast<T>();
  const Quat<T> q_comp = quat_mul<T>(quat_mul<T>(quat_mul<T>(quat_conj<T>(qbc), q_wb), qbc), q_cl);
  const V3<T> n_comp = bearing<T>(q_comp);
  if (n_comp.z() > T(kProjectionEps)) {
    r(0) = std::sqrt(w.q_s(0)) * (n_comp.x() / n_comp.z() - T(ref.s_star.u));
    r(1) = std::sqrt(w.q_s(1)) * (n_comp.y() / n_comp.z() - T(ref.s_star.v));
    r(2) = std::sqrt(w.q_d) * (x(idx::kDist) - T(ref.d_star));
  } else {
    r(0) = T(root_penalty);
  }

  const V3<T> n = bearing<T>(q_cl);
  if (n.z() > T(kProjectionEps)) {
    r(3) = std::sqrt(w.q_p(0)) * (n.x() / n.z());
    r(4) = std::sqrt(w.q_p(1)) * (n.y() / n.z());
  } else {
    r(3) = T(root_penalty);
  }

  for (int i = 0; i < 3; ++i) {
    r(5 + i) = std::sqrt(w.q_v(i)) * (x(idx::kVel + i) - T(ref.v_star(i)));
  }
  const Vec4& qs = ref.q_star.coeffs();
  T dot(0);
  for (int i = 0; i < 4; ++i) dot += q_wb(i) * T(qs(i));
  const double sign = dot < T(0) ? -1.0 : 1.0;
  for (int i = 0; i < 4; ++i) {
    r(8 + i) = std::sqrt(w.q_q(i)) * (T(sign) * q_wb(i) - T(qs(i)));
  }
  return r;
}

/// Visibility residual in flat coordinates; -kVisibilityViolation on every
/// entry when the bearing points away from the image plane.
inline constexpr double kVisibilityViolation = 1e3;

template <typename T>
Eigen::Matrix<T, 4, 1> visibility(const Eigen::Matrix<T, kStateDim, 1>& x, const Bounds& b) {
  const V3<T> n = bearing<T>(Quat<T>(x.template segment<4>(idx::kBearing)));
  Eigen::Matrix<T, 4, 1> g;
  if (!(n.z() > T(kProjectionEps))) {
    g.setConstant(T(-kVisibilityViolation));
    return g;
  }
  const T u = n.x() / n.z();
  const T v = n.y() / n.z();
  g << u - T(b.s_min.x()), v - T(b.s_min.y()), T(b.s_max.x()) - u, T(b.s_max.y()) - v;
  return g;
}

}  // namespace kernel

/// Residual and its Jacobian with respect to the flat state.
struct ResidualLinearization {
  Eigen::Matrix<double, kernel::kResidualDim, 1> r;
  Eigen::Matrix<double, kernel::kResidualDim, kStateDim> J;
};
ResidualLinearization linearize_stage_residual(const StateVec& x, const ReferencePoint& ref, const CostWeights& w,
                                               const UnitQuaternion& q_bc);

struct VisibilityLinearization {
  Eigen::Vector4d g;
  Eigen::Matrix<double, 4, kStateDim> J;
};
VisibilityLinearization linearize_visibility(const StateVec& x, const Bounds& b);

/// Gradients of the individual costs with respect to the flat state.
StateVec visual_servo_cost_gradient(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w,
                                    const UnitQuaternion& q_bc);
StateVec perception_cost_gradient(const QuadVisualState& x, const CostWeights& w);
StateVec action_cost_gradient(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w);

}  // namespace bvpc
