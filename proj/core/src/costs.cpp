#include "bvpc/costs.hpp"

#include <algorithm>

#include "autodiff.hpp"
#include "bvpc/errors.hpp"

namespace bvpc {

namespace {

double squared_head(const Eigen::Matrix<double, kernel::kResidualDim, 1>& r, int start, int len) {
  return r.segment(start, len).squaredNorm();
}

}  // namespace

bool CostWeights::is_valid() const {
  return (q_s.array() >= 0).all() && q_d >= 0 && (q_p.array() >= 0).all() && (q_v.array() >= 0).all() &&
         (q_q.array() >= 0).all();
}

bool Bounds::is_valid() const {
  return (s_min.array() < s_max.array()).all() && c_min < c_max && c_min >= 0.0 &&
         (omega_min.array() < omega_max.array()).all();
}

HomogeneousImagePoint rotation_compensated_image(const UnitQuaternion& q_wb, const UnitQuaternion& q_cl,
                                                 const UnitQuaternion& q_bc) {
  return image_from_bearing(q_bc.inverse() * q_wb * q_bc * q_cl);
}

double visual_servo_cost(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w,
                         const UnitQuaternion& q_bc) {
  const auto r = kernel::stage_residual<double>(x.to_vector(), ref, w, q_bc);
  return squared_head(r, 0, 3);
}

double perception_cost(const QuadVisualState& x, const CostWeights& w) {
  const auto r = kernel::stage_residual<double>(x.to_vector(), ReferencePoint{}, w, UnitQuaternion{});
  return squared_head(r, 3, 2);
}

double action_cost(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w) {
  const auto r = kernel::stage_residual<double>(x.to_vector(), ref, w, UnitQuaternion{});
  return squared_head(r, 5, 7);
}

Vec2 dynamic_visual_weight(double d_measured, const Vec2& base, double d_cap) {
  const double scale = std::clamp(d_measured * d_measured, 1.0, d_cap * d_cap);
  return base * scale;
}

Eigen::Vector4d visibility_residual(const QuadVisualState& x, const Bounds& b) {
  return kernel::visibility<double>(x.to_vector(), b);
}

ControlInput clamp_input(const ControlInput& u, const Bounds& b) {
  ControlInput out;
  out.c = std::clamp(u.c, b.c_min, b.c_max);
  out.omega_b = u.omega_b.cwiseMax(b.omega_min).cwiseMin(b.omega_max);
  return out;
}

ResidualLinearization linearize_stage_residual(const StateVec& x, const ReferencePoint& ref, const CostWeights& w,
                                               const UnitQuaternion& q_bc) {
  const auto xa = ad::seed<kStateDim>(x, 0);
  const auto r = kernel::stage_residual<ad::Scalar16>(xa, ref, w, q_bc);
  return {ad::values(r), ad::jacobian(r).leftCols<kStateDim>()};
}

VisibilityLinearization linearize_visibility(const StateVec& x, const Bounds& b) {
  const auto xa = ad::seed<kStateDim>(x, 0);
  const auto g = kernel::visibility<ad::Scalar16>(xa, b);
  return {ad::values(g), ad::jacobian(g).leftCols<kStateDim>()};
}

namespace {

StateVec partial_gradient(const ResidualLinearization& lin, int start, int len) {
  return 2.0 * lin.J.middleRows(start, len).transpose() * lin.r.segment(start, len);
}

}  // namespace

StateVec visual_servo_cost_gradient(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w,
                                    const UnitQuaternion& q_bc) {
  return partial_gradient(linearize_stage_residual(x.to_vector(), ref, w, q_bc), 0, 3);
}

StateVec perception_cost_gradient(const QuadVisualState& x, const CostWeights& w) {
  return partial_gradient(linearize_stage_residual(x.to_vector(), ReferencePoint{}, w, UnitQuaternion{}), 3, 2);
}

StateVec action_cost_gradient(const QuadVisualState& x, const ReferencePoint& ref, const CostWeights& w) {
  return partial_gradient(linearize_stage_residual(x.to_vector(), ref, w, UnitQuaternion{}), 5, 7);
}

}  // namespace bvpc
