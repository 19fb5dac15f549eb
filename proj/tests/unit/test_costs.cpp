#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bvpc/costs.hpp"
#include "support/oracles.hpp"

using namespace bvpc;

namespace {

QuadVisualState level_state(const HomogeneousImagePoint& s, double d) {
  QuadVisualState x;
  x.q_cl = bearing_from_image(s);
  x.d = d;
  return x;
}

QuadVisualState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(-3.0, 3.0), d(0.5, 10.0), s(-0.8, 0.8), tilt(-0.4, 0.4);
  QuadVisualState x;
  x.v_w = Vec3(v(rng), v(rng), v(rng));
  x.q_wb = UnitQuaternion::from_yaw(3 * tilt(rng)) * quat_exp(Vec3(tilt(rng), tilt(rng), 0.0));
  x.q_cl = bearing_from_image({s(rng), s(rng)});
  x.d = d(rng);
  return x;
}

}  // namespace

TEST(RotationCompensatedImage, Examples) {
  const UnitQuaternion q_cl = bearing_from_image({0.3, -0.4});
  const auto a = rotation_compensated_image(UnitQuaternion::identity(), q_cl, CameraExtrinsics::forward_looking().q_bc);
  EXPECT_NEAR(a.u, 0.3, 1e-12);
  EXPECT_NEAR(a.v, -0.4, 1e-12);

  const auto b =
      rotation_compensated_image(UnitQuaternion::from_yaw(0.8), UnitQuaternion::identity(), UnitQuaternion::identity());
  EXPECT_NEAR(b.u, 0.0, 1e-12);
  EXPECT_NEAR(b.v, 0.0, 1e-12);

  const double pitch = 10.0 * M_PI / 180.0;
  const UnitQuaternion q_wb = UnitQuaternion::from_axis_angle(Vec3::UnitY(), pitch);
  const auto c = rotation_compensated_image(q_wb, UnitQuaternion::identity(), UnitQuaternion::identity());
  const Vec3 e = oracle::rotation_matrix(q_wb.w(), q_wb.x(), q_wb.y(), q_wb.z()) * Vec3::UnitZ();
  EXPECT_NEAR(c.u, e.x() / e.z(), 1e-12);
  EXPECT_NEAR(c.v, e.y() / e.z(), 1e-12);
  EXPECT_NEAR(c.u, std::tan(pitch), 1e-12);
}

TEST(VisualServoCost, Examples) {
  CostWeights w;
  w.q_s = Vec2(2, 2);
  w.q_d = 2.0;
  const UnitQuaternion q_bc = UnitQuaternion::identity();
  ReferencePoint ref;
  ref.s_star = {0.1, 0.2};
  ref.d_star = 3.0;
  EXPECT_NEAR(visual_servo_cost(level_state({0.1, 0.2}, 3.0), ref, w, q_bc), 0.0, 1e-20);
  EXPECT_NEAR(visual_servo_cost(level_state({0.1, 0.2}, 4.0), ref, w, q_bc), 2.0, 1e-12);

  const double one = visual_servo_cost(level_state({0.2, 0.1}, 3.0), ref, w, q_bc);
  const double two = visual_servo_cost(level_state({0.3, 0.0}, 3.0), ref, w, q_bc);
  EXPECT_NEAR(two, 4.0 * one, 1e-12);
}

TEST(PerceptionCost, Examples) {
  CostWeights w;
  w.q_p = Vec2(4, 4);
  EXPECT_NEAR(perception_cost(level_state({0, 0}, 2.0), w), 0.0, 1e-20);
  EXPECT_NEAR(perception_cost(level_state({0.5, 0}, 2.0), w), 1.0, 1e-12);
  QuadVisualState x = level_state({0.3, -0.6}, 2.0);
  const double base = perception_cost(x, w);
  std::mt19937_64 rng(31);
  x.q_wb = UnitQuaternion(oracle::random_unit_quat(rng));
  EXPECT_EQ(perception_cost(x, w), base);
}

TEST(ActionCost, Examples) {
  CostWeights w;
  w.q_v = Vec3(3, 1, 1);
  ReferencePoint ref;
  ref.q_star = UnitQuaternion::from_yaw(0.4);
  ref.v_star = Vec3(1, 2, 3);
  QuadVisualState x;
  x.q_wb = ref.q_star;
  x.v_w = ref.v_star;
  EXPECT_NEAR(action_cost(x, ref, w), 0.0, 1e-20);
  x.q_wb = -ref.q_star;
  EXPECT_NEAR(action_cost(x, ref, w), 0.0, 1e-20);
  x.v_w = ref.v_star + Vec3(1, 0, 0);
  EXPECT_NEAR(action_cost(x, ref, w), 3.0, 1e-12);
}

TEST(DynamicVisualWeight, Examples) {
  const Vec2 base(2, 3);
  EXPECT_EQ(dynamic_visual_weight(1.0, base), base);
  EXPECT_EQ(dynamic_visual_weight(0.2, base), base);
  EXPECT_LT((dynamic_visual_weight(3.0, base, 10.0) - 9.0 * base).norm(), 1e-12);
  EXPECT_LT((dynamic_visual_weight(100.0, base, 10.0) - 100.0 * base).norm(), 1e-12);
}

TEST(VisibilityResidual, Examples) {
  const Bounds b;
  const auto a = visibility_residual(level_state({0, 0}, 2.0), b);
  EXPECT_LT((a - Eigen::Vector4d(1, 1, 1, 1)).norm(), 1e-12);
  const auto r = visibility_residual(level_state({1, 0}, 2.0), b);
  EXPECT_LT((r - Eigen::Vector4d(2, 1, 0, 1)).norm(), 1e-12);
  const auto v = visibility_residual(level_state({1.2, 0}, 2.0), b);
  EXPECT_NEAR(v.minCoeff(), -0.2, 1e-12);
  QuadVisualState behind;
  behind.q_cl = UnitQuaternion::from_axis_angle(Vec3::UnitX(), M_PI);
  EXPECT_LT(visibility_residual(behind, b).maxCoeff(), 0.0);
}

TEST(ClampInput, Examples) {
  const Bounds b;
  const ControlInput ok{9.81, Vec3(0.1, -0.2, 0.3)};
  const ControlInput same = clamp_input(ok, b);
  EXPECT_EQ(same.c, ok.c);
  EXPECT_EQ(same.omega_b, ok.omega_b);
  EXPECT_EQ(clamp_input({100.0, Vec3::Zero()}, b).c, 20.0);
  EXPECT_EQ(clamp_input({9.81, Vec3(-10, 0, 0)}, b).omega_b.x(), -3.0);
}

TEST(StageResidual, SquaredNormIsTotalCost) {
  std::mt19937_64 rng(32);
  const CostWeights w;
  const UnitQuaternion q_bc = CameraExtrinsics::forward_looking().q_bc;
  for (int i = 0; i < 50; ++i) {
    const QuadVisualState x = random_state(rng);
    ReferencePoint ref;
    ref.s_star = {0.1, -0.1};
    ref.d_star = 4.0;
    ref.v_star = Vec3(1, 0, 0);
    ref.q_star = UnitQuaternion::from_yaw(0.2);
    const auto r = kernel::stage_residual<double>(x.to_vector(), ref, w, q_bc);
    const double total = visual_servo_cost(x, ref, w, q_bc) + perception_cost(x, w) + action_cost(x, ref, w);
    EXPECT_NEAR(r.squaredNorm(), total, 1e-9 * std::max(1.0, total));
  }
}

TEST(CostGradients, MatchCentralDifferences) {
  std::mt19937_64 rng(33);
  const CostWeights w;
  const UnitQuaternion q_bc = CameraExtrinsics::forward_looking().q_bc;
  ReferencePoint ref;
  ref.s_star = {0.2, 0.1};
  ref.d_star = 5.0;
  ref.v_star = Vec3(0.5, -1, 0);
  ref.q_star = UnitQuaternion::from_yaw(-0.3);
  using Scalar1 = Eigen::Matrix<double, 1, 1>;
  for (int i = 0; i < 100; ++i) {
    const QuadVisualState s = random_state(rng);
    const StateVec x = s.to_vector();
    // Flat-coordinate cost, no renormalization, same as the solver sees it.
    const auto flat = [&](int part) {
      return [&, part](const StateVec& xx) {
        const auto r = kernel::stage_residual<double>(xx, ref, w, q_bc);
        const int start = part == 0 ? 0 : part == 1 ? 3 : 5;
        const int len = part == 0 ? 3 : part == 1 ? 2 : 7;
        return Scalar1(r.segment(start, len).squaredNorm());
      };
    };
    const StateVec g_vs = visual_servo_cost_gradient(s, ref, w, q_bc);
    const StateVec g_p = perception_cost_gradient(s, w);
    const StateVec g_a = action_cost_gradient(s, ref, w);
    EXPECT_LT(oracle::worst_relative(g_vs.transpose(), oracle::central_jacobian<1, kStateDim>(flat(0), x)), 1e-5);
    EXPECT_LT(oracle::worst_relative(g_p.transpose(), oracle::central_jacobian<1, kStateDim>(flat(1), x)), 1e-5);
    EXPECT_LT(oracle::worst_relative(g_a.transpose(), oracle::central_jacobian<1, kStateDim>(flat(2), x)), 1e-5);
  }
}

TEST(ResidualLinearization, MatchesCentralDifferences) {
  std::mt19937_64 rng(34);
  const CostWeights w;
  const Bounds b;
  const UnitQuaternion q_bc = CameraExtrinsics::forward_looking().q_bc;
  ReferencePoint ref;
  ref.d_star = 3.0;
  for (int i = 0; i < 100; ++i) {
    const StateVec x = random_state(rng).to_vector();
    const ResidualLinearization lin = linearize_stage_residual(x, ref, w, q_bc);
    const auto f = [&](const StateVec& xx) {
      return Eigen::Matrix<double, kernel::kResidualDim, 1>(kernel::stage_residual<double>(xx, ref, w, q_bc));
    };
    EXPECT_LT(oracle::worst_relative(lin.J, oracle::central_jacobian<kernel::kResidualDim, kStateDim>(f, x)), 1e-5);
    const VisibilityLinearization vis = linearize_visibility(x, b);
    const auto g = [&](const StateVec& xx) { return Eigen::Vector4d(kernel::visibility<double>(xx, b)); };
    EXPECT_LT(oracle::worst_relative(vis.J, oracle::central_jacobian<4, kStateDim>(g, x)), 1e-5);
  }
}
