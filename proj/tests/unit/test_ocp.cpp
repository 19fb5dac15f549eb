#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bvpc/errors.hpp"
#include "bvpc/ocp.hpp"
#include "bvpc/simulator.hpp"

using namespace bvpc;

namespace {

/// Hover 4 m in front of the default landmark, measurement equal to the reference.
struct HoverCase {
  QuadVisualState x0;
  std::vector<ReferencePoint> refs;
};

HoverCase hover_case(int n = 20) {
  const Landmark lm;
  const CameraExtrinsics ext = CameraExtrinsics::forward_looking();
  const PlantState ps{Vec3(2, 0, 3), Vec3::Zero(), UnitQuaternion::identity()};
  Rng rng(0);
  HoverCase h;
  h.x0 = *observe(ps, lm, ext, NoiseModel{}, rng);
  h.refs.assign(static_cast<std::size_t>(n + 1), make_reference_from_waypoint(ps.p_w, Vec3::Zero(), 0.0, lm, ext));
  return h;
}

OcpProblem problem_from(const HoverCase& h, OcpParams params = {}) {
  return build_problem(h.x0, h.refs, CostWeights{}, Bounds{}, CameraExtrinsics::forward_looking(), params);
}

/// Hover case displaced 1 m sideways so the solver has work to do.
HoverCase offset_case() {
  HoverCase h = hover_case();
  const Landmark lm;
  const CameraExtrinsics ext = CameraExtrinsics::forward_looking();
  const PlantState ps{Vec3(2, 1, 3.3), Vec3(0.3, 0, 0), UnitQuaternion::from_yaw(0.1)};
  Rng rng(0);
  h.x0 = *observe(ps, lm, ext, NoiseModel{}, rng);
  return h;
}

}  // namespace

TEST(BuildProblem, Validation) {
  const HoverCase h = hover_case();
  EXPECT_NO_THROW(problem_from(h));
  std::vector<ReferencePoint> short_refs(5);
  EXPECT_THROW(build_problem(h.x0, short_refs, CostWeights{}, Bounds{}, CameraExtrinsics::forward_looking(), {}),
               BadReferenceLength);
  QuadVisualState bad = h.x0;
  bad.d = -1.0;
  EXPECT_THROW(build_problem(bad, h.refs, CostWeights{}, Bounds{}, CameraExtrinsics::forward_looking(), {}),
               InvalidInitialState);
}

TEST(BuildProblem, ScalesImageWeightOnce) {
  const HoverCase h = hover_case();
  const OcpProblem p = problem_from(h);
  EXPECT_LT((p.weights.q_s - dynamic_visual_weight(h.x0.d, CostWeights{}.q_s)).norm(), 1e-12);
}

TEST(Solve, HoverFixedPoint) {
  const OcpSolution s = solve(problem_from(hover_case()));
  EXPECT_LE(s.sqp_iters, 5);
  ASSERT_EQ(s.inputs.size(), 20u);
  for (const ControlInput& u : s.inputs) {
    EXPECT_LT(std::abs(u.c - kGravity), 0.1);
    EXPECT_LT(u.omega_b.norm(), 0.01);
  }
  EXPECT_LT(s.kkt, 1e-4);
}

TEST(Solve, InputsInsideBoxesAndMeritMonotone) {
  const OcpProblem p = problem_from(offset_case(), OcpParams{20, 0.05, 10, 1e-6, 1e3});
  const OcpSolution s = solve(p);
  const Bounds b;
  for (const ControlInput& u : s.inputs) {
    EXPECT_GE(u.c, b.c_min);
    EXPECT_LE(u.c, b.c_max);
    EXPECT_TRUE((u.omega_b.array() >= b.omega_min.array()).all());
    EXPECT_TRUE((u.omega_b.array() <= b.omega_max.array()).all());
  }
  ASSERT_GE(s.merit_history.size(), 2u);
  for (std::size_t i = 1; i < s.merit_history.size(); ++i) {
    EXPECT_LE(s.merit_history[i], s.merit_history[i - 1]);
  }
  EXPECT_LT(s.merit_history.back(), s.merit_history.front());
}

TEST(Solve, StatesAreTheRollout) {
  const OcpProblem p = problem_from(offset_case());
  const OcpSolution s = solve(p);
  const RolloutEvaluation r = evaluate_rollout(p, s.inputs);
  ASSERT_EQ(r.states.size(), s.states.size());
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    EXPECT_EQ(r.states[k].to_vector(), s.states[k].to_vector());
  }
  EXPECT_DOUBLE_EQ(r.merit, s.merit);
}

TEST(ShiftWarmStart, Definition) {
  const OcpProblem p = problem_from(offset_case());
  const OcpSolution s = solve(p);
  const OcpSolution w = shift_warm_start(s, p.params.dt, p.extrinsics);
  for (std::size_t k = 0; k + 1 < s.inputs.size(); ++k) {
    EXPECT_EQ(w.inputs[k].to_vector(), s.inputs[k + 1].to_vector());
  }
  EXPECT_EQ(w.inputs.back().to_vector(), s.inputs.back().to_vector());
  for (std::size_t k = 0; k < w.inputs.size(); ++k) {
    EXPECT_EQ(w.states[k + 1].to_vector(), rk4_step(w.states[k], w.inputs[k], p.params.dt, p.extrinsics).to_vector());
  }

  OcpSolution constant = s;
  for (auto& u : constant.inputs) u = ControlInput{9.0, Vec3(0.1, 0, 0)};
  const OcpSolution cw = shift_warm_start(constant, p.params.dt, p.extrinsics);
  for (std::size_t k = 0; k < cw.inputs.size(); ++k) EXPECT_EQ(cw.inputs[k].to_vector(), constant.inputs[k].to_vector());
}

TEST(KktResidual, ConvergedVersusPerturbed) {
  const OcpProblem p = problem_from(hover_case());
  const OcpSolution s = solve(p);
  const double base = kkt_residual(p, s);
  EXPECT_LT(base, 1e-4);

  OcpSolution perturbed = s;
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& u : perturbed.inputs) u = clamp_input({u.c + n(rng), u.omega_b + Vec3(n(rng), n(rng), n(rng))}, p.bounds);
  perturbed.states = evaluate_rollout(p, perturbed.inputs).states;
  EXPECT_GT(kkt_residual(p, perturbed), base);

  // A consistent rollout carries no defect: only stationarity remains, and
  // breaking one shooting node exposes the defect.
  OcpSolution broken = perturbed;
  broken.states[5].d += 0.25;
  EXPECT_GE(kkt_residual(p, broken), 0.25 - 1e-12);
}

TEST(Controller, HoverAndWarmStartStability) {
  const HoverCase h = hover_case();
  VisualPredictiveController ctrl(ControllerConfig{});
  const ControllerOutput a = ctrl.step(h.x0, h.refs);
  EXPECT_FALSE(a.failsafe);
  EXPECT_LT(std::abs(a.input.c - kGravity), 0.1);
  EXPECT_LT(a.input.omega_b.norm(), 0.01);
  const ControllerOutput b = ctrl.step(h.x0, h.refs);
  EXPECT_LT((a.input.to_vector() - b.input.to_vector()).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Controller, InfeasibleSolveFallsBackToHover) {
  HoverCase h = hover_case();
  // Finite but absurd velocity: every rollout overflows, so no iterate is usable.
  h.x0.v_w = Vec3(1e300, 0, 0);
  VisualPredictiveController ctrl(ControllerConfig{});
  const ControllerOutput out = ctrl.step(h.x0, h.refs);
  EXPECT_EQ(out.solution.status, SolveStatus::Infeasible);
  EXPECT_TRUE(out.failsafe);
  EXPECT_EQ(out.input.to_vector(), ControlInput::hover().to_vector());
}
