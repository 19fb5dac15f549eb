#include <benchmark/benchmark.h>

#include <random>

#include "bvpc/ocp.hpp"
#include "bvpc/qp.hpp"
#include "bvpc/simulator.hpp"

using namespace bvpc;

namespace {

struct Instance {
  QuadVisualState x0;
  std::vector<ReferencePoint> refs;
};

Instance offset_instance(int n) {
  const Landmark lm;
  const CameraExtrinsics ext = CameraExtrinsics::forward_looking();
  const PlantState ps{Vec3(2, 1, 3.3), Vec3(0.3, 0, 0), UnitQuaternion::from_yaw(0.1)};
  Rng rng(0);
  Instance in;
  in.x0 = *observe(ps, lm, ext, NoiseModel{}, rng);
  in.refs.assign(static_cast<std::size_t>(n + 1), make_reference_from_waypoint(Vec3(2, 0, 3), Vec3::Zero(), 0.0, lm, ext));
  return in;
}

}  // namespace

static void BM_Rk4Step(benchmark::State& state) {
  const Instance in = offset_instance(1);
  const StateVec x = in.x0.to_vector();
  const InputVec u = ControlInput{10.0, Vec3(0.1, -0.2, 0.3)}.to_vector();
  const CameraExtrinsics ext = CameraExtrinsics::forward_looking();
  for (auto _ : state) benchmark::DoNotOptimize(rk4_step_flat(x, u, 0.05, ext));
}
BENCHMARK(BM_Rk4Step);

static void BM_Rk4Linearized(benchmark::State& state) {
  const Instance in = offset_instance(1);
  const StateVec x = in.x0.to_vector();
  const InputVec u = ControlInput{10.0, Vec3(0.1, -0.2, 0.3)}.to_vector();
  const CameraExtrinsics ext = CameraExtrinsics::forward_looking();
  for (auto _ : state) benchmark::DoNotOptimize(rk4_step_linearized(x, u, 0.05, ext));
}
BENCHMARK(BM_Rk4Linearized);

static void BM_StageResidual(benchmark::State& state) {
  const Instance in = offset_instance(1);
  const StateVec x = in.x0.to_vector();
  const CostWeights w;
  const UnitQuaternion q_bc = CameraExtrinsics::forward_looking().q_bc;
  for (auto _ : state) benchmark::DoNotOptimize(linearize_stage_residual(x, in.refs.front(), w, q_bc));
}
BENCHMARK(BM_StageResidual);

static void BM_SolveQp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::MatrixXd l = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
  QpProblem qp;
  qp.H = l * l.transpose() + Eigen::MatrixXd::Identity(n, n);
  qp.g = Eigen::VectorXd::NullaryExpr(n, [&] { return 5.0 * g(rng); });
  qp.A = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
  qp.b = -Eigen::VectorXd::Ones(n);
  qp.lb = -Eigen::VectorXd::Ones(n);
  qp.ub = Eigen::VectorXd::Ones(n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp(qp));
}
BENCHMARK(BM_SolveQp)->Arg(40)->Arg(80)->Arg(160);

static void BM_OcpSolveCold(benchmark::State& state) {
  OcpParams p;
  p.N = static_cast<int>(state.range(0));
  const Instance in = offset_instance(p.N);
  const OcpProblem prob =
      build_problem(in.x0, in.refs, CostWeights{}, Bounds{}, CameraExtrinsics::forward_looking(), p);
  for (auto _ : state) benchmark::DoNotOptimize(solve(prob));
}
BENCHMARK(BM_OcpSolveCold)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_ControllerStepWarm(benchmark::State& state) {
  const Instance in = offset_instance(20);
  VisualPredictiveController ctrl(ControllerConfig{});
  ctrl.step(in.x0, in.refs);
  for (auto _ : state) benchmark::DoNotOptimize(ctrl.step(in.x0, in.refs));
}
BENCHMARK(BM_ControllerStepWarm)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
