#pragma once

#include <optional>
#include <vector>

#include "bvpc/costs.hpp"
#include "bvpc/dynamics.hpp"

namespace bvpc {

struct OcpParams {
  int N = 20;
  double dt = 0.05;
  int max_sqp_iters = 5;
  /// Step-size threshold (inf-norm of the input update) for convergence.
  double qp_tol = 1e-6;
  /// L1 weight on visibility slacks.
  double slack_weight = 1e3;

  bool is_valid() const { return N >= 1 && dt > 0.0 && max_sqp_iters >= 1 && qp_tol > 0.0 && slack_weight > 0.0; }
};

/// Validated multiple-shooting instance. `weights` already carries the
/// distance-scaled image weight.
struct OcpProblem {
  QuadVisualState x0;
  std::vector<ReferencePoint> refs;
  CostWeights weights;
  Bounds bounds;
  CameraExtrinsics extrinsics;
  OcpParams params;
};

enum class SolveStatus { Converged, MaxIters, Infeasible };

const char* to_string(SolveStatus s);

struct OcpSolution {
  std::vector<ControlInput> inputs;
  std::vector<QuadVisualState> states;
  /// Σ_k L(x_k)·dt over k = 0..N.
  double cost = 0.0;
  /// cost + slack_weight · Σ visibility violation.
  double merit = 0.0;
  double kkt = 0.0;
  /// Largest visibility slack max(0, -g) over the horizon.
  double max_slack = 0.0;
  int sqp_iters = 0;
  SolveStatus status = SolveStatus::MaxIters;
  /// Merit before the first and after every accepted iteration.
  std::vector<double> merit_history;
};

/// Throws BadReferenceLength or InvalidInitialState. Applies
/// dynamic_visual_weight once using x0.d.
OcpProblem build_problem(const QuadVisualState& x0, std::vector<ReferencePoint> refs, const CostWeights& weights,
                         const Bounds& bounds, const CameraExtrinsics& extrinsics, const OcpParams& params);

/// Gauss–Newton SQP on the multiple-shooting transcription. Inputs stay
/// inside their boxes; visibility is softened with L1 slacks.
OcpSolution solve(const OcpProblem& problem, const std::optional<OcpSolution>& warm = std::nullopt);

/// Drops the first input, repeats the last one and re-rolls the states from
/// prev.states[1].
OcpSolution shift_warm_start(const OcpSolution& prev, double dt, const CameraExtrinsics& ext);

/// max(shooting defects, projected-gradient stationarity) in inf-norm.
double kkt_residual(const OcpProblem& problem, const OcpSolution& solution);

/// Horizon objective and merit of an input sequence rolled out from x0.
struct RolloutEvaluation {
  std::vector<QuadVisualState> states;
  double cost = 0.0;
  double merit = 0.0;
  double max_violation = 0.0;
};
RolloutEvaluation evaluate_rollout(const OcpProblem& problem, const std::vector<ControlInput>& inputs);

struct ControllerConfig {
  CostWeights weights;
  Bounds bounds;
  CameraExtrinsics extrinsics = CameraExtrinsics::forward_looking();
  OcpParams params;
};

struct ControllerOutput {
  ControlInput input;
  OcpSolution solution;
  bool failsafe = false;
  double solve_ms = 0.0;
};

/// Receding-horizon controller. Owns the warm start, so one instance serves
/// one control loop.
class VisualPredictiveController {
 public:
  explicit VisualPredictiveController(ControllerConfig config);

  ControllerOutput step(const QuadVisualState& measurement, const std::vector<ReferencePoint>& refs);
  void reset();

  const ControllerConfig& config() const { return config_; }

 private:
  ControllerConfig config_;
  std::optional<OcpSolution> previous_;
};

}  // namespace bvpc
