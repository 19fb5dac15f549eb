#include "bvpc/ocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "bvpc/errors.hpp"
#include "bvpc/qp.hpp"

namespace bvpc {

namespace {

constexpr double kSlackRegularization = 1e-6;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 10;

struct FlatRollout {
  std::vector<StateVec> states;
  double cost = 0.0;
  double violation = 0.0;
  double max_violation = 0.0;
  double merit = 0.0;
};

double stage_cost(const StateVec& x, const ReferencePoint& ref, const OcpProblem& p) {
  return kernel::stage_residual<double>(x, ref, p.weights, p.extrinsics.q_bc).squaredNorm() * p.params.dt;
}

FlatRollout rollout(const OcpProblem& p, const std::vector<InputVec>& u) {
  const int n = p.params.N;
  FlatRollout out;
  out.states.resize(static_cast<std::size_t>(n + 1));
  out.states[0] = p.x0.to_vector();
  for (int k = 0; k < n; ++k) {
    out.states[static_cast<std::size_t>(k + 1)] =
        rk4_step_flat(out.states[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k)], p.params.dt, p.extrinsics);
  }
  for (int k = 0; k <= n; ++k) {
    const StateVec& x = out.states[static_cast<std::size_t>(k)];
    out.cost += stage_cost(x, p.refs[static_cast<std::size_t>(k)], p);
    if (k > 0) {
      const Eigen::Vector4d g = kernel::visibility<double>(x, p.bounds);
      for (int i = 0; i < 4; ++i) {
        const double v = std::max(0.0, -g(i));
        out.violation += v;
        out.max_violation = std::max(out.max_violation, v);
      }
    }
  }
  out.merit = out.cost + p.params.slack_weight * out.violation;
  return out;
}

InputVec clamp_flat(const InputVec& u, const Bounds& b) {
  return u.cwiseMax(b.input_lower()).cwiseMin(b.input_upper());
}

std::vector<QuadVisualState> to_states(const std::vector<StateVec>& xs) {
  std::vector<QuadVisualState> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(QuadVisualState::from_vector(x));
  return out;
}

bool finite(const FlatRollout& r) {
  if (!std::isfinite(r.merit)) return false;
  return std::all_of(r.states.begin(), r.states.end(), [](const StateVec& x) { return x.allFinite(); });
}

/// Condensed Gauss–Newton QP around a consistent rollout.
QpProblem build_qp(const OcpProblem& p, const std::vector<InputVec>& u, const FlatRollout& roll, double* viol0) {
  const int n = p.params.N;
  const int nu = kInputDim * n;
  const int ns = 4 * n;
  const double dt = p.params.dt;
  const double w = p.params.slack_weight;

  Eigen::MatrixXd hu = Eigen::MatrixXd::Zero(nu, nu);
  Eigen::VectorXd gu = Eigen::VectorXd::Zero(nu);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ns, nu + ns);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ns);
  *viol0 = 0.0;

  // G holds ∂x_k/∂(u_0..u_{k-1}); only the first 4k columns are nonzero.
  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(kStateDim, nu);
  for (int k = 0; k <= n; ++k) {
    const StateVec& x = roll.states[static_cast<std::size_t>(k)];
    const int cols = kInputDim * k;
    if (k > 0) {
      const ResidualLinearization lin =
          linearize_stage_residual(x, p.refs[static_cast<std::size_t>(k)], p.weights, p.extrinsics.q_bc);
      const Eigen::MatrixXd m = lin.J * sens.leftCols(cols);
      hu.topLeftCorner(cols, cols).noalias() += 2.0 * dt * m.transpose() * m;
      gu.head(cols).noalias() += 2.0 * dt * m.transpose() * lin.r;

      const VisibilityLinearization vis = linearize_visibility(x, p.bounds);
      const int row = 4 * (k - 1);
      a.block(row, 0, 4, cols) = vis.J * sens.leftCols(cols);
      a.block(row, nu + row, 4, 4).setIdentity();
      b.segment<4>(row) = -vis.g;
      *viol0 += vis.g.cwiseMin(0.0).cwiseAbs().sum();
    }
    if (k < n) {
      const DiscreteStep step = rk4_step_linearized(x, u[static_cast<std::size_t>(k)], dt, p.extrinsics);
      Eigen::MatrixXd next = Eigen::MatrixXd::Zero(kStateDim, nu);
      next.leftCols(cols) = step.A * sens.leftCols(cols);
      next.block(0, cols, kStateDim, kInputDim) = step.B;
      sens = std::move(next);
    }
  }

  const double scale = std::max(1.0, hu.diagonal().maxCoeff());
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(nu + ns, nu + ns);
  qp.H.topLeftCorner(nu, nu) = hu;
  qp.H.topLeftCorner(nu, nu).diagonal().array() += 1e-8 * scale;
  qp.H.bottomRightCorner(ns, ns).diagonal().setConstant(kSlackRegularization);
  qp.g = Eigen::VectorXd::Zero(nu + ns);
  qp.g.head(nu) = gu;
  qp.g.tail(ns).setConstant(w);
  qp.A = std::move(a);
  qp.b = std::move(b);
  qp.lb.resize(nu + ns);
  qp.ub.resize(nu + ns);
  const InputVec lo = p.bounds.input_lower();
  const InputVec hi = p.bounds.input_upper();
  for (int k = 0; k < n; ++k) {
    qp.lb.segment<kInputDim>(kInputDim * k) = lo - u[static_cast<std::size_t>(k)];
    qp.ub.segment<kInputDim>(kInputDim * k) = hi - u[static_cast<std::size_t>(k)];
  }
  qp.lb.tail(ns).setZero();
  qp.ub.tail(ns).setConstant(std::numeric_limits<double>::infinity());
  return qp;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIters:
      return "max_iters";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

OcpProblem build_problem(const QuadVisualState& x0, std::vector<ReferencePoint> refs, const CostWeights& weights,
                         const Bounds& bounds, const CameraExtrinsics& extrinsics, const OcpParams& params) {
  if (!params.is_valid()) throw std::invalid_argument("build_problem: invalid OcpParams");
  if (refs.size() != static_cast<std::size_t>(params.N + 1)) {
    throw BadReferenceLength("build_problem: expected " + std::to_string(params.N + 1) + " references, got " +
                             std::to_string(refs.size()));
  }
  if (!x0.is_valid()) throw InvalidInitialState("build_problem: initial state violates d > 0 or unit quaternions");
  if (!weights.is_valid()) throw std::invalid_argument("build_problem: negative cost weight");
  if (!bounds.is_valid()) throw std::invalid_argument("build_problem: inconsistent bounds");
  OcpProblem p{x0, std::move(refs), weights, bounds, extrinsics, params};
  p.weights.q_s = dynamic_visual_weight(x0.d, weights.q_s);
  return p;
}

RolloutEvaluation evaluate_rollout(const OcpProblem& problem, const std::vector<ControlInput>& inputs) {
  std::vector<InputVec> u;
  u.reserve(inputs.size());
  for (const auto& in : inputs) u.push_back(in.to_vector());
  const FlatRollout r = rollout(problem, u);
  return {to_states(r.states), r.cost, r.merit, r.max_violation};
}

OcpSolution solve(const OcpProblem& problem, const std::optional<OcpSolution>& warm) {
  const OcpParams& prm = problem.params;
  const int n = prm.N;
  std::vector<InputVec> u(static_cast<std::size_t>(n), ControlInput::hover().to_vector());
  if (warm && warm->inputs.size() == static_cast<std::size_t>(n)) {
    for (int k = 0; k < n; ++k) u[static_cast<std::size_t>(k)] = warm->inputs[static_cast<std::size_t>(k)].to_vector();
  }
  for (auto& uk : u) uk = clamp_flat(uk, problem.bounds);

  OcpSolution sol;
  FlatRollout roll = rollout(problem, u);
  sol.merit_history.push_back(roll.merit);
  sol.status = SolveStatus::MaxIters;

  if (!finite(roll)) {
    sol.status = SolveStatus::Infeasible;
  } else {
    for (int it = 1; it <= prm.max_sqp_iters; ++it) {
      double viol0 = 0.0;
      const QpProblem qp = build_qp(problem, u, roll, &viol0);
      const QpResult qr = solve_qp(qp);
      sol.sqp_iters = it;
      if (qr.status != QpStatus::Optimal) break;

      const int nu = kInputDim * n;
      const Eigen::VectorXd du = qr.z.head(nu);
      const Eigen::VectorXd slack = qr.z.tail(4 * n);
      const Eigen::MatrixXd hu = qp.H.topLeftCorner(nu, nu);
      const double predicted =
          0.5 * du.dot(hu * du) + qp.g.head(nu).dot(du) + prm.slack_weight * (slack.sum() - viol0);
      if (du.lpNorm<Eigen::Infinity>() < prm.qp_tol || predicted > -1e-12 * (1.0 + std::abs(roll.merit))) {
        sol.status = SolveStatus::Converged;
        break;
      }

      bool accepted = false;
      double alpha = 1.0;
      for (int bt = 0; bt <= kMaxBacktracks; ++bt, alpha *= 0.5) {
        std::vector<InputVec> trial(u.size());
        for (int k = 0; k < n; ++k) {
          trial[static_cast<std::size_t>(k)] =
              clamp_flat(u[static_cast<std::size_t>(k)] + alpha * du.segment<kInputDim>(kInputDim * k), problem.bounds);
        }
        FlatRollout cand = rollout(problem, trial);
        if (finite(cand) && cand.merit <= roll.merit + kArmijo * alpha * predicted) {
          u = std::move(trial);
          roll = std::move(cand);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      sol.merit_history.push_back(roll.merit);
      if (alpha * du.lpNorm<Eigen::Infinity>() < prm.qp_tol) {
        sol.status = SolveStatus::Converged;
        break;
      }
    }
  }

  sol.inputs.reserve(u.size());
  for (const auto& uk : u) sol.inputs.push_back(ControlInput::from_vector(uk));
  if (finite(roll)) {
    sol.states = to_states(roll.states);
    sol.cost = roll.cost;
    sol.merit = roll.merit;
    sol.max_slack = roll.max_violation;
    sol.kkt = kkt_residual(problem, sol);
  } else {
    sol.status = SolveStatus::Infeasible;
    sol.states.assign(static_cast<std::size_t>(n + 1), problem.x0);
    sol.cost = sol.merit = std::numeric_limits<double>::infinity();
    sol.kkt = std::numeric_limits<double>::infinity();
  }
  return sol;
}

OcpSolution shift_warm_start(const OcpSolution& prev, double dt, const CameraExtrinsics& ext) {
  OcpSolution out = prev;
  const std::size_t n = prev.inputs.size();
  if (n < 2 || prev.states.size() < 2) return out;
  for (std::size_t k = 0; k + 1 < n; ++k) out.inputs[k] = prev.inputs[k + 1];
  out.inputs[n - 1] = prev.inputs[n - 1];
  out.states.assign(n + 1, prev.states[1]);
  for (std::size_t k = 0; k < n; ++k) out.states[k + 1] = rk4_step(out.states[k], out.inputs[k], dt, ext);
  out.merit_history.clear();
  out.sqp_iters = 0;
  return out;
}

double kkt_residual(const OcpProblem& problem, const OcpSolution& solution) {
  const int n = problem.params.N;
  const double dt = problem.params.dt;
  const double w = problem.params.slack_weight;
  if (solution.states.size() != static_cast<std::size_t>(n + 1) ||
      solution.inputs.size() != static_cast<std::size_t>(n)) {
    return std::numeric_limits<double>::infinity();
  }
  std::vector<StateVec> xs;
  xs.reserve(solution.states.size());
  for (const auto& s : solution.states) xs.push_back(s.to_vector());

  double defect = (xs[0] - problem.x0.to_vector()).lpNorm<Eigen::Infinity>();
  std::vector<DiscreteStep> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    steps.push_back(rk4_step_linearized(xs[kk], solution.inputs[kk].to_vector(), dt, problem.extrinsics));
    defect = std::max(defect, (xs[kk + 1] - steps.back().next).lpNorm<Eigen::Infinity>());
  }

  const auto stage_gradient = [&](int k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const ResidualLinearization lin =
        linearize_stage_residual(xs[kk], problem.refs[kk], problem.weights, problem.extrinsics.q_bc);
    StateVec grad = 2.0 * dt * lin.J.transpose() * lin.r;
    if (k > 0) {
      const VisibilityLinearization vis = linearize_visibility(xs[kk], problem.bounds);
      for (int i = 0; i < 4; ++i) {
        if (vis.g(i) < 0.0) grad -= w * vis.J.row(i).transpose();
      }
    }
    return grad;
  };

  double stationarity = 0.0;
  StateVec lambda = stage_gradient(n);
  const InputVec lo = problem.bounds.input_lower();
  const InputVec hi = problem.bounds.input_upper();
  for (int k = n - 1; k >= 0; --k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const InputVec grad_u = steps[kk].B.transpose() * lambda;
    const InputVec uk = solution.inputs[kk].to_vector();
    const InputVec projected = (uk - grad_u).cwiseMax(lo).cwiseMin(hi) - uk;
    stationarity = std::max(stationarity, projected.lpNorm<Eigen::Infinity>());
    lambda = stage_gradient(k) + steps[kk].A.transpose() * lambda;
  }
  return std::max(defect, stationarity);
}

VisualPredictiveController::VisualPredictiveController(ControllerConfig config) : config_(std::move(config)) {}

void VisualPredictiveController::reset() { previous_.reset(); }

ControllerOutput VisualPredictiveController::step(const QuadVisualState& measurement,
                                                  const std::vector<ReferencePoint>& refs) {
  const auto t0 = std::chrono::steady_clock::now();
  const OcpProblem problem =
      build_problem(measurement, refs, config_.weights, config_.bounds, config_.extrinsics, config_.params);
  std::optional<OcpSolution> warm;
  if (previous_) warm = shift_warm_start(*previous_, config_.params.dt, config_.extrinsics);

  ControllerOutput out;
  out.solution = solve(problem, warm);
  if (out.solution.status == SolveStatus::Infeasible) {
    out.failsafe = true;
    if (previous_ && previous_->inputs.size() >= 2) {
      out.input = clamp_input(previous_->inputs[1], config_.bounds);
      previous_ = warm;
    } else {
      out.input = clamp_input(ControlInput::hover(), config_.bounds);
      previous_.reset();
    }
  } else {
    out.input = clamp_input(out.solution.inputs.front(), config_.bounds);
    previous_ = out.solution;
  }
  out.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace bvpc
