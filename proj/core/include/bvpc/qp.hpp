#pragma once

#include <Eigen/Core>
#include <limits>

namespace bvpc {

/// Strictly convex dense QP
///
///   min ½ zᵀHz + gᵀz   s.t.   A z >= b,   lb <= z <= ub
///
/// Infinite entries of lb/ub are ignored. H must be symmetric positive definite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
};

enum class QpStatus { Optimal, Infeasible, NotPositiveDefinite, IterationLimit };

struct QpResult {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd z;
  /// Multipliers (>= 0) of the general rows A z >= b.
  Eigen::VectorXd lambda_rows;
  /// Multipliers of lb (>= 0) minus multipliers of ub; stationarity reads
  /// H z + g = Aᵀ lambda_rows + lambda_box.
  Eigen::VectorXd lambda_box;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Goldfarb–Idnani dual active-set method. Starts from the unconstrained
/// minimizer and adds the most violated constraint until primal feasibility,
/// keeping J = L⁻ᵀQ and R updated with Givens rotations.
QpResult solve_qp(const QpProblem& qp, double feasibility_tol = 1e-10, int max_iterations = 0);

}  // namespace bvpc
