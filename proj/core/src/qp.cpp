#include "bvpc/qp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

namespace bvpc {

namespace {

/// Constraint index space: [0, m) general rows, [m, m+n) lower bounds,
/// [m+n, m+2n) upper bounds.
class ConstraintSet {
 public:
  explicit ConstraintSet(const QpProblem& qp) : qp_(qp), m_(static_cast<int>(qp.b.size())), n_(static_cast<int>(qp.g.size())) {}

  int total() const { return m_ + 2 * n_; }
  bool enabled(int i) const {
    if (i < m_) return true;
    if (i < m_ + n_) return std::isfinite(qp_.lb(i - m_));
    return std::isfinite(qp_.ub(i - m_ - n_));
  }
  double slack(int i, const Eigen::VectorXd& z) const {
    if (i < m_) return qp_.A.row(i).dot(z) - qp_.b(i);
    if (i < m_ + n_) return z(i - m_) - qp_.lb(i - m_);
    return qp_.ub(i - m_ - n_) - z(i - m_ - n_);
  }
  double rhs_scale(int i) const {
    if (i < m_) return 1.0 + std::abs(qp_.b(i));
    if (i < m_ + n_) return 1.0 + std::abs(qp_.lb(i - m_));
    return 1.0 + std::abs(qp_.ub(i - m_ - n_));
  }
  Eigen::VectorXd normal(int i) const {
    if (i < m_) return qp_.A.row(i).transpose();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    if (i < m_ + n_) {
      e(i - m_) = 1.0;
    } else {
      e(i - m_ - n_) = -1.0;
    }
    return e;
  }
  /// Jᵀ n_i without forming n_i for bound constraints.
  Eigen::VectorXd project(int i, const Eigen::MatrixXd& J) const {
    if (i < m_) return J.transpose() * qp_.A.row(i).transpose();
    if (i < m_ + n_) return J.row(i - m_).transpose();
    return -J.row(i - m_ - n_).transpose();
  }

 private:
  const QpProblem& qp_;
  int m_;
  int n_;
};

struct Givens {
  double c;
  double s;
  double h;
};

Givens make_givens(double a, double b) {
  const double h = std::hypot(a, b);
  if (h == 0.0) return {1.0, 0.0, 0.0};
  return {a / h, b / h, h};
}

void rotate_columns(Eigen::MatrixXd& m, int i, int j, const Givens& g) {
  const Eigen::VectorXd ci = m.col(i);
  m.col(i) = g.c * ci + g.s * m.col(j);
  m.col(j) = -g.s * ci + g.c * m.col(j);
}

class ActiveSet {
 public:
  ActiveSet(int n, Eigen::MatrixXd j) : n_(n), J(std::move(j)), R(Eigen::MatrixXd::Zero(n, n)) {}

  int size() const { return static_cast<int>(index.size()); }

  /// Appends the constraint whose projected normal is d = Jᵀn.
  bool add(int constraint, Eigen::VectorXd d, double multiplier) {
    const int iq = size();
    for (int j = n_ - 1; j >= iq + 1; --j) {
      const Givens g = make_givens(d(j - 1), d(j));
      if (g.h == 0.0) continue;
      d(j - 1) = g.h;
      d(j) = 0.0;
      rotate_columns(J, j - 1, j, g);
    }
    if (std::abs(d(iq)) <= 1e-14 * (1.0 + r_norm_)) return false;
    R.col(iq).head(iq + 1) = d.head(iq + 1);
    r_norm_ = std::max(r_norm_, std::abs(d(iq)));
    index.push_back(constraint);
    u.push_back(multiplier);
    return true;
  }

  void drop(int l) {
    const int iq = size();
    index.erase(index.begin() + l);
    u.erase(u.begin() + l);
    for (int j = l; j < iq - 1; ++j) R.col(j) = R.col(j + 1);
    R.col(iq - 1).setZero();
    const int iq_new = iq - 1;
    for (int j = l; j < iq_new; ++j) {
      const Givens g = make_givens(R(j, j), R(j + 1, j));
      if (g.h == 0.0) continue;
      for (int k = j; k < iq_new; ++k) {
        const double a = R(j, k);
        const double b = R(j + 1, k);
        R(j, k) = g.c * a + g.s * b;
        R(j + 1, k) = -g.s * a + g.c * b;
      }
      R(j + 1, j) = 0.0;
      rotate_columns(J, j, j + 1, g);
    }
  }

  int n_;
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  std::vector<int> index;
  std::vector<double> u;
  double r_norm_ = 1.0;
};

}  // namespace

QpResult solve_qp(const QpProblem& qp, double feasibility_tol, int max_iterations) {
  const int n = static_cast<int>(qp.g.size());
  QpResult res;
  const Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    res.status = QpStatus::NotPositiveDefinite;
    return res;
  }
  const ConstraintSet cs(qp);
  if (max_iterations <= 0) max_iterations = 20 * (n + cs.total()) + 100;

  // J = L⁻ᵀ, so Jᵀ H J = I.
  Eigen::MatrixXd J = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  ActiveSet act(n, std::move(J));
  Eigen::VectorXd z = -llt.solve(qp.g);
  std::vector<char> is_active(static_cast<std::size_t>(cs.total()), 0);

  int iter = 0;
  res.status = QpStatus::Optimal;
  while (true) {
    if (++iter > max_iterations) {
      res.status = QpStatus::IterationLimit;
      break;
    }
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < cs.total(); ++i) {
      if (is_active[static_cast<std::size_t>(i)] || !cs.enabled(i)) continue;
      const double s = cs.slack(i, z) / cs.rhs_scale(i);
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0 || worst >= -feasibility_tol) break;

    const Eigen::VectorXd np = cs.normal(p);
    double s_p = cs.slack(p, z);
    double u_p = 0.0;
    bool added = false;
    bool failed = false;
    while (!added) {
      if (++iter > max_iterations) {
        failed = true;
        res.status = QpStatus::IterationLimit;
        break;
      }
      const int iq = act.size();
      const Eigen::VectorXd d = cs.project(p, act.J);
      const Eigen::VectorXd dz = d.tail(n - iq);
      const Eigen::VectorXd step = act.J.rightCols(n - iq) * dz;
      Eigen::VectorXd r;
      if (iq > 0) {
        r = act.R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
      }

      double t1 = std::numeric_limits<double>::infinity();
      int l = -1;
      for (int j = 0; j < iq; ++j) {
        if (r(j) > 0.0) {
          const double ratio = act.u[static_cast<std::size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            l = j;
          }
        }
      }
      const double curvature = dz.squaredNorm();
      const bool has_primal_step = curvature > 1e-24 * std::max(1.0, d.squaredNorm());
      const double t2 = has_primal_step ? -s_p / step.dot(np) : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        failed = true;
        res.status = QpStatus::Infeasible;
        break;
      }
      if (!has_primal_step) {
        for (int j = 0; j < iq; ++j) act.u[static_cast<std::size_t>(j)] -= t * r(j);
        u_p += t;
        is_active[static_cast<std::size_t>(act.index[static_cast<std::size_t>(l)])] = 0;
        act.drop(l);
        continue;
      }
      z += t * step;
      for (int j = 0; j < iq; ++j) act.u[static_cast<std::size_t>(j)] -= t * r(j);
      u_p += t;
      if (t2 <= t1) {
        if (!act.add(p, d, u_p)) {
          failed = true;
          res.status = QpStatus::Infeasible;
          break;
        }
        is_active[static_cast<std::size_t>(p)] = 1;
        added = true;
      } else {
        is_active[static_cast<std::size_t>(act.index[static_cast<std::size_t>(l)])] = 0;
        act.drop(l);
        s_p = cs.slack(p, z);
      }
    }
    if (failed) break;
  }

  const int m = static_cast<int>(qp.b.size());
  res.z = z;
  res.iterations = iter;
  res.lambda_rows = Eigen::VectorXd::Zero(m);
  res.lambda_box = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < act.size(); ++j) {
    const int i = act.index[static_cast<std::size_t>(j)];
    const double mult = act.u[static_cast<std::size_t>(j)];
    if (i < m) {
      res.lambda_rows(i) = mult;
    } else if (i < m + n) {
      res.lambda_box(i - m) += mult;
    } else {
      res.lambda_box(i - m - n) -= mult;
    }
  }
  res.objective = 0.5 * z.dot(qp.H * z) + qp.g.dot(z);
  return res;
}

}  // namespace bvpc
