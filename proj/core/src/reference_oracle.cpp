#include "elmap/reference_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace elmap {

Eigen::VectorXd l1_ball_project(const Eigen::VectorXd& p, const Eigen::VectorXd& center,
                                double rho) {
  if (rho < 0.0) {
    throw std::invalid_argument("l1_ball_project: rho must be nonnegative");
  }
  if (p.size() != center.size()) {
    throw std::invalid_argument("l1_ball_project: dimension mismatch");
  }
  const Eigen::VectorXd v = p - center;
  Eigen::VectorXd a = v.cwiseAbs();
  if (a.sum() <= rho) {
    return p;
  }
  // Soft-threshold tau so that sum(max(|v_i| - tau, 0)) = rho.
  std::vector<double> sorted(a.data(), a.data() + a.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumsum += sorted[k];
    const double candidate = (cumsum - rho) / static_cast<double>(k + 1);
    if (k + 1 == sorted.size() || sorted[k + 1] <= candidate) {
      tau = candidate;
      break;
    }
  }
  Eigen::VectorXd q(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double mag = std::max(a(i) - tau, 0.0);
    q(i) = center(i) + (v(i) >= 0.0 ? mag : -mag);
  }
  return q;
}

namespace {

double power_iteration_lambda_max(const Eigen::MatrixXd& q) {
  // Generic start vector: a constant start can be near-orthogonal to the
  // dominant (high-frequency) eigenvector of the difference penalties.
  Eigen::VectorXd v(q.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = std::sin(1.7 * static_cast<double>(i) + 0.3) + 0.1;
  }
  v.normalize();
  double lam = 1.0;
  for (int it = 0; it < 50; ++it) {
    v = q * v;
    lam = v.norm();
    if (lam == 0.0) {
      return 1.0;
    }
    v /= lam;
  }
  return lam;
}

}  // namespace

OracleResult oracle_solve(const QuadraticObjective& obj, const ConstraintSet& cons,
                          double step, int max_iter) {
  const Eigen::Index n = obj.nodes();
  const Eigen::Index d = obj.dim();
  for (const PointConstraint& c : cons) {
    if (c.node_index < 0 || c.node_index >= n || c.anchor.size() != d) {
      throw std::invalid_argument("oracle_solve: bad constraint");
    }
  }
  if (step <= 0.0) {
    step = 0.9 / power_iteration_lambda_max(obj.q_block);
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d);
  OracleResult out;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = x - step * obj.gradient(x);
    for (const PointConstraint& c : cons) {
      const double rho = std::max(c.effective_radius(), 0.0);
      next.row(c.node_index) =
          l1_ball_project(next.row(c.node_index).transpose(), c.anchor, rho)
              .transpose();
    }
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = next;
    out.iterations = it + 1;
    if (!std::isfinite(change)) {
      out.converged = false;
      break;
    }
    if (change <= 1e-10) {
      out.converged = true;
      break;
    }
  }
  out.nodes = x;
  out.objective = obj.value(x);
  return out;
}

}  // namespace elmap
