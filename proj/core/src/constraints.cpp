#include "elmap/constraints.hpp"

#include <stdexcept>
#include <utility>

#include "elmap/qp.hpp"
#include "elmap/trajectory.hpp"

namespace elmap {

ObstacleSet::ObstacleSet(std::vector<Eigen::MatrixXd> clouds) {
  for (Eigen::MatrixXd& c : clouds) {
    add(std::move(c));
  }
}

void ObstacleSet::add(Eigen::MatrixXd cloud) {
  if (cloud.rows() == 0) {
    throw std::invalid_argument("obstacle cloud must be nonempty");
  }
  if (!clouds_.empty() && cloud.cols() != clouds_.front().cols()) {
    throw std::invalid_argument("obstacle clouds must share one dimension");
  }
  clouds_.push_back(std::move(cloud));
}

Eigen::Index ObstacleSet::total_points() const {
  Eigen::Index n = 0;
  for (const Eigen::MatrixXd& c : clouds_) {
    n += c.rows();
  }
  return n;
}

PointConstraint make_point_constraint(Eigen::Index j, const Eigen::VectorXd& y,
                                      double r, Eigen::Index n_nodes,
                                      ConstraintKind kind) {
  if (j < 0 || j >= n_nodes) {
    throw std::invalid_argument("constraint node index out of range");
  }
  if (r < 0.0) {
    throw std::invalid_argument("constraint radius must be nonnegative");
  }
  PointConstraint c;
  c.node_index = j;
  c.anchor = y;
  c.radius = r;
  c.kind = kind;
  return c;
}

ClosestPoint closest_obstacle_point(const Eigen::VectorXd& p, const ObstacleSet& obs) {
  if (obs.empty()) {
    throw std::invalid_argument("obstacle set is empty");
  }
  ClosestPoint best;
  bool first = true;
  for (std::size_t ci = 0; ci < obs.clouds().size(); ++ci) {
    const Eigen::MatrixXd& cloud = obs.clouds()[ci];
    for (Eigen::Index pi = 0; pi < cloud.rows(); ++pi) {
      const double dist = (cloud.row(pi).transpose() - p).cwiseAbs().sum();
      if (first || dist < best.distance) {
        best.point = cloud.row(pi).transpose();
        best.distance = dist;
        best.obstacle_index = ci;
        best.point_index = pi;
        first = false;
      }
    }
  }
  return best;
}

ConstraintSet generate_obstacle_constraints(const Eigen::MatrixXd& demo_nodes,
                                            const ObstacleSet& obs) {
  const Eigen::Index n = demo_nodes.rows();
  ConstraintSet cons;
  cons.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd zeta = demo_nodes.row(j).transpose();
    const ClosestPoint cp = closest_obstacle_point(zeta, obs);
    if (cp.distance == 0.0) {
      throw std::runtime_error(
          "demonstration touches an obstacle at node " + std::to_string(j) +
          "; obstacle constraints assume the demonstrations avoided it");
    }
    PointConstraint c = make_point_constraint(j, zeta, cp.distance, n,
                                              ConstraintKind::obstacle);
    c.obstacle_point = cp.point;
    cons.push_back(std::move(c));
  }
  return cons;
}

ConstraintSet apply_confidence_factor(const ConstraintSet& cons, double sigma_s) {
  if (!(sigma_s >= 0.0 && sigma_s <= 1.0)) {
    throw std::invalid_argument("confidence factor must lie in [0, 1]");
  }
  ConstraintSet out = cons;
  for (PointConstraint& c : out) {
    if (c.kind != ConstraintKind::obstacle) {
      throw std::invalid_argument(
          "confidence factor applies to obstacle constraints only");
    }
    c.perturbation = -sigma_s * c.radius;
  }
  return out;
}

namespace {

bool prunable(const PointConstraint& c, const Solution& sol, double lambda,
              double eps_prune, double slack_margin) {
  if (lambda > eps_prune) {
    return false;
  }
  const double f =
      l1_distance(c.anchor, sol.nodes.row(c.node_index).transpose()) -
      c.effective_radius();
  return f < -slack_margin;
}

}  // namespace

std::vector<std::size_t> pruned_indices(const ConstraintSet& cons, const Solution& sol,
                                        double eps_prune, double slack_margin) {
  if (sol.lambda.size() != cons.size()) {
    throw std::invalid_argument("solution duals do not match constraint set");
  }
  std::vector<std::size_t> dropped;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (prunable(cons[i], sol, sol.lambda[i], eps_prune, slack_margin)) {
      dropped.push_back(i);
    }
  }
  return dropped;
}

ConstraintSet prune_zero_dual(const ConstraintSet& cons, const Solution& sol,
                              double eps_prune, double slack_margin) {
  if (sol.lambda.size() != cons.size()) {
    throw std::invalid_argument("solution duals do not match constraint set");
  }
  ConstraintSet kept;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (!prunable(cons[i], sol, sol.lambda[i], eps_prune, slack_margin)) {
      kept.push_back(cons[i]);
    }
  }
  return kept;
}

}  // namespace elmap
