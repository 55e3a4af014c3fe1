#pragma once

#include <Eigen/Dense>

#include <vector>

namespace elmap {

struct Solution;  // defined in qp.hpp

enum class ConstraintKind { via, endpoint, obstacle };

/// L1-ball constraint |y - x_j|_1 <= r + u on node j. The perturbation u
/// tightens (u < 0) or loosens (u > 0) the base radius r.
struct PointConstraint {
  Eigen::Index node_index = 0;
  Eigen::VectorXd anchor;       // y
  double radius = 0.0;          // r >= 0
  double perturbation = 0.0;    // u >= -r
  ConstraintKind kind = ConstraintKind::via;

  // Provenance for obstacle constraints: the demo node the anchor came from
  // and the closest obstacle point that set the radius.
  Eigen::VectorXd obstacle_point;

  double effective_radius() const { return radius + perturbation; }
};

using ConstraintSet = std::vector<PointConstraint>;

/// Obstacles as point clouds, convex or not. Each cloud stores one point per
/// row. Circles/polygons are handled by sampling their surface upstream.
class ObstacleSet {
public:
  ObstacleSet() = default;
  explicit ObstacleSet(std::vector<Eigen::MatrixXd> clouds);

  void add(Eigen::MatrixXd cloud);
  const std::vector<Eigen::MatrixXd>& clouds() const { return clouds_; }
  bool empty() const { return clouds_.empty(); }
  Eigen::Index total_points() const;

private:
  std::vector<Eigen::MatrixXd> clouds_;
};

struct ClosestPoint {
  Eigen::VectorXd point;  // b
  double distance = 0.0;  // |p - b|_1
  std::size_t obstacle_index = 0;
  Eigen::Index point_index = 0;
};

/// Constraint on node j anchored at y with base radius r (u = 0).
PointConstraint make_point_constraint(Eigen::Index j, const Eigen::VectorXd& y,
                                      double r, Eigen::Index n_nodes,
                                      ConstraintKind kind = ConstraintKind::via);

/// L1-closest obstacle point to p. Ties break toward the lowest
/// (obstacle index, point index).
ClosestPoint closest_obstacle_point(const Eigen::VectorXd& p, const ObstacleSet& obs);

/// One obstacle constraint per node: y = demo node j, r = L1 distance from
/// that node to its closest obstacle point. Throws if any node touches an
/// obstacle (the demonstrations are assumed to avoid them).
ConstraintSet generate_obstacle_constraints(const Eigen::MatrixXd& demo_nodes,
                                            const ObstacleSet& obs);

/// Set u = -sigma_s * r on every constraint, shrinking the effective radius
/// to (1 - sigma_s) r. All constraints must be obstacle kind.
ConstraintSet apply_confidence_factor(const ConstraintSet& cons, double sigma_s);

/// Drop constraints whose dual value is at most eps_prune and that are
/// strictly slack at the solution (violation margin below -slack_margin).
/// Removing such constraints provably leaves the optimum unchanged; a zero
/// dual on a grazing constraint is kept, since dropping it can still move
/// the re-solve by more than solver noise.
ConstraintSet prune_zero_dual(const ConstraintSet& cons, const Solution& sol,
                              double eps_prune, double slack_margin = 0.0);

/// Indices (into cons) that prune_zero_dual would drop.
std::vector<std::size_t> pruned_indices(const ConstraintSet& cons, const Solution& sol,
                                        double eps_prune, double slack_margin = 0.0);

}  // namespace elmap
