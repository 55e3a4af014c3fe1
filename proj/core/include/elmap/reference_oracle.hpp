#pragma once

#include <Eigen/Dense>

#include "elmap/constraints.hpp"
#include "elmap/energy.hpp"

namespace elmap {

struct OracleResult {
  Eigen::MatrixXd nodes;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Slow, independent check on the main solver: fixed-step projected gradient
/// descent with exact L1-ball projections applied constraint by constraint.
/// Shares no linear algebra with the interior-point path.
///
/// Sequential projection onto several overlapping balls is only approximate;
/// comparisons against the main solver should stick to instances where at
/// most one constraint is active at the oracle's answer.
OracleResult oracle_solve(const QuadraticObjective& obj, const ConstraintSet& cons,
                          double step = 0.0, int max_iter = 200000);

/// Euclidean projection of p onto the L1 ball of radius rho around center
/// (soft-threshold search, the standard simplex-projection reduction).
Eigen::VectorXd l1_ball_project(const Eigen::VectorXd& p, const Eigen::VectorXd& center,
                                double rho);

}  // namespace elmap
