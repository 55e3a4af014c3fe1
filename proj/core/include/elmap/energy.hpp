#pragma once

#include <Eigen/Dense>

#include "elmap/trajectory.hpp"

namespace elmap {

/// Elastic-map coefficients. gamma is the data-weight normalization and is
/// usually computed from the demonstrations rather than set by hand.
struct ElasticParams {
  double alpha = 0.01;          // stretching constant, >= 0
  double beta = 0.1;            // bending constant, >= 0
  double gamma = 1.0;           // fit normalization, > 0
  Eigen::Index node_count = 100;  // N >= 3

  void validate() const;
};

/// Breakdown of the three elastic energies.
struct Energies {
  double fit = 0.0;      // U_X
  double stretch = 0.0;  // U_E
  double bend = 0.0;     // U_R
  double total() const { return fit + stretch + bend; }
};

/// Quadratic objective f0(x) = x'Qx - 2c'x + k0 where Q is block-diagonal
/// across dimensions with identical N x N blocks. We store the single block;
/// the full N*d x N*d matrix is I_d (kron) q_block under column stacking.
struct QuadraticObjective {
  Eigen::MatrixXd q_block;  // N x N, symmetric positive definite
  Eigen::MatrixXd c;        // N x d (c = gamma * target)
  double k0 = 0.0;

  Eigen::Index nodes() const { return q_block.rows(); }
  Eigen::Index dim() const { return c.cols(); }

  /// Objective value at the given N x d node matrix.
  double value(const Eigen::MatrixXd& x) const;
  /// Gradient 2(Qx - c), N x d.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& x) const;
  /// Dense N*d x N*d matrix, mostly for small cross-checks.
  Eigen::MatrixXd full_matrix() const;
};

/// Weighted mean of the index-matched resampled demonstrations, plus the
/// resulting fit normalization gamma = 1 / (sum of all data weights).
struct ClusterTarget {
  Eigen::MatrixXd target;  // N x d
  double gamma = 0.0;
};

/// First-difference (edge) matrix, (N-1) x N. Row i is -1 at i, +1 at i+1.
Eigen::MatrixXd build_edge_matrix(Eigen::Index n);

/// Second-difference (rib) matrix, (N-2) x N. Row i is +1, -2, +1.
Eigen::MatrixXd build_rib_matrix(Eigen::Index n);

ClusterTarget build_cluster_target(const DemonstrationSet& demos, Eigen::Index n);

/// U_X = gamma |x - target|^2, U_E = alpha |Ex|^2, U_R = beta |Rx|^2
/// (Frobenius norms over all dimensions). For n == 2 the bending term is zero.
Energies evaluate_energies(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                           const ElasticParams& params);

/// Q = gamma I + alpha E'E + beta R'R, c = gamma target, k0 = gamma |target|^2.
QuadraticObjective assemble_quadratic(const Eigen::MatrixXd& target,
                                      const ElasticParams& params);

/// Minimizer of the unconstrained objective: solves Qx = c per dimension.
/// Throws if Q is not positive definite (gamma == 0).
Eigen::MatrixXd solve_unconstrained(const QuadraticObjective& obj);

}  // namespace elmap
