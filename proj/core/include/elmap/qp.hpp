#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "elmap/constraints.hpp"
#include "elmap/energy.hpp"

namespace elmap {

struct SolverTolerances {
  double kkt = 1e-8;         // stationarity residual
  double feas = 1e-8;        // primal feasibility violation
  double comp_slack = 1e-8;  // complementary slackness
  double gap_rel = 1e-6;     // relative duality gap
  double scale = 1.0;        // problem length scale (demo bounding-box diagonal)
  int max_iter = 100;
};

/// Linear inequality system A z <= b over the decision vector
/// z = [vec(x); auxiliary variables], where vec(x) stacks node coordinates
/// dimension-major: x_{j,k} sits at index k*N + j.
class LinearConstraintSystem {
public:
  static constexpr Eigen::Index kAuxiliary = -1;

  struct Row {
    std::vector<std::pair<Eigen::Index, double>> terms;
    double rhs = 0.0;
    Eigen::Index origin = kAuxiliary;  // originating high-level constraint id
    bool radius_row = false;           // carries the constraint's dual value
  };

  // Bookkeeping for one reformulated L1 constraint, used for dual repair.
  struct L1Block {
    Eigen::Index constraint_id = 0;
    Eigen::Index aux_start = 0;                 // first of dim auxiliaries
    std::vector<Eigen::Index> plus_rows;        //  (y - x) <= s, one per coord
    std::vector<Eigen::Index> minus_rows;       // -(y - x) <= s, one per coord
    Eigen::Index radius_row = 0;                // sum(s) <= rho
  };

  LinearConstraintSystem(Eigen::Index n_nodes, Eigen::Index dim);

  Eigen::Index nodes() const { return n_nodes_; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index primary_vars() const { return n_nodes_ * dim_; }
  Eigen::Index aux_vars() const { return aux_vars_; }
  Eigen::Index total_vars() const { return primary_vars() + aux_vars_; }
  Eigen::Index row_count() const { return static_cast<Eigen::Index>(rows_.size()); }

  Eigen::Index variable_index(Eigen::Index node, Eigen::Index coord) const {
    return coord * n_nodes_ + node;
  }

  Eigen::Index add_aux_variable();
  Eigen::Index add_row(Row row);
  /// Registers a high-level constraint; rows reference it via Row::origin.
  Eigen::Index register_constraint();

  const std::vector<Row>& rows() const { return rows_; }
  Eigen::Index constraint_count() const { return constraint_count_; }
  const std::vector<L1Block>& l1_blocks() const { return l1_blocks_; }
  void add_l1_block(L1Block block) { l1_blocks_.push_back(std::move(block)); }

  /// Row index carrying constraint i's dual value, or -1 if none.
  Eigen::Index radius_row_of(Eigen::Index constraint_id) const;

  /// Constraints whose effective radius was clamped up to the minimum.
  const std::vector<Eigen::Index>& clamped_constraints() const { return clamped_; }
  void mark_clamped(Eigen::Index constraint_id) { clamped_.push_back(constraint_id); }

  bool degenerate() const { return degenerate_; }
  void mark_degenerate() { degenerate_ = true; }

  Eigen::VectorXd apply(const Eigen::VectorXd& z) const;             // A z
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;   // A' y
  Eigen::MatrixXd dense_matrix() const;
  Eigen::VectorXd rhs() const;

private:
  Eigen::Index n_nodes_;
  Eigen::Index dim_;
  Eigen::Index aux_vars_ = 0;
  Eigen::Index constraint_count_ = 0;
  std::vector<Row> rows_;
  std::vector<L1Block> l1_blocks_;
  std::vector<Eigen::Index> clamped_;
  bool degenerate_ = false;
};

enum class SolveStatus { solved, infeasible, max_iter };

struct Solution {
  Eigen::MatrixXd nodes;        // x*, N x d
  double p_star = 0.0;
  double d_star = 0.0;
  double gap = 0.0;             // |p_star - d_star|
  std::vector<double> lambda;   // one dual per high-level constraint
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;

  // Internals exposed for certification and diagnostics.
  Eigen::VectorXd row_duals;    // multiplier per system row
  Eigen::VectorXd aux;          // auxiliary variables at the optimum
  Eigen::VectorXd certificate;  // Farkas dual (lam >= 0, A'lam = 0, b'lam < 0)
  bool degenerate = false;
};

struct KktReport {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double slackness = 0.0;
  double gap_abs = 0.0;
  double gap_rel = 0.0;

  /// Tolerances are stated for unit-scaled problems; residuals scale with the
  /// problem's length scale (slackness quadratically).
  bool within(const SolverTolerances& tol) const;
};

/// Raised by pipeline-level solves on an infeasible constraint set.
class InfeasibleError : public std::runtime_error {
public:
  InfeasibleError(const std::string& what, std::vector<Eigen::Index> conflicting,
                  Eigen::VectorXd certificate)
      : std::runtime_error(what),
        conflicting_(std::move(conflicting)),
        certificate_(std::move(certificate)) {}

  const std::vector<Eigen::Index>& conflicting_constraints() const { return conflicting_; }
  const Eigen::VectorXd& certificate() const { return certificate_; }

private:
  std::vector<Eigen::Index> conflicting_;
  Eigen::VectorXd certificate_;
};

/// Epigraph reformulation of |y - x_j|_1 <= rho constraints: per constraint,
/// d auxiliaries s with rows (y - x_j) <= s, -(y - x_j) <= s and the radius
/// row sum(s) <= rho. Effective radii below min_radius are clamped up and the
/// constraint is flagged in the returned system.
LinearConstraintSystem reformulate_l1(const ConstraintSet& cons, Eigen::Index n_nodes,
                                      Eigen::Index dim, double min_radius = 1e-12);

/// Primal-dual interior-point solve (Mehrotra predictor-corrector with an
/// active-set polish). Duals are first-class: Solution::lambda holds the
/// radius-row multiplier of each high-level constraint.
Solution solve_qp(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                  const SolverTolerances& tol = {});

/// KKT residuals computed from first principles, independent of the solver.
KktReport kkt_report(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                     const Solution& sol);

/// Adjusts split-row multipliers so auxiliary stationarity holds exactly
/// (mu_plus + mu_minus = mu_radius per coordinate) while preserving their
/// difference where possible. Keeps multipliers nonnegative.
Eigen::VectorXd repair_duals(const LinearConstraintSystem& sys, Eigen::VectorXd row_duals);

/// Lagrange dual value at the given row multipliers: a certified lower bound
/// on the optimal value after dual repair.
double dual_value(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                  const Eigen::VectorXd& row_duals);

}  // namespace elmap
