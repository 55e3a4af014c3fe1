#include "elmap/pipeline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace elmap {

double demonstration_scale(const DemonstrationSet& demos) {
  const Eigen::Index d = demos.dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const Trajectory& t : demos.demos()) {
    lo = lo.cwiseMin(t.points().colwise().minCoeff().transpose());
    hi = hi.cwiseMax(t.points().colwise().maxCoeff().transpose());
  }
  const double diag = (hi - lo).norm();
  return diag > 0.0 ? diag : 1.0;
}

namespace {

std::vector<Eigen::Index> certificate_support(const LinearConstraintSystem& sys,
                                              const Eigen::VectorXd& certificate) {
  std::vector<Eigen::Index> ids;
  if (certificate.size() != sys.row_count()) {
    return ids;
  }
  const double top = certificate.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < sys.constraint_count(); ++i) {
    const Eigen::Index row = sys.radius_row_of(i);
    if (row >= 0 && certificate(row) > 1e-6 * top) {
      ids.push_back(i);
    }
  }
  return ids;
}

Solution certified_solve(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                         const SolverTolerances& tol) {
  Solution sol = solve_qp(obj, sys, tol);
  if (sol.status == SolveStatus::infeasible) {
    const std::vector<Eigen::Index> ids = certificate_support(sys, sol.certificate);
    std::string what = "constraint set is infeasible; conflicting constraints:";
    for (Eigen::Index id : ids) {
      what += " " + std::to_string(id);
    }
    throw InfeasibleError(what, ids, sol.certificate);
  }
  if (sol.status != SolveStatus::solved) {
    throw std::runtime_error("solver failed to reach the requested tolerances");
  }
  return sol;
}

}  // namespace

AssembledProblem assemble_problem(const DemonstrationSet& demos,
                                  const ConstraintSet& user_constraints,
                                  const ObstacleSet* obstacles,
                                  const PipelineParams& params) {
  const Eigen::Index n = params.elastic.node_count;
  const Eigen::Index d = demos.dim();
  if (n < 3) {
    throw std::invalid_argument("node_count must be >= 3");
  }

  const ClusterTarget ct = build_cluster_target(demos, n);
  ElasticParams eparams = params.elastic;
  eparams.gamma = ct.gamma;
  eparams.validate();

  AssembledProblem out;
  out.tol = params.tol;
  if (out.tol.scale <= 0.0) {
    out.tol.scale = demonstration_scale(demos);
  }
  out.min_radius = 1e-6 * out.tol.scale;

  for (const PointConstraint& c : user_constraints) {
    if (c.node_index < 0 || c.node_index >= n) {
      throw std::invalid_argument("user constraint node index out of range");
    }
    if (c.anchor.size() != d) {
      throw std::invalid_argument("user constraint anchor dimension mismatch");
    }
    out.constraints.push_back(c);
  }
  if (params.pin_endpoints) {
    out.constraints.push_back(make_point_constraint(
        0, ct.target.row(0).transpose(), 0.0, n, ConstraintKind::endpoint));
    out.constraints.push_back(make_point_constraint(
        n - 1, ct.target.row(n - 1).transpose(), 0.0, n, ConstraintKind::endpoint));
  }
  if (obstacles != nullptr && !obstacles->empty()) {
    ConstraintSet ocons = generate_obstacle_constraints(ct.target, *obstacles);
    if (params.sigma_s) {
      ocons = apply_confidence_factor(ocons, *params.sigma_s);
    }
    out.constraints.insert(out.constraints.end(), ocons.begin(), ocons.end());
  }

  out.objective = assemble_quadratic(ct.target, eparams);
  out.target = ct.target;
  out.gamma = ct.gamma;
  return out;
}

Reproduction reproduce(const DemonstrationSet& demos, const ConstraintSet& user_constraints,
                       const ObstacleSet* obstacles, const PipelineParams& params) {
  const Eigen::Index n = params.elastic.node_count;
  const Eigen::Index d = demos.dim();
  AssembledProblem prob = assemble_problem(demos, user_constraints, obstacles, params);
  const QuadraticObjective& obj = prob.objective;
  const ConstraintSet& cons = prob.constraints;
  const SolverTolerances& tol = prob.tol;
  const double eps_r = prob.min_radius;
  ElasticParams eparams = params.elastic;
  eparams.gamma = prob.gamma;

  const LinearConstraintSystem sys = reformulate_l1(cons, n, d, eps_r);
  const Solution full = certified_solve(obj, sys, tol);

  const double eps_prune = params.eps_prune * tol.scale;
  const double slack_margin = 1e-7 * tol.scale;
  const ConstraintSet kept = prune_zero_dual(cons, full, eps_prune, slack_margin);
  const std::vector<std::size_t> dropped =
      pruned_indices(cons, full, eps_prune, slack_margin);

  const LinearConstraintSystem pruned_sys =
      dropped.empty() ? sys : reformulate_l1(kept, n, d, eps_r);
  const Solution sol = dropped.empty() ? full : certified_solve(obj, pruned_sys, tol);

  // Pruning soundness: the reduced problem must reproduce the full optimum.
  const double node_dev = (sol.nodes - full.nodes).cwiseAbs().maxCoeff();
  const double p_dev = std::abs(sol.p_star - full.p_star) /
                       std::max(1.0, std::abs(full.p_star));
  if (node_dev > 1e-5 || p_dev > 1e-6) {
    throw std::runtime_error("pruned re-solve deviates from the full solution");
  }

  Reproduction rep;
  rep.nodes = sol.nodes;
  rep.solution = sol;
  rep.active_constraints = kept;
  rep.confidence = params.sigma_s;
  rep.kkt = kkt_report(obj, pruned_sys, sol);
  rep.energies = evaluate_energies(sol.nodes, prob.target, eparams);
  rep.all_constraints = cons;
  rep.pruned_ids = dropped;
  rep.target = prob.target;
  rep.gamma = prob.gamma;
  rep.scale = tol.scale;

  for (const PointConstraint& c : kept) {
    const double lhs =
        l1_distance(c.anchor, rep.nodes.row(c.node_index).transpose());
    if (lhs > std::max(c.effective_radius(), eps_r) + tol.feas * std::max(1.0, tol.scale)) {
      throw std::runtime_error("retained constraint violated beyond tolerance");
    }
  }
  return rep;
}

std::vector<Reproduction> confidence_family(const DemonstrationSet& demos,
                                            const ObstacleSet& obstacles,
                                            const std::vector<double>& levels,
                                            const PipelineParams& params,
                                            const ConstraintSet& user_constraints) {
  for (double level : levels) {
    if (!(level >= 0.0 && level <= 1.0)) {
      throw std::invalid_argument("confidence levels must lie in [0, 1]");
    }
  }
  std::vector<Reproduction> family;
  family.reserve(levels.size());
  for (double level : levels) {
    PipelineParams p = params;
    p.sigma_s = level;
    try {
      family.push_back(reproduce(demos, user_constraints, &obstacles, p));
    } catch (const InfeasibleError&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("confidence level " + std::to_string(level) +
                               " failed: " + e.what());
    }
  }
  return family;
}

}  // namespace elmap
