#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "elmap/constraints.hpp"
#include "elmap/energy.hpp"
#include "elmap/qp.hpp"
#include "elmap/trajectory.hpp"

namespace elmap {

struct PipelineParams {
  ElasticParams elastic;          // gamma is overwritten from the demo weights
  SolverTolerances tol;           // tol.scale <= 0: auto from the demo bounding box
  double eps_prune = 1e-6;        // applied after problem scaling
  std::optional<double> sigma_s;  // confidence factor for obstacle constraints
  bool pin_endpoints = false;     // exact start/end pins (tiny-radius balls)
};

/// A certified solve: nodes, solution with duals, the retained constraints,
/// and the diagnostics backing the certification.
struct Reproduction {
  Eigen::MatrixXd nodes;                 // N x d
  Solution solution;                     // of the pruned re-solve
  ConstraintSet active_constraints;      // constraints that survived pruning
  std::optional<double> confidence;
  KktReport kkt;
  Energies energies;

  ConstraintSet all_constraints;         // pre-prune set (user + generated)
  std::vector<std::size_t> pruned_ids;   // indices into all_constraints
  Eigen::MatrixXd target;                // cluster target the objective fit
  double gamma = 0.0;
  double scale = 1.0;
};

/// The solve-ready problem: objective over the cluster target plus the full
/// constraint list (user constraints, endpoint pins, generated obstacle
/// constraints, in that order).
struct AssembledProblem {
  QuadraticObjective objective;
  ConstraintSet constraints;
  Eigen::MatrixXd target;
  double gamma = 0.0;
  SolverTolerances tol;
  double min_radius = 0.0;  // clamp floor for effective radii
};

AssembledProblem assemble_problem(const DemonstrationSet& demos,
                                  const ConstraintSet& user_constraints,
                                  const ObstacleSet* obstacles,
                                  const PipelineParams& params);

/// Resample the demos, assemble the objective, generate per-node obstacle
/// constraints when obstacles are given, solve, drop zero-dual constraints,
/// and re-solve on the reduced set as a certification step.
/// Throws InfeasibleError (listing the conflicting constraints) when the
/// constraint set admits no solution.
Reproduction reproduce(const DemonstrationSet& demos, const ConstraintSet& user_constraints,
                       const ObstacleSet* obstacles, const PipelineParams& params);

/// One reproduction per confidence factor, in the order given.
std::vector<Reproduction> confidence_family(const DemonstrationSet& demos,
                                            const ObstacleSet& obstacles,
                                            const std::vector<double>& levels,
                                            const PipelineParams& params,
                                            const ConstraintSet& user_constraints = {});

/// Bounding-box diagonal of all demonstration points; the default problem
/// scale that makes solver tolerances meaningful across datasets.
double demonstration_scale(const DemonstrationSet& demos);

}  // namespace elmap
