#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

#include "elmap/constraints.hpp"
#include "elmap/energy.hpp"
#include "elmap/qp.hpp"

namespace elmap {

struct GridSpec {
  int sample_count = 50;        // linear samples per range
  double lower_backoff = 1e-3;  // sweep starts at -r (1 - backoff)
  double initial_upper = 0.0;   // <= 0: derived from radius and problem scale
  int max_doublings = 4;        // upper range cap 16x initial
  double eps_lambda = 1e-6;     // dual threshold marking the flat region
  // Single-axis mode: the anchor moves by u along this direction instead of
  // the radius growing isotropically.
  std::optional<Eigen::VectorXd> anchor_direction;
};

struct SweepSample {
  double u = 0.0;
  double p_star = 0.0;
  double lambda = 0.0;
  Eigen::MatrixXd nodes;
  bool feasible = false;
};

/// Sampled map u -> (p*(u), lambda(u), x*(u)) for one perturbed constraint.
struct PerturbationCurve {
  std::size_t constraint_id = 0;
  double base_radius = 0.0;
  std::vector<SweepSample> samples;  // sorted by u
  double u_lower = 0.0;              // tightest swept u
  double u_limit = 0.0;              // loosest swept u
  double p0 = 0.0;                   // p*(0)
  double lambda0 = 0.0;              // lambda at u = 0
  double u_upper = std::numeric_limits<double>::quiet_NaN();
  bool range_capped = false;         // doubling cap hit with lambda still high
};

/// Solve the problem across a grid of perturbations u of one constraint.
/// The upper range doubles (up to the cap) until the constraint's dual drops
/// below eps_lambda; a bisection pass then pins the knee to 1e-3 of the range.
PerturbationCurve sweep(const QuadraticObjective& obj, const ConstraintSet& cons,
                        std::size_t constraint_id, const GridSpec& grid = {},
                        const SolverTolerances& tol = {});

/// Smallest sampled loosening at which the dual has vanished: the start of
/// the region where further loosening no longer lowers the optimal value.
/// Returns 0 when the constraint is already slack at u = 0. Throws when the
/// dual never fell below eps_lambda inside the swept (capped) range.
double find_u_upper(const PerturbationCurve& curve, double eps_lambda = 1e-6);

struct ConfidencePoint {
  double sigma_c = 0.0;    // (u + r) / (u_upper + r), 0 at tightest
  double confidence = 0.0; // 1 - sigma_c, 1 at tightest
};

ConfidencePoint confidence_of(double u, double r, double u_upper);

struct SensitivityReport {
  bool holds = false;
  double worst_margin = 0.0;
  double worst_u = 0.0;
};

/// Checks p*(u) >= p*(0) - lambda0 * u at every feasible sample.
SensitivityReport check_sensitivity_bound(const PerturbationCurve& curve);

}  // namespace elmap
