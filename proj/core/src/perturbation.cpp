#include "elmap/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elmap {

namespace {

struct SweepContext {
  const QuadraticObjective& obj;
  ConstraintSet cons;  // working copy; the swept constraint mutates
  std::size_t id;
  double min_radius;
  SolverTolerances tol;
  std::optional<Eigen::VectorXd> direction;  // unit L1 direction, single-axis mode

  SweepSample solve_at(double u) {
    PointConstraint& target = cons[id];
    if (direction) {
      target.perturbation = 0.0;
      target.anchor = cons_anchor_base + u * (*direction);
    } else {
      target.perturbation = u;
    }
    const LinearConstraintSystem sys =
        reformulate_l1(cons, obj.nodes(), obj.dim(), min_radius);
    const Solution sol = solve_qp(obj, sys, tol);
    SweepSample s;
    s.u = u;
    s.p_star = sol.p_star;
    s.lambda = sol.lambda[id];
    s.nodes = sol.nodes;
    s.feasible = sol.status == SolveStatus::solved &&
                 kkt_report(obj, sys, sol).within(tol);
    return s;
  }

  Eigen::VectorXd cons_anchor_base;
};

}  // namespace

PerturbationCurve sweep(const QuadraticObjective& obj, const ConstraintSet& cons,
                        std::size_t constraint_id, const GridSpec& grid,
                        const SolverTolerances& tol) {
  if (constraint_id >= cons.size()) {
    throw std::invalid_argument("sweep: constraint id out of range");
  }
  if (grid.sample_count < 3) {
    throw std::invalid_argument("sweep: need at least 3 samples per range");
  }
  const double scale = tol.scale > 0.0 ? tol.scale : 1.0;

  SweepContext ctx{obj, cons, constraint_id, 1e-6 * scale, tol, {}, {}};
  ctx.cons_anchor_base = cons[constraint_id].anchor;
  if (grid.anchor_direction) {
    Eigen::VectorXd dir = *grid.anchor_direction;
    if (dir.size() != obj.dim() || dir.cwiseAbs().sum() == 0.0) {
      throw std::invalid_argument("sweep: bad anchor direction");
    }
    ctx.direction = dir / dir.cwiseAbs().sum();
  }

  const double r = cons[constraint_id].radius;
  PerturbationCurve curve;
  curve.constraint_id = constraint_id;
  curve.base_radius = r;
  curve.u_lower = ctx.direction ? 0.0 : -r;
  // The tightest sample backs off the bound a little; r + u = 0 exactly makes
  // the dual unreliable.
  const double sweep_start = ctx.direction ? 0.0 : -r * (1.0 - grid.lower_backoff);

  const SweepSample base = ctx.solve_at(0.0);
  curve.p0 = base.p_star;
  curve.lambda0 = base.lambda;
  curve.samples.push_back(base);

  const double initial_upper = grid.initial_upper > 0.0
                                   ? grid.initial_upper
                                   : std::max(8.0 * std::max(r, ctx.min_radius),
                                              0.25 * scale);

  auto solve_range = [&](double lo, double hi, int count) {
    for (int k = 0; k < count; ++k) {
      const double u = lo + (hi - lo) * static_cast<double>(k) /
                                static_cast<double>(count - 1);
      const bool seen = std::any_of(
          curve.samples.begin(), curve.samples.end(),
          [&](const SweepSample& s) { return std::abs(s.u - u) < 1e-15; });
      if (!seen) {
        curve.samples.push_back(ctx.solve_at(u));
      }
    }
  };

  double upper = initial_upper;
  solve_range(sweep_start, upper, grid.sample_count);

  auto last_feasible_lambda = [&]() {
    double best_u = sweep_start;
    double lam = curve.lambda0;
    for (const SweepSample& s : curve.samples) {
      if (s.feasible && s.u >= best_u) {
        best_u = s.u;
        lam = s.lambda;
      }
    }
    return lam;
  };

  int doublings = 0;
  while (last_feasible_lambda() > grid.eps_lambda && doublings < grid.max_doublings) {
    const double next = 2.0 * upper;
    solve_range(upper, next, grid.sample_count);
    upper = next;
    ++doublings;
  }
  curve.u_limit = upper;
  curve.range_capped =
      doublings == grid.max_doublings && last_feasible_lambda() > grid.eps_lambda;

  std::sort(curve.samples.begin(), curve.samples.end(),
            [](const SweepSample& a, const SweepSample& b) { return a.u < b.u; });

  // Bisect between the bracketing samples around the dual's crossing of
  // eps_lambda so find_u_upper can read the knee off the samples.
  if (curve.lambda0 > grid.eps_lambda && !curve.range_capped) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::quiet_NaN();
    for (const SweepSample& s : curve.samples) {
      if (!s.feasible || s.u < 0.0) {
        continue;
      }
      if (s.lambda > grid.eps_lambda) {
        lo = s.u;
      } else {
        hi = s.u;
        break;
      }
    }
    if (!std::isnan(hi)) {
      const double resolution = 1e-3 * (curve.u_limit - curve.u_lower);
      std::vector<SweepSample> refined;
      while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        SweepSample s = ctx.solve_at(mid);
        refined.push_back(s);
        if (s.feasible && s.lambda <= grid.eps_lambda) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      curve.samples.insert(curve.samples.end(), refined.begin(), refined.end());
      std::sort(curve.samples.begin(), curve.samples.end(),
                [](const SweepSample& a, const SweepSample& b) { return a.u < b.u; });
      curve.u_upper = hi;
    }
  } else if (curve.lambda0 <= grid.eps_lambda) {
    curve.u_upper = 0.0;
  }
  return curve;
}

double find_u_upper(const PerturbationCurve& curve, double eps_lambda) {
  int feasible = 0;
  for (const SweepSample& s : curve.samples) {
    feasible += s.feasible ? 1 : 0;
  }
  if (feasible < 3) {
    throw std::invalid_argument("find_u_upper: need at least 3 feasible samples");
  }
  if (curve.lambda0 <= eps_lambda) {
    return 0.0;  // already in the flat region
  }
  for (const SweepSample& s : curve.samples) {
    if (s.feasible && s.u >= 0.0 && s.lambda <= eps_lambda) {
      return s.u;
    }
  }
  throw std::runtime_error(
      "find_u_upper: unbounded influence; the dual never fell below the "
      "threshold within the capped sweep range");
}

ConfidencePoint confidence_of(double u, double r, double u_upper) {
  if (!(u_upper + r > 0.0)) {
    throw std::invalid_argument("confidence_of: u_upper + r must be positive");
  }
  if (u < -r || u > u_upper) {
    throw std::invalid_argument("confidence_of: u outside [-r, u_upper]");
  }
  ConfidencePoint c;
  c.sigma_c = (u + r) / (u_upper + r);
  c.confidence = 1.0 - c.sigma_c;
  return c;
}

SensitivityReport check_sensitivity_bound(const PerturbationCurve& curve) {
  SensitivityReport rep;
  rep.holds = true;
  bool first = true;
  for (const SweepSample& s : curve.samples) {
    if (!s.feasible) {
      continue;
    }
    const double margin = s.p_star - (curve.p0 - curve.lambda0 * s.u);
    if (first || margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_u = s.u;
      first = false;
    }
  }
  rep.holds = !first && rep.worst_margin >= -1e-8;
  return rep;
}

}  // namespace elmap
