// Acceptance suite: runs each advertised guarantee end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "elmap/perturbation.hpp"
#include "elmap/pipeline.hpp"
#include "elmap/reference_oracle.hpp"
#include "support/random_instances.hpp"

using namespace elmap;
using elmap::cli::build_setup;
using elmap::cli::load_config;
using elmap::cli::ProblemSetup;

namespace {

struct Criterion {
  Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}

  int id;
  std::string name;
  bool pass = true;
  std::string detail;
  double seconds = 0.0;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) {
      detail += "; ";
    }
    detail += why;
  }
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string scenario_path(const std::string& name) {
  return std::string(ELMAP_SCENARIO_DIR) + "/" + name;
}

struct SweepCase {
  std::string name;
  PerturbationCurve curve;
  // For the finite-difference check.
  QuadraticObjective obj;
  ConstraintSet cons;
  std::size_t target = 0;
  SolverTolerances tol;
};

Solution solve_with_u(const SweepCase& sc, double u) {
  ConstraintSet cons = sc.cons;
  cons[sc.target].perturbation = u;
  const LinearConstraintSystem sys = reformulate_l1(
      cons, sc.obj.nodes(), sc.obj.dim(), 1e-6 * sc.tol.scale);
  return solve_qp(sc.obj, sys, sc.tol);
}

std::vector<bool> active_pattern(const Solution& sol) {
  std::vector<bool> pattern;
  pattern.reserve(sol.lambda.size());
  for (double lam : sol.lambda) {
    pattern.push_back(lam > 1e-5);
  }
  return pattern;
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  std::mt19937 rng(20240817);

  // -------------------------------------------------------------------------
  // Criterion 1: strong duality on a randomized suite of 100 elastic-map QPs.
  {
    Criterion c{1, "strong duality, dual signs, slackness on 100 random QPs"};
    const double t0 = now_seconds();
    int solved = 0;
    std::vector<testing::RandomInstance> suite;
    std::vector<Solution> solutions;
    for (int i = 0; i < 100; ++i) {
      const testing::RandomInstance inst =
          testing::make_random_instance(rng, 5, 50, 3, 5, i % 2 == 0);
      const LinearConstraintSystem sys = reformulate_l1(
          inst.cons, inst.obj.nodes(), inst.obj.dim(), 1e-6 * inst.scale);
      const Solution sol = solve_qp(inst.obj, sys, inst.tolerances());
      if (sol.status != SolveStatus::solved) {
        c.fail("instance " + std::to_string(i) + " did not solve");
        continue;
      }
      ++solved;
      if (sol.gap > 1e-6 * std::max(1.0, std::abs(sol.p_star))) {
        c.fail("gap " + std::to_string(sol.gap) + " on instance " + std::to_string(i));
      }
      for (std::size_t k = 0; k < inst.cons.size(); ++k) {
        if (sol.lambda[k] < -1e-12) {
          c.fail("negative dual on instance " + std::to_string(i));
        }
        const double f =
            l1_distance(inst.cons[k].anchor,
                        sol.nodes.row(inst.cons[k].node_index).transpose()) -
            inst.cons[k].effective_radius();
        if (std::abs(sol.lambda[k] * f) > 1e-8) {
          c.fail("complementary slackness " +
                 std::to_string(std::abs(sol.lambda[k] * f)) + " on instance " +
                 std::to_string(i));
        }
      }
      suite.push_back(inst);
      solutions.push_back(sol);
    }
    c.seconds = now_seconds() - t0;
    if (solved != 100) {
      c.fail("only " + std::to_string(solved) + "/100 solved");
    }
    if (c.seconds > 60.0) {
      c.fail("runtime " + std::to_string(c.seconds) + " s > 60 s");
    }
    if (c.pass) {
      c.detail = "100/100 solved, worst-case tolerances met";
    }

    // Criterion 3 reuses this suite for the slack-dual rule.
    Criterion c3{3, "perturbation rules: monotone, convex, slack duals vanish"};
    for (std::size_t i = 0; i < suite.size(); ++i) {
      for (std::size_t k = 0; k < suite[i].cons.size(); ++k) {
        const double f =
            l1_distance(suite[i].cons[k].anchor,
                        solutions[i].nodes.row(suite[i].cons[k].node_index).transpose()) -
            suite[i].cons[k].effective_radius();
        if (f < -1e-4 && solutions[i].lambda[k] > 1e-6) {
          c3.fail("slack constraint with dual " +
                  std::to_string(solutions[i].lambda[k]));
        }
      }
    }
    results.push_back(c);
    results.push_back(c3);  // monotonicity/convexity appended below
  }
  const std::size_t crit3_index = results.size() - 1;

  // -------------------------------------------------------------------------
  // Build the sweep suite: random constrained instances plus both bundled
  // scenarios. Criteria 2 and 3 run over every one of these curves.
  std::vector<SweepCase> sweeps;
  {
    int made = 0;
    while (made < 12) {
      const testing::RandomInstance inst =
          testing::make_random_instance(rng, 8, 14, 2, 3, true);
      if (inst.cons.empty()) {
        continue;
      }
      SweepCase sc;
      sc.name = "random sweep " + std::to_string(made);
      sc.obj = inst.obj;
      sc.cons = inst.cons;
      sc.target = 0;
      sc.tol = inst.tolerances();
      GridSpec grid;
      grid.sample_count = 20;
      sc.curve = sweep(sc.obj, sc.cons, sc.target, grid, sc.tol);
      sweeps.push_back(std::move(sc));
      ++made;
    }
  }
  double viapoint_seconds = 0.0;
  std::size_t viapoint_sweep_index = 0;
  {
    const double t0 = now_seconds();
    const ProblemSetup setup = build_setup(load_config(scenario_path("viapoint.toml")));
    const AssembledProblem prob = assemble_problem(
        setup.demos, setup.constraints, nullptr, setup.params);
    SweepCase sc;
    sc.name = "viapoint scenario sweep";
    sc.obj = prob.objective;
    sc.cons = prob.constraints;
    sc.target = 0;  // the via constraint
    sc.tol = prob.tol;
    sc.curve = sweep(sc.obj, sc.cons, sc.target, {}, sc.tol);
    viapoint_sweep_index = sweeps.size();
    sweeps.push_back(std::move(sc));
    viapoint_seconds = now_seconds() - t0;
  }
  {
    // Obstacle scenario: prune first, then sweep the strongest retained
    // obstacle constraint.
    const ProblemSetup setup = build_setup(load_config(scenario_path("obstacle.toml")));
    const Reproduction rep = reproduce(setup.demos, setup.constraints,
                                       &setup.obstacles, setup.params);
    std::size_t strongest = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < rep.active_constraints.size(); ++i) {
      if (rep.active_constraints[i].kind == ConstraintKind::obstacle &&
          rep.solution.lambda[i] > best) {
        best = rep.solution.lambda[i];
        strongest = i;
      }
    }
    SweepCase sc;
    sc.name = "obstacle scenario sweep";
    const AssembledProblem prob = assemble_problem(
        setup.demos, setup.constraints, &setup.obstacles, setup.params);
    sc.obj = prob.objective;
    sc.cons = rep.active_constraints;
    sc.target = strongest;
    sc.tol = prob.tol;
    GridSpec grid;
    grid.sample_count = 20;
    sc.curve = sweep(sc.obj, sc.cons, sc.target, grid, sc.tol);
    sweeps.push_back(std::move(sc));
  }

  // -------------------------------------------------------------------------
  // Criterion 2: the sensitivity bound and the finite-difference slope.
  {
    Criterion c{2, "sensitivity bound and FD slope across all sweeps"};
    const double t0 = now_seconds();
    int stable_checked = 0;
    for (const SweepCase& sc : sweeps) {
      const SensitivityReport rep = check_sensitivity_bound(sc.curve);
      if (!rep.holds) {
        c.fail(sc.name + ": bound violated by " + std::to_string(rep.worst_margin));
      }
      if (sc.curve.lambda0 < 1e-3) {
        continue;  // nothing to differentiate
      }
      const double h = 1e-4 * std::max(sc.cons[sc.target].radius, 1.0);
      const Solution base = solve_with_u(sc, 0.0);
      const Solution lo = solve_with_u(sc, -h);
      const Solution hi = solve_with_u(sc, h);
      if (base.status != SolveStatus::solved || lo.status != SolveStatus::solved ||
          hi.status != SolveStatus::solved) {
        continue;
      }
      if (active_pattern(lo) != active_pattern(base) ||
          active_pattern(hi) != active_pattern(base)) {
        continue;  // active set not locally stable
      }
      const double fd = (lo.p_star - hi.p_star) / (2.0 * h);
      const double lam = base.lambda[sc.target];
      if (std::abs(fd - lam) > 0.02 * std::max(std::abs(lam), 1e-12) &&
          std::abs(fd - lam) > 1e-6) {
        c.fail(sc.name + ": FD slope " + std::to_string(fd) + " vs dual " +
               std::to_string(lam));
      }
      ++stable_checked;
    }
    if (stable_checked < 5) {
      c.fail("only " + std::to_string(stable_checked) + " active-set-stable sweeps");
    }
    c.seconds = now_seconds() - t0;
    if (c.pass) {
      c.detail = std::to_string(sweeps.size()) + " sweeps, " +
                 std::to_string(stable_checked) + " FD checks";
    }
    results.push_back(c);
  }

  // Criterion 3 continued: monotone and convex curves.
  {
    Criterion& crit3 = results[crit3_index];
    for (const SweepCase& sc : sweeps) {
      std::vector<const SweepSample*> feas;
      for (const SweepSample& s : sc.curve.samples) {
        if (s.feasible) {
          feas.push_back(&s);
        }
      }
      const double pscale = std::max(1.0, std::abs(sc.curve.p0));
      for (std::size_t i = 0; i + 1 < feas.size(); ++i) {
        if (feas[i + 1]->p_star > feas[i]->p_star + 1e-8 * pscale) {
          crit3.fail(sc.name + ": p* increased along the sweep");
          break;
        }
      }
      for (std::size_t i = 0; i + 2 < feas.size(); ++i) {
        const double du1 = feas[i + 1]->u - feas[i]->u;
        const double du2 = feas[i + 2]->u - feas[i + 1]->u;
        if (du1 < 1e-12 || du2 < 1e-12) {
          continue;
        }
        if (std::abs(du1 - du2) <= 1e-9 * (du1 + du2)) {
          // Uniform triple: midpoint convexity at the stated tolerance.
          if (feas[i + 1]->p_star >
              0.5 * (feas[i]->p_star + feas[i + 2]->p_star) + 1e-8 * pscale) {
            crit3.fail(sc.name + ": p*(u) not midpoint-convex");
            break;
          }
        } else {
          const double s1 = (feas[i + 1]->p_star - feas[i]->p_star) / du1;
          const double s2 = (feas[i + 2]->p_star - feas[i + 1]->p_star) / du2;
          if (s2 < s1 - 1e-6 * pscale) {
            crit3.fail(sc.name + ": p*(u) not convex");
            break;
          }
        }
      }
    }
    if (crit3.pass) {
      crit3.detail = "all sweeps monotone and convex; slack duals below 1e-6";
    }
  }

  // -------------------------------------------------------------------------
  // Criterion 4: zero-dual pruning on the obstacle scenario.
  {
    Criterion c{4, "zero-dual pruning removes >= 80% with an unchanged optimum"};
    const double t0 = now_seconds();
    const ProblemSetup setup = build_setup(load_config(scenario_path("obstacle.toml")));
    const AssembledProblem prob = assemble_problem(
        setup.demos, setup.constraints, &setup.obstacles, setup.params);
    const Eigen::Index n = prob.objective.nodes();
    const LinearConstraintSystem sys =
        reformulate_l1(prob.constraints, n, prob.objective.dim(), prob.min_radius);
    const Solution full = solve_qp(prob.objective, sys, prob.tol);
    if (full.status != SolveStatus::solved) {
      c.fail("full solve failed");
    } else {
      const double eps_prune = 1e-6 * prob.tol.scale;
      const double slack_margin = 1e-7 * prob.tol.scale;
      const std::vector<std::size_t> dropped =
          pruned_indices(prob.constraints, full, eps_prune, slack_margin);
      std::size_t obstacle_total = 0;
      std::size_t obstacle_dropped = 0;
      for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
        if (prob.constraints[i].kind == ConstraintKind::obstacle) {
          ++obstacle_total;
        }
      }
      for (std::size_t id : dropped) {
        if (prob.constraints[id].kind == ConstraintKind::obstacle) {
          ++obstacle_dropped;
        }
      }
      if (obstacle_total != 100) {
        c.fail("expected 100 obstacle constraints, got " +
               std::to_string(obstacle_total));
      }
      if (obstacle_dropped < 80) {
        c.fail("pruned only " + std::to_string(obstacle_dropped) + "/100");
      }
      const ConstraintSet kept =
          prune_zero_dual(prob.constraints, full, eps_prune, slack_margin);
      const LinearConstraintSystem sys2 =
          reformulate_l1(kept, n, prob.objective.dim(), prob.min_radius);
      const Solution re = solve_qp(prob.objective, sys2, prob.tol);
      const double dev = (re.nodes - full.nodes).cwiseAbs().maxCoeff();
      const double pdev = std::abs(re.p_star - full.p_star) /
                          std::max(1.0, std::abs(full.p_star));
      if (re.status != SolveStatus::solved || dev > 1e-5 || pdev > 1e-6) {
        c.fail("re-solve deviation " + std::to_string(dev) + ", p dev " +
               std::to_string(pdev));
      }
      if (c.pass) {
        c.detail = "pruned " + std::to_string(obstacle_dropped) +
                   "/100 obstacle constraints, re-solve deviation " +
                   std::to_string(dev);
      }
    }
    c.seconds = now_seconds() - t0;
    results.push_back(c);
  }

  // -------------------------------------------------------------------------
  // Criterion 5: the via-point experiment.
  {
    Criterion c{5, "via-point sweep: decreasing then flat, exact confidence ends"};
    const double t0 = now_seconds();
    const SweepCase& sc = sweeps[viapoint_sweep_index];
    const double r = sc.cons[sc.target].radius;
    double u_upper = std::numeric_limits<double>::quiet_NaN();
    try {
      u_upper = find_u_upper(sc.curve);
    } catch (const std::exception& e) {
      c.fail(std::string("u_upper not detected: ") + e.what());
    }
    if (!std::isnan(u_upper)) {
      if (!(u_upper > 0.0)) {
        c.fail("u_upper not positive");
      }
      const ConfidencePoint tightest = confidence_of(-r, r, u_upper);
      const ConfidencePoint loosest = confidence_of(u_upper, r, u_upper);
      if (tightest.confidence != 1.0 || tightest.sigma_c != 0.0) {
        c.fail("confidence at u = -r is not exactly 1");
      }
      if (loosest.confidence != 0.0 || loosest.sigma_c != 1.0) {
        c.fail("confidence at u_upper is not exactly 0");
      }
      // Strictly decreasing while the dual is alive, flat afterwards.
      const SweepSample* prev = nullptr;
      for (const SweepSample& s : sc.curve.samples) {
        if (!s.feasible) {
          continue;
        }
        if (prev != nullptr && prev->lambda > 1e-4 && s.u <= u_upper &&
            s.p_star >= prev->p_star) {
          c.fail("p*(u) not strictly decreasing at u = " + std::to_string(s.u));
          break;
        }
        if (s.u > u_upper && s.lambda > 1e-5) {
          c.fail("dual alive past u_upper");
          break;
        }
        prev = &s;
      }
      // The tightest (confidence-1) reproduction sits within r of the anchor.
      const SweepSample& tightest_sample = sc.curve.samples.front();
      const PointConstraint& via = sc.cons[sc.target];
      const double dist = l1_distance(
          via.anchor, tightest_sample.nodes.row(via.node_index).transpose());
      if (dist > r) {
        c.fail("confidence-1 reproduction misses the via box by " +
               std::to_string(dist - r));
      }
    }
    c.seconds = now_seconds() - t0 + viapoint_seconds;
    if (c.seconds > 30.0) {
      c.fail("runtime " + std::to_string(c.seconds) + " s > 30 s");
    }
    if (c.pass) {
      c.detail = "u_upper = " + std::to_string(u_upper);
    }
    results.push_back(c);
  }

  // -------------------------------------------------------------------------
  // Criterion 6: the obstacle experiment.
  {
    Criterion c{6, "obstacle family: violation without constraints, ordered margins"};
    const double t0 = now_seconds();
    const ProblemSetup setup = build_setup(load_config(scenario_path("obstacle.toml")));
    const ClusterTarget ct =
        build_cluster_target(setup.demos, setup.params.elastic.node_count);
    const ConstraintSet safety =
        generate_obstacle_constraints(ct.target, setup.obstacles);

    const Reproduction plain =
        reproduce(setup.demos, setup.constraints, nullptr, setup.params);
    int violated = 0;
    for (const PointConstraint& s : safety) {
      if (l1_distance(s.anchor, plain.nodes.row(s.node_index).transpose()) > s.radius) {
        ++violated;
      }
    }
    if (violated == 0) {
      c.fail("unconstrained reproduction violates no safety radius");
    }

    const std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<Reproduction> family =
        confidence_family(setup.demos, setup.obstacles, levels, setup.params,
                          setup.constraints);
    const double feas_tol = 1e-7 * std::max(1.0, family.front().scale);
    double prev_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.size(); ++i) {
      for (const PointConstraint& s : family[i].all_constraints) {
        if (s.kind != ConstraintKind::obstacle) {
          continue;
        }
        const double lhs =
            l1_distance(s.anchor, family[i].nodes.row(s.node_index).transpose());
        if (lhs > std::max(s.effective_radius(), 1e-6 * family[i].scale) + feas_tol) {
          c.fail("constrained reproduction violates a safety radius at level " +
                 std::to_string(levels[i]));
        }
      }
      double margin = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < family[i].nodes.rows(); ++j) {
        margin = std::min(margin,
                          closest_obstacle_point(family[i].nodes.row(j).transpose(),
                                                 setup.obstacles)
                              .distance);
      }
      if (margin < prev_margin - 1e-9) {
        c.fail("margin decreased at level " + std::to_string(levels[i]));
      }
      prev_margin = margin;
    }
    if (family.back().energies.bend <= family.front().energies.bend) {
      c.fail("bending energy at sigma_s = 1 does not exceed sigma_s = 0");
    }
    c.seconds = now_seconds() - t0;
    if (c.seconds > 60.0) {
      c.fail("runtime " + std::to_string(c.seconds) + " s > 60 s");
    }
    if (c.pass) {
      c.detail = std::to_string(violated) +
                 " safety radii violated unconstrained; U_R ratio " +
                 std::to_string(family.back().energies.bend /
                                std::max(family.front().energies.bend, 1e-300));
    }
    results.push_back(c);
  }

  // -------------------------------------------------------------------------
  // Criteria 7 and 8: the oracle suite.
  {
    Criterion c7{7, "main solver agrees with the projected-gradient oracle"};
    Criterion c8{8, "unconstrained closed form: residual and oracle agreement"};
    const double t0 = now_seconds();
    int eligible = 0;
    for (int i = 0; i < 50; ++i) {
      const testing::RandomInstance inst =
          testing::make_random_instance(rng, 5, 12, 3, 4, i % 2 == 0);

      // Criterion 8 on every instance.
      const Eigen::MatrixXd direct = solve_unconstrained(inst.obj);
      const double residual =
          (inst.obj.q_block * direct - inst.obj.c).cwiseAbs().maxCoeff();
      if (residual > 1e-8) {
        c8.fail("residual " + std::to_string(residual));
      }
      const OracleResult unconstrained = oracle_solve(inst.obj, {});
      if (!unconstrained.converged ||
          (unconstrained.nodes - direct).cwiseAbs().maxCoeff() > 1e-6) {
        c8.fail("oracle mismatch on instance " + std::to_string(i));
      }

      // Criterion 7 on instances where the oracle's answer is trustworthy.
      const OracleResult oracle = oracle_solve(inst.obj, inst.cons);
      if (!oracle.converged) {
        continue;
      }
      int active = 0;
      for (const PointConstraint& pc : inst.cons) {
        const double slack =
            pc.effective_radius() -
            l1_distance(pc.anchor, oracle.nodes.row(pc.node_index).transpose());
        if (slack < 1e-7 * inst.scale) {
          ++active;
        }
      }
      if (active > 1) {
        continue;
      }
      const LinearConstraintSystem sys = reformulate_l1(
          inst.cons, inst.obj.nodes(), inst.obj.dim(), 1e-6 * inst.scale);
      const Solution sol = solve_qp(inst.obj, sys, inst.tolerances());
      if (sol.status != SolveStatus::solved) {
        c7.fail("solve failed on instance " + std::to_string(i));
        continue;
      }
      const double dev = (sol.nodes - oracle.nodes).cwiseAbs().maxCoeff();
      if (dev > 1e-4) {
        c7.fail("deviation " + std::to_string(dev) + " on instance " +
                std::to_string(i));
      }
      if (std::abs(sol.p_star - oracle.objective) >
          1e-6 * std::max(1.0, std::abs(sol.p_star))) {
        c7.fail("objective deviation on instance " + std::to_string(i));
      }
      ++eligible;
    }
    if (eligible < 25) {
      c7.fail("only " + std::to_string(eligible) + " eligible instances");
    }
    c7.seconds = now_seconds() - t0;
    c8.seconds = c7.seconds;
    if (c7.pass) {
      c7.detail = std::to_string(eligible) + "/50 instances compared";
    }
    if (c8.pass) {
      c8.detail = "all 50 instances";
    }
    results.push_back(c7);
    results.push_back(c8);
  }

  // -------------------------------------------------------------------------
  std::sort(results.begin(), results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  bool all_pass = true;
  for (const Criterion& c : results) {
    std::printf("[%s] criterion %d: %s%s%s (%.1f s)\n", c.pass ? "PASS" : "FAIL",
                c.id, c.name.c_str(), c.detail.empty() ? "" : " -- ",
                c.detail.c_str(), c.seconds);
    all_pass = all_pass && c.pass;
  }
  return all_pass ? 0 : 1;
}
