#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "elmap/qp.hpp"
#include "elmap/reference_oracle.hpp"
#include "support/random_instances.hpp"

using namespace elmap;

TEST_CASE("l1 ball projection basics") {
  Eigen::VectorXd center = Eigen::VectorXd::Zero(1);
  CHECK(l1_ball_project(Eigen::VectorXd::Constant(1, 3.0), center, 1.0)(0) ==
        doctest::Approx(1.0));
  // Inside points are untouched.
  Eigen::VectorXd p(3);
  p << 0.1, -0.2, 0.05;
  CHECK((l1_ball_project(p, Eigen::VectorXd::Zero(3), 1.0) - p).norm() == 0.0);
  // Zero radius collapses to the center.
  Eigen::VectorXd c2(2);
  c2 << 0.5, -1.0;
  CHECK((l1_ball_project(Eigen::VectorXd::Ones(2), c2, 0.0) - c2).norm() == 0.0);
  CHECK_THROWS_AS(l1_ball_project(p, Eigen::VectorXd::Zero(2), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(l1_ball_project(p, Eigen::VectorXd::Zero(3), -1.0),
                  std::invalid_argument);
}

TEST_CASE("l1 ball projection matches a brute-force search in 3d") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd center(3), p(3);
    for (Eigen::Index k = 0; k < 3; ++k) {
      center(k) = unit(rng);
      p(k) = unit(rng);
    }
    const double rho = 0.3 + std::abs(unit(rng)) * 0.5;
    const Eigen::VectorXd proj = l1_ball_project(p, center, rho);
    CHECK((proj - center).cwiseAbs().sum() <= rho + 1e-12);

    // Grid search over the ball, refined once around the projection. The
    // feasibility slack admits grid points that land exactly on the surface.
    auto grid_best = [&](const Eigen::VectorXd& lo, double width, int steps) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::VectorXd q(3);
      for (int a = 0; a <= steps; ++a) {
        for (int b = 0; b <= steps; ++b) {
          for (int c = 0; c <= steps; ++c) {
            q << lo(0) + width * a / steps, lo(1) + width * b / steps,
                lo(2) + width * c / steps;
            if ((q - center).cwiseAbs().sum() <= rho + 1e-12) {
              best = std::min(best, (q - p).norm());
            }
          }
        }
      }
      return best;
    };
    const double coarse =
        grid_best(center - Eigen::VectorXd::Constant(3, rho), 2.0 * rho, 40);
    const double fine = grid_best(proj - Eigen::VectorXd::Constant(3, 0.1 * rho),
                                  0.2 * rho, 40);
    const double brute = std::min(coarse, fine);
    // The projection may not beat the grid by more than the grid can miss,
    // and the grid (which contains the projection itself) may not beat the
    // claimed projection at all.
    CHECK((proj - p).norm() <= brute + 1e-3);
    CHECK(brute >= (proj - p).norm() - 1e-12);
  }
}

TEST_CASE("oracle matches the closed-form unconstrained solution") {
  std::mt19937 rng(3);
  const testing::RandomInstance inst = testing::make_random_instance(rng, 6, 12, 3, 0, false);
  const OracleResult res = oracle_solve(inst.obj, {});
  CHECK(res.converged);
  const Eigen::MatrixXd direct = solve_unconstrained(inst.obj);
  CHECK((res.nodes - direct).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(res.objective == doctest::Approx(inst.obj.value(direct)).epsilon(1e-9));
}

TEST_CASE("oracle solves the analytic scalar toy") {
  QuadraticObjective obj;
  obj.q_block = Eigen::MatrixXd::Constant(1, 1, 1.0);
  obj.c = Eigen::MatrixXd::Constant(1, 1, 1.0);
  obj.k0 = 1.0;
  // x constrained to [-2, 0] via the ball |x + 1| <= 1; optimum x = 0, f = 1.
  ConstraintSet cons{make_point_constraint(0, Eigen::VectorXd::Constant(1, -1.0), 1.0, 1)};
  const OracleResult res = oracle_solve(obj, cons);
  CHECK(res.converged);
  CHECK(res.nodes(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("oracle output is a near-KKT point when one constraint is active") {
  std::mt19937 rng(2024);
  const Eigen::Index n = 8, d = 2;
  const Eigen::MatrixXd demo = testing::random_smooth_trajectory(rng, n, d);
  const DemonstrationSet demos({Trajectory(demo)});
  const ClusterTarget ct = build_cluster_target(demos, n);
  ElasticParams p;
  p.alpha = 0.05;
  p.beta = 0.2;
  p.gamma = ct.gamma;
  const QuadraticObjective obj = assemble_quadratic(ct.target, p);
  Eigen::VectorXd anchor = ct.target.row(3).transpose();
  anchor(0) += 0.7;
  ConstraintSet cons{make_point_constraint(3, anchor, 0.15, n)};

  const OracleResult oracle = oracle_solve(obj, cons);
  REQUIRE(oracle.converged);

  const LinearConstraintSystem sys = reformulate_l1(cons, n, d);
  SolverTolerances tol;
  tol.scale = demonstration_scale(demos);
  Solution sol = solve_qp(obj, sys, tol);
  REQUIRE(sol.status == SolveStatus::solved);
  sol.nodes = oracle.nodes;
  for (Eigen::Index k = 0; k < d; ++k) {
    sol.aux(k) = std::abs(anchor(k) - oracle.nodes(3, k));
  }
  CHECK(kkt_report(obj, sys, sol).stationarity <= 1e-4);
}

TEST_CASE("oracle reports non-convergence instead of looping or lying") {
  std::mt19937 rng(9);
  const testing::RandomInstance inst = testing::make_random_instance(rng, 6, 10, 2, 0, false);
  // A step far beyond 1/lambda_max diverges; the oracle must say so.
  const OracleResult res = oracle_solve(inst.obj, {}, 1e6, 2000);
  CHECK_FALSE(res.converged);
}

TEST_CASE("main solver and oracle agree on a randomized mini-suite") {
  std::mt19937 rng(808);
  int compared = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const testing::RandomInstance inst =
        testing::make_random_instance(rng, 5, 12, 3, 4, trial % 2 == 0);
    const OracleResult oracle = oracle_solve(inst.obj, inst.cons);
    if (!oracle.converged) {
      continue;
    }
    // Restrict to instances with at most one active constraint at the
    // oracle's answer; sequential projection is only approximate otherwise.
    int active = 0;
    for (const PointConstraint& c : inst.cons) {
      const double slack =
          c.effective_radius() -
          l1_distance(c.anchor, oracle.nodes.row(c.node_index).transpose());
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
    REQUIRE(sol.status == SolveStatus::solved);
    CHECK((sol.nodes - oracle.nodes).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(std::abs(sol.p_star - oracle.objective) <=
          1e-6 * std::max(1.0, std::abs(sol.p_star)));
    ++compared;
  }
  CHECK(compared >= 8);
}
