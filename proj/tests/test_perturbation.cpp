#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "elmap/perturbation.hpp"
#include "elmap/pipeline.hpp"
#include "support/random_instances.hpp"
#include "support/scenarios.hpp"

using namespace elmap;

namespace {

Eigen::VectorXd vec_of(double v) { return Eigen::VectorXd::Constant(1, v); }

// minimize (x - 1)^2 subject to |x| <= 0.5 + u. Analytically
// p*(u) = (0.5 - u)^2 and lambda(u) = 2 (0.5 - u) until both hit zero.
struct ScalarToy {
  QuadraticObjective obj;
  ConstraintSet cons;

  ScalarToy() {
    obj.q_block = Eigen::MatrixXd::Constant(1, 1, 1.0);
    obj.c = Eigen::MatrixXd::Constant(1, 1, 1.0);
    obj.k0 = 1.0;
    cons.push_back(make_point_constraint(0, Eigen::VectorXd::Zero(1), 0.5, 1));
  }
};

void check_monotone_convex(const PerturbationCurve& curve, double tol_mono,
                           double tol_convex) {
  std::vector<const SweepSample*> feas;
  for (const SweepSample& s : curve.samples) {
    if (s.feasible) {
      feas.push_back(&s);
    }
  }
  for (std::size_t i = 0; i + 1 < feas.size(); ++i) {
    CHECK(feas[i + 1]->p_star <= feas[i]->p_star + tol_mono);
    CHECK(feas[i + 1]->lambda <= feas[i]->lambda + 1e-6);
  }
  // Convexity: midpoint form on uniform triples, secant slopes otherwise.
  for (std::size_t i = 0; i + 2 < feas.size(); ++i) {
    const double du1 = feas[i + 1]->u - feas[i]->u;
    const double du2 = feas[i + 2]->u - feas[i + 1]->u;
    if (du1 < 1e-12 || du2 < 1e-12) {
      continue;
    }
    if (std::abs(du1 - du2) <= 1e-9 * (du1 + du2)) {
      CHECK(feas[i + 1]->p_star <=
            0.5 * (feas[i]->p_star + feas[i + 2]->p_star) + tol_mono);
    } else {
      const double s1 = (feas[i + 1]->p_star - feas[i]->p_star) / du1;
      const double s2 = (feas[i + 2]->p_star - feas[i + 1]->p_star) / du2;
      CHECK(s2 >= s1 - tol_convex);
    }
  }
}

}  // namespace

TEST_CASE("scalar toy sweep reproduces the analytic curve") {
  const ScalarToy toy;
  GridSpec grid;
  grid.initial_upper = 1.0;
  const PerturbationCurve curve = sweep(toy.obj, toy.cons, 0, grid);

  CHECK(curve.p0 == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(curve.lambda0 == doctest::Approx(1.0).epsilon(1e-6));
  for (const SweepSample& s : curve.samples) {
    REQUIRE(s.feasible);
    const double rho = 0.5 + s.u;
    const double expect_p = rho < 1.0 ? (1.0 - rho) * (1.0 - rho) : 0.0;
    const double expect_lam = rho < 1.0 ? 2.0 * (1.0 - rho) : 0.0;
    CHECK(s.p_star == doctest::Approx(expect_p).epsilon(1e-6));
    CHECK(s.lambda == doctest::Approx(expect_lam).epsilon(2e-5));
    // Sensitivity bound with the analytic p0 and lambda0: (0.5-u)^2 >= 0.25 - u.
    CHECK(s.p_star >= 0.25 - s.u - 1e-8);
  }
  CHECK(find_u_upper(curve) == doctest::Approx(0.5).epsilon(4e-3));
  check_monotone_convex(curve, 1e-8, 1e-6);

  const SensitivityReport rep = check_sensitivity_bound(curve);
  CHECK(rep.holds);
  CHECK(rep.worst_margin >= -1e-8);
  CHECK(rep.worst_margin <= 1e-7);  // bound is tight at u = 0
}

TEST_CASE("a constraint slack at u = 0 has u_upper = 0") {
  ScalarToy toy;
  toy.cons[0].radius = 3.0;  // optimum x = 1 is strictly inside
  GridSpec grid;
  grid.initial_upper = 1.0;
  const PerturbationCurve curve = sweep(toy.obj, toy.cons, 0, grid);
  CHECK(curve.lambda0 <= 1e-6);
  CHECK(find_u_upper(curve) == 0.0);
}

TEST_CASE("corrupting lambda0 breaks the sensitivity bound") {
  const ScalarToy toy;
  GridSpec grid;
  grid.initial_upper = 1.0;
  PerturbationCurve curve = sweep(toy.obj, toy.cons, 0, grid);
  REQUIRE(check_sensitivity_bound(curve).holds);
  curve.lambda0 *= 2.0;
  const SensitivityReport rep = check_sensitivity_bound(curve);
  CHECK_FALSE(rep.holds);
  CHECK(rep.worst_u < 0.0);  // tightened samples sit below the inflated bound
}

TEST_CASE("confidence scale endpoints and midpoint") {
  const double r = 0.05;
  const double u_upper = 0.45;
  CHECK(confidence_of(-r, r, u_upper).sigma_c == 0.0);
  CHECK(confidence_of(-r, r, u_upper).confidence == 1.0);
  CHECK(confidence_of(u_upper, r, u_upper).sigma_c == 1.0);
  CHECK(confidence_of(u_upper, r, u_upper).confidence == 0.0);
  const double mid = (u_upper - r) / 2.0;
  CHECK(confidence_of(mid, r, u_upper).sigma_c == doctest::Approx(0.5));
  CHECK(confidence_of(mid, r, u_upper).confidence == doctest::Approx(0.5));
  CHECK_THROWS_AS(confidence_of(-2.0 * r, r, u_upper), std::invalid_argument);
  CHECK_THROWS_AS(confidence_of(u_upper + 1.0, r, u_upper), std::invalid_argument);
  CHECK_THROWS_AS(confidence_of(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("confidence decreases strictly along the sweep") {
  const ScalarToy toy;
  GridSpec grid;
  grid.initial_upper = 1.0;
  const PerturbationCurve curve = sweep(toy.obj, toy.cons, 0, grid);
  const double u_upper = find_u_upper(curve);
  double prev = 2.0;
  for (const SweepSample& s : curve.samples) {
    if (s.u > u_upper) {
      continue;
    }
    const ConfidencePoint c = confidence_of(s.u, curve.base_radius, u_upper);
    CHECK(c.confidence < prev);
    CHECK(c.sigma_c >= 0.0);
    CHECK(c.sigma_c <= 1.0);
    prev = c.confidence;
  }
}

TEST_CASE("random elastic sweep satisfies the perturbation rules") {
  std::mt19937 rng(404);
  const testing::RandomInstance inst = testing::make_random_instance(rng, 10, 16, 2, 2, true);
  if (inst.cons.empty()) {
    return;
  }
  GridSpec grid;
  grid.sample_count = 25;
  const PerturbationCurve curve = sweep(inst.obj, inst.cons, 0, grid, inst.tolerances());
  const double pscale = std::max(1.0, std::abs(curve.p0));
  check_monotone_convex(curve, 1e-8 * pscale, 1e-5);
  CHECK(check_sensitivity_bound(curve).holds);

  // Tightening an active constraint raises p* by at least lambda0 |u|;
  // loosening lowers it by at most lambda0 u (the sensitivity bound, rearranged).
  for (const SweepSample& s : curve.samples) {
    if (!s.feasible) {
      continue;
    }
    if (s.u < 0.0) {
      CHECK(s.p_star >= curve.p0 + curve.lambda0 * (-s.u) - 1e-8 * pscale);
    } else {
      CHECK(curve.p0 - s.p_star <= curve.lambda0 * s.u + 1e-8 * pscale);
    }
  }
}

TEST_CASE("via-point sweep: strictly decreasing, then flat at the relaxed optimum") {
  const testing::ViapointScenario sc = testing::viapoint_scenario(30);
  const ClusterTarget ct = build_cluster_target(sc.demos, 30);
  ElasticParams ep = sc.params.elastic;
  ep.gamma = ct.gamma;
  const QuadraticObjective obj = assemble_quadratic(ct.target, ep);
  SolverTolerances tol;
  tol.scale = demonstration_scale(sc.demos);

  const PerturbationCurve curve = sweep(obj, sc.constraints, sc.via_index, {}, tol);
  const double u_upper = find_u_upper(curve);
  CHECK(u_upper > 0.0);
  CHECK(check_sensitivity_bound(curve).holds);

  // Strictly decreasing while the dual is alive, flat afterwards.
  const SweepSample* prev = nullptr;
  for (const SweepSample& s : curve.samples) {
    if (!s.feasible) {
      continue;
    }
    if (prev != nullptr && s.u <= u_upper && prev->lambda > 1e-4) {
      CHECK(s.p_star < prev->p_star);
    }
    if (s.u > u_upper) {
      CHECK(s.lambda <= 1e-5);
    }
    prev = &s;
  }

  // The knee sits where the via ball reaches the relaxed problem's node.
  ConstraintSet relaxed = sc.constraints;
  relaxed.erase(relaxed.begin() + static_cast<std::ptrdiff_t>(sc.via_index));
  const LinearConstraintSystem rsys =
      reformulate_l1(relaxed, 30, 2, 1e-6 * tol.scale);
  const Solution rsol = solve_qp(obj, rsys, tol);
  REQUIRE(rsol.status == SolveStatus::solved);
  const PointConstraint& via = sc.constraints[sc.via_index];
  const double expected_u_upper =
      l1_distance(via.anchor, rsol.nodes.row(via.node_index).transpose()) -
      via.radius;
  CHECK(u_upper == doctest::Approx(expected_u_upper).epsilon(0.05));

  // Past the knee the retained x*(u) families coincide with the relaxed
  // problem's reproduction.
  const SweepSample& loosest = curve.samples.back();
  REQUIRE(loosest.u > u_upper);
  CHECK((loosest.nodes - rsol.nodes).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("single-axis perturbation moves the anchor along the mask") {
  const testing::ViapointScenario sc = testing::viapoint_scenario(20);
  const ClusterTarget ct = build_cluster_target(sc.demos, 20);
  ElasticParams ep = sc.params.elastic;
  ep.gamma = ct.gamma;
  const QuadraticObjective obj = assemble_quadratic(ct.target, ep);
  SolverTolerances tol;
  tol.scale = demonstration_scale(sc.demos);

  GridSpec grid;
  grid.sample_count = 6;
  grid.initial_upper = 0.4;
  grid.max_doublings = 0;
  grid.anchor_direction = Eigen::Vector2d(0.0, -1.0);  // walk the anchor down
  const PerturbationCurve curve =
      sweep(obj, sc.constraints, sc.via_index, grid, tol);
  REQUIRE(curve.samples.size() >= 6);
  // Moving the via anchor toward the demo relaxes the pull; p* drops.
  CHECK(curve.samples.back().p_star < curve.p0);
  const Eigen::Index via_node = sc.constraints[sc.via_index].node_index;
  const double y0 = curve.samples.front().nodes(via_node, 1);
  const double y1 = curve.samples.back().nodes(via_node, 1);
  CHECK(y1 < y0);  // constrained node follows the anchor
}

TEST_CASE("conflicting tightened samples are marked infeasible and excluded") {
  // Two balls on the same node overlap at u = 0 but separate as the first
  // tightens; those samples must not poison the knee detection.
  QuadraticObjective obj;
  obj.q_block = Eigen::MatrixXd::Constant(1, 1, 1.0);
  obj.c = Eigen::MatrixXd::Constant(1, 1, 3.0);
  obj.k0 = 9.0;  // minimize (x - 3)^2
  ConstraintSet cons{make_point_constraint(0, vec_of(0.0), 1.0, 1),
                     make_point_constraint(0, vec_of(1.5), 1.0, 1)};
  GridSpec grid;
  grid.sample_count = 25;
  grid.initial_upper = 2.0;
  const PerturbationCurve curve = sweep(obj, cons, 0, grid);
  int infeasible = 0;
  for (const SweepSample& s : curve.samples) {
    if (!s.feasible) {
      CHECK(s.u < -0.5 + 1e-6);  // exactly the separating range
      ++infeasible;
    }
  }
  CHECK(infeasible > 0);
  CHECK(check_sensitivity_bound(curve).holds);
  CHECK(find_u_upper(curve) >= 0.0);
}

TEST_CASE("find_u_upper error paths") {
  PerturbationCurve empty;
  CHECK_THROWS_AS(find_u_upper(empty), std::invalid_argument);

  // Cap the range below the knee: influence looks unbounded.
  const ScalarToy toy;
  GridSpec grid;
  grid.initial_upper = 0.1;  // knee at 0.5 is outside [.., 0.1]
  grid.max_doublings = 0;
  const PerturbationCurve curve = sweep(toy.obj, toy.cons, 0, grid);
  CHECK(curve.range_capped);
  CHECK(std::isnan(curve.u_upper));
  CHECK_THROWS_AS(find_u_upper(curve), std::runtime_error);
}
