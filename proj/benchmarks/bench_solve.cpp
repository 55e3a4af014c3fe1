#include <benchmark/benchmark.h>

#include <cmath>

#include "elmap/perturbation.hpp"
#include "elmap/pipeline.hpp"
#include "elmap/qp.hpp"
#include "elmap/reference_oracle.hpp"

namespace {

using namespace elmap;

constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd arc_demo(Eigen::Index points, double height) {
  Eigen::MatrixXd demo(points, 2);
  for (Eigen::Index i = 0; i < points; ++i) {
    const double t = 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
    demo(i, 0) = t;
    demo(i, 1) = height * std::sin(kPi * t / 2.0);
  }
  return demo;
}

struct Problem {
  QuadraticObjective obj;
  ConstraintSet cons;
  SolverTolerances tol;
};

Problem make_problem(Eigen::Index n, int constraints) {
  const DemonstrationSet demos({Trajectory(arc_demo(80, 0.3))});
  const ClusterTarget ct = build_cluster_target(demos, n);
  ElasticParams params;
  params.alpha = 0.01;
  params.beta = 0.1;
  params.gamma = ct.gamma;
  params.node_count = n;
  Problem p;
  p.obj = assemble_quadratic(ct.target, params);
  p.tol.scale = demonstration_scale(demos);
  for (int c = 0; c < constraints; ++c) {
    const Eigen::Index j = (c + 1) * n / (constraints + 1);
    Eigen::VectorXd anchor = ct.target.row(j).transpose();
    anchor(1) += 0.4;
    p.cons.push_back(make_point_constraint(j, anchor, 0.05, n));
  }
  return p;
}

void BM_AssembleQuadratic(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const DemonstrationSet demos({Trajectory(arc_demo(80, 0.3))});
  const ClusterTarget ct = build_cluster_target(demos, n);
  ElasticParams params;
  params.gamma = ct.gamma;
  params.node_count = n;
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_quadratic(ct.target, params));
  }
}
BENCHMARK(BM_AssembleQuadratic)->Arg(25)->Arg(50)->Arg(100)->Arg(200);

void BM_SolveUnconstrained(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_unconstrained(p.obj));
  }
}
BENCHMARK(BM_SolveUnconstrained)->Arg(25)->Arg(50)->Arg(100)->Arg(200);

void BM_SolveConstrained(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 3);
  const LinearConstraintSystem sys =
      reformulate_l1(p.cons, p.obj.nodes(), p.obj.dim(), 1e-6 * p.tol.scale);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_qp(p.obj, sys, p.tol));
  }
}
BENCHMARK(BM_SolveConstrained)->Arg(25)->Arg(50)->Arg(100);

void BM_Sweep(benchmark::State& state) {
  const Problem p = make_problem(30, 1);
  GridSpec grid;
  grid.sample_count = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sweep(p.obj, p.cons, 0, grid, p.tol));
  }
}
BENCHMARK(BM_Sweep)->Arg(10)->Arg(25);

void BM_L1BallProject(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  Eigen::VectorXd point(d), center(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    point(k) = std::sin(1.3 * static_cast<double>(k) + 0.7) * 2.0;
    center(k) = 0.1 * static_cast<double>(k % 3);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(l1_ball_project(point, center, 0.5));
  }
}
BENCHMARK(BM_L1BallProject)->Arg(2)->Arg(3)->Arg(16);

void BM_OracleSolve(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle_solve(p.obj, p.cons));
  }
}
BENCHMARK(BM_OracleSolve)->Arg(12)->Arg(25);

}  // namespace

BENCHMARK_MAIN();
