#include "elmap/energy.hpp"

#include <stdexcept>

namespace elmap {

void ElasticParams::validate() const {
  if (alpha < 0.0 || beta < 0.0) {
    throw std::invalid_argument("alpha and beta must be nonnegative");
  }
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("gamma must be positive");
  }
  if (node_count < 3) {
    throw std::invalid_argument("node_count must be >= 3");
  }
}

double QuadraticObjective::value(const Eigen::MatrixXd& x) const {
  if (x.rows() != q_block.rows() || x.cols() != c.cols()) {
    throw std::invalid_argument("objective: node matrix shape mismatch");
  }
  double v = k0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    v += x.col(k).dot(q_block * x.col(k)) - 2.0 * c.col(k).dot(x.col(k));
  }
  return v;
}

Eigen::MatrixXd QuadraticObjective::gradient(const Eigen::MatrixXd& x) const {
  return 2.0 * (q_block * x - c);
}

Eigen::MatrixXd QuadraticObjective::full_matrix() const {
  const Eigen::Index n = q_block.rows();
  const Eigen::Index d = c.cols();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    full.block(k * n, k * n, n, n) = q_block;
  }
  return full;
}

Eigen::MatrixXd build_edge_matrix(Eigen::Index n) {
  if (n < 2) {
    throw std::invalid_argument("edge matrix needs n >= 2");
  }
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n - 1, n);
  for (Eigen::Index i = 0; i < n - 1; ++i) {
    e(i, i) = -1.0;
    e(i, i + 1) = 1.0;
  }
  return e;
}

Eigen::MatrixXd build_rib_matrix(Eigen::Index n) {
  if (n < 3) {
    throw std::invalid_argument("rib matrix needs n >= 3");
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n - 2, n);
  for (Eigen::Index i = 0; i < n - 2; ++i) {
    r(i, i) = 1.0;
    r(i, i + 1) = -2.0;
    r(i, i + 2) = 1.0;
  }
  return r;
}

ClusterTarget build_cluster_target(const DemonstrationSet& demos, Eigen::Index n) {
  const Eigen::Index d = demos.dim();
  Eigen::MatrixXd weighted_sum = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(n);
  double total_weight = 0.0;
  for (const Trajectory& demo : demos.demos()) {
    const Trajectory res = resample(demo, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      weighted_sum.row(i) += res.weights()(i) * res.points().row(i);
      weight_sum(i) += res.weights()(i);
    }
    total_weight += res.weights().sum();
  }
  ClusterTarget out;
  out.target.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.target.row(i) = weighted_sum.row(i) / weight_sum(i);
  }
  out.gamma = 1.0 / total_weight;
  return out;
}

Energies evaluate_energies(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                           const ElasticParams& params) {
  if (x.rows() != target.rows() || x.cols() != target.cols()) {
    throw std::invalid_argument("evaluate_energies: shape mismatch");
  }
  const Eigen::Index n = x.rows();
  Energies u;
  u.fit = params.gamma * (x - target).squaredNorm();
  u.stretch = params.alpha * (build_edge_matrix(n) * x).squaredNorm();
  u.bend = n >= 3 ? params.beta * (build_rib_matrix(n) * x).squaredNorm() : 0.0;
  return u;
}

QuadraticObjective assemble_quadratic(const Eigen::MatrixXd& target,
                                      const ElasticParams& params) {
  const Eigen::Index n = target.rows();
  if (n < 2) {
    throw std::invalid_argument("assemble_quadratic needs >= 2 nodes");
  }
  if (params.alpha < 0.0 || params.beta < 0.0 || params.gamma < 0.0) {
    throw std::invalid_argument("elastic coefficients must be nonnegative");
  }
  QuadraticObjective obj;
  const Eigen::MatrixXd e = build_edge_matrix(n);
  obj.q_block = params.gamma * Eigen::MatrixXd::Identity(n, n) +
                params.alpha * e.transpose() * e;
  if (n >= 3) {
    const Eigen::MatrixXd r = build_rib_matrix(n);
    obj.q_block += params.beta * r.transpose() * r;
  }
  obj.c = params.gamma * target;
  obj.k0 = params.gamma * target.squaredNorm();
  return obj;
}

Eigen::MatrixXd solve_unconstrained(const QuadraticObjective& obj) {
  Eigen::LLT<Eigen::MatrixXd> llt(obj.q_block);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_unconstrained: Q is not positive definite");
  }
  return llt.solve(obj.c);
}

}  // namespace elmap
