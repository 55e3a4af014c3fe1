#include "elmap/trajectory.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace elmap {

namespace {

void validate_points(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) {
    throw std::invalid_argument("Trajectory needs at least 2 points");
  }
  if (points.cols() < 1) {
    throw std::invalid_argument("Trajectory points need dimension >= 1");
  }
  if (!points.allFinite()) {
    throw std::invalid_argument("Trajectory points must be finite");
  }
}

}  // namespace

Trajectory::Trajectory(Eigen::MatrixXd points)
    : points_(std::move(points)),
      weights_(Eigen::VectorXd::Ones(points_.rows())) {
  validate_points(points_);
}

Trajectory::Trajectory(Eigen::MatrixXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  validate_points(points_);
  if (weights_.size() != points_.rows()) {
    throw std::invalid_argument("weight count must match point count");
  }
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("weights must be nonnegative");
  }
  if (weights_.sum() <= 0.0) {
    throw std::invalid_argument("at least one weight must be positive");
  }
}

bool Trajectory::degenerate() const { return arc_length(*this) == 0.0; }

DemonstrationSet::DemonstrationSet(std::vector<Trajectory> demos)
    : demos_(std::move(demos)) {
  if (demos_.empty()) {
    throw std::invalid_argument("DemonstrationSet needs at least one demo");
  }
  const Eigen::Index d = demos_.front().dim();
  for (const Trajectory& t : demos_) {
    if (t.dim() != d) {
      throw std::invalid_argument("all demonstrations must share one dimension");
    }
  }
}

double arc_length(const Trajectory& traj) {
  const Eigen::MatrixXd& p = traj.points();
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < p.rows(); ++i) {
    total += (p.row(i + 1) - p.row(i)).norm();
  }
  return total;
}

Trajectory resample(const Trajectory& traj, Eigen::Index n) {
  if (n < 2) {
    throw std::invalid_argument("resample needs n >= 2");
  }
  const Eigen::MatrixXd& p = traj.points();
  const Eigen::VectorXd& w = traj.weights();
  const Eigen::Index m = p.rows();
  const Eigen::Index d = p.cols();

  // Cumulative arc length at each vertex.
  Eigen::VectorXd cum(m);
  cum(0) = 0.0;
  for (Eigen::Index i = 1; i < m; ++i) {
    cum(i) = cum(i - 1) + (p.row(i) - p.row(i - 1)).norm();
  }
  const double total = cum(m - 1);

  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd out_w(n);
  if (total == 0.0) {
    // Degenerate: every vertex coincides.
    out = p.row(0).replicate(n, 1);
    out_w.setConstant(w(0));
    return Trajectory(std::move(out), std::move(out_w));
  }

  Eigen::Index seg = 0;  // current segment index, advances monotonically
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 2 < m && cum(seg + 1) <= s) {
      ++seg;
    }
    // Skip zero-length segments so interpolation stays well defined.
    while (seg + 2 < m && cum(seg + 1) == cum(seg)) {
      ++seg;
    }
    const double len = cum(seg + 1) - cum(seg);
    const double t = len > 0.0 ? (s - cum(seg)) / len : 0.0;
    if (t <= 0.0) {
      out.row(k) = p.row(seg);
      out_w(k) = w(seg);
    } else if (t >= 1.0) {
      out.row(k) = p.row(seg + 1);
      out_w(k) = w(seg + 1);
    } else {
      out.row(k) = (1.0 - t) * p.row(seg) + t * p.row(seg + 1);
      out_w(k) = (1.0 - t) * w(seg) + t * w(seg + 1);
    }
  }
  // Endpoints bit-exact.
  out.row(0) = p.row(0);
  out.row(n - 1) = p.row(m - 1);
  out_w(0) = w(0);
  out_w(n - 1) = w(m - 1);
  return Trajectory(std::move(out), std::move(out_w));
}

double l1_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l1_distance: dimension mismatch");
  }
  return (a - b).cwiseAbs().sum();
}

}  // namespace elmap
