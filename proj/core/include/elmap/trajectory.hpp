#pragma once

#include <Eigen/Dense>

#include <vector>

namespace elmap {

/// An ordered sequence of d-dimensional points with per-point weights.
/// Points are stored row-wise (one point per row, columns are dimensions).
class Trajectory {
public:
  /// Uniform unit weights.
  explicit Trajectory(Eigen::MatrixXd points);
  Trajectory(Eigen::MatrixXd points, Eigen::VectorXd weights);

  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  Eigen::VectorXd point(Eigen::Index i) const { return points_.row(i).transpose(); }

  /// True when all points coincide (zero arc length). Such trajectories are
  /// accepted but downstream consumers may want to know.
  bool degenerate() const;

private:
  Eigen::MatrixXd points_;
  Eigen::VectorXd weights_;
};

/// One or more demonstrations of a common dimension.
class DemonstrationSet {
public:
  explicit DemonstrationSet(std::vector<Trajectory> demos);

  const std::vector<Trajectory>& demos() const { return demos_; }
  std::size_t count() const { return demos_.size(); }
  Eigen::Index dim() const { return demos_.front().dim(); }

private:
  std::vector<Trajectory> demos_;
};

/// Total Euclidean length of the polyline through the trajectory's points.
double arc_length(const Trajectory& traj);

/// Resample to n points at equal arc-length spacing along the piecewise-linear
/// input. Endpoints are preserved exactly; weights are linearly interpolated.
/// A zero-arc-length input yields n copies of the single point.
Trajectory resample(const Trajectory& traj, Eigen::Index n);

/// Sum of absolute coordinate differences. Throws on dimension mismatch.
double l1_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace elmap
