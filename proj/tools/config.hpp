#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "elmap/constraints.hpp"
#include "elmap/pipeline.hpp"
#include "elmap/trajectory.hpp"

namespace elmap::cli {

struct ConstraintSpec {
  std::optional<long> index;     // node index, or
  std::optional<double> t;       // normalized position in [0, 1]
  std::vector<double> anchor;    // y
  double radius = 0.0;           // r
  std::string kind = "via";      // via | endpoint
};

struct ObstacleSpec {
  std::string path;              // point-cloud CSV, or
  std::vector<double> center;    // circle spec (2d only)
  double radius = 0.0;
  long samples = 64;
};

struct SweepSpec {
  long target = 0;               // index into the constraint list
  long samples = 50;
  double eps_lambda = 1e-6;
  double initial_upper = 0.0;    // 0 = auto
  long max_doublings = 4;
};

struct ExperimentConfig {
  std::vector<std::string> demo_paths;
  std::vector<double> demo_weights;  // optional per-demo scale factors

  double alpha = 0.01;
  double beta = 0.1;
  long nodes = 100;
  double tol = 1e-8;
  double scale = 0.0;  // 0 = auto from the demo bounding box
  std::uint64_t seed = 0;
  bool pin_endpoints = false;

  std::vector<ConstraintSpec> constraints;
  std::vector<ObstacleSpec> obstacles;
  std::optional<SweepSpec> sweep;
  std::vector<double> family_levels;
  std::optional<double> sigma_s;

  std::string output_dir = "out";
  std::string base_dir;  // directory of the config file, for relative paths
};

/// Parse and schema-check a config file. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);

/// Everything reproduce()/sweep() needs, assembled from a config.
struct ProblemSetup {
  DemonstrationSet demos;
  ObstacleSet obstacles;
  ConstraintSet constraints;  // user constraints, config order
  PipelineParams params;
};

ProblemSetup build_setup(const ExperimentConfig& config);

/// Maps t in [0, 1] to round(t * (n - 1)).
Eigen::Index node_from_parameter(double t, Eigen::Index n);

}  // namespace elmap::cli
