#include "config.hpp"

#include <cmath>
#include <filesystem>

#include "io.hpp"
#include "toml_lite.hpp"

namespace elmap::cli {

namespace {

const TomlValue* find(const TomlTable& t, const std::string& key) {
  const auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

void reject_unknown_keys(const TomlTable& t, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : t) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError(value.line, "unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  const TomlDoc doc = parse_toml_file(path);
  ExperimentConfig cfg;
  cfg.base_dir = std::filesystem::path(path).parent_path().string();

  reject_unknown_keys(doc.root, {}, "top level (use [sections])");

  if (const TomlTable* demos = doc.table("demos")) {
    reject_unknown_keys(*demos, {"paths", "weights"}, "[demos]");
    if (const TomlValue* v = find(*demos, "paths")) {
      cfg.demo_paths = v->as_string_array();
    }
    if (const TomlValue* v = find(*demos, "weights")) {
      cfg.demo_weights = v->as_number_array();
    }
  }
  if (cfg.demo_paths.empty()) {
    throw ConfigError(0, "config needs [demos] paths = [...]");
  }
  if (!cfg.demo_weights.empty() && cfg.demo_weights.size() != cfg.demo_paths.size()) {
    throw ConfigError(0, "[demos] weights must match paths in length");
  }

  if (const TomlTable* params = doc.table("params")) {
    reject_unknown_keys(*params, {"alpha", "beta", "nodes", "tol", "scale", "seed"},
                        "[params]");
    if (const TomlValue* v = find(*params, "alpha")) cfg.alpha = v->as_number();
    if (const TomlValue* v = find(*params, "beta")) cfg.beta = v->as_number();
    if (const TomlValue* v = find(*params, "nodes")) cfg.nodes = v->as_integer();
    if (const TomlValue* v = find(*params, "tol")) cfg.tol = v->as_number();
    if (const TomlValue* v = find(*params, "scale")) cfg.scale = v->as_number();
    if (const TomlValue* v = find(*params, "seed")) {
      cfg.seed = static_cast<std::uint64_t>(v->as_integer());
    }
  }
  if (cfg.alpha < 0.0 || cfg.beta < 0.0) {
    throw ConfigError(0, "alpha and beta must be nonnegative");
  }
  if (cfg.nodes < 3) {
    throw ConfigError(0, "nodes must be at least 3");
  }
  if (cfg.tol <= 0.0) {
    throw ConfigError(0, "tol must be positive");
  }

  if (const TomlTable* endpoints = doc.table("endpoints")) {
    reject_unknown_keys(*endpoints, {"pin"}, "[endpoints]");
    if (const TomlValue* v = find(*endpoints, "pin")) {
      cfg.pin_endpoints = v->as_bool();
    }
  }

  if (const auto* list = doc.list("constraint")) {
    for (const TomlTable& t : *list) {
      reject_unknown_keys(t, {"index", "t", "y", "r", "kind"}, "[[constraint]]");
      ConstraintSpec spec;
      if (const TomlValue* v = find(t, "index")) spec.index = v->as_integer();
      if (const TomlValue* v = find(t, "t")) spec.t = v->as_number();
      if (spec.index.has_value() == spec.t.has_value()) {
        throw ConfigError(0, "each [[constraint]] needs exactly one of index or t");
      }
      if (spec.t && (*spec.t < 0.0 || *spec.t > 1.0)) {
        throw ConfigError(0, "constraint t must lie in [0, 1]");
      }
      const TomlValue* y = find(t, "y");
      if (y == nullptr) {
        throw ConfigError(0, "[[constraint]] needs an anchor y = [...]");
      }
      spec.anchor = y->as_number_array();
      if (const TomlValue* v = find(t, "r")) spec.radius = v->as_number();
      if (spec.radius < 0.0) {
        throw ConfigError(0, "constraint radius must be nonnegative");
      }
      if (const TomlValue* v = find(t, "kind")) spec.kind = v->as_string();
      if (spec.kind != "via" && spec.kind != "endpoint") {
        throw ConfigError(0, "constraint kind must be via or endpoint");
      }
      cfg.constraints.push_back(std::move(spec));
    }
  }

  if (const auto* list = doc.list("obstacle")) {
    for (const TomlTable& t : *list) {
      reject_unknown_keys(t, {"path", "center", "radius", "samples"}, "[[obstacle]]");
      ObstacleSpec spec;
      if (const TomlValue* v = find(t, "path")) spec.path = v->as_string();
      if (const TomlValue* v = find(t, "center")) spec.center = v->as_number_array();
      if (const TomlValue* v = find(t, "radius")) spec.radius = v->as_number();
      if (const TomlValue* v = find(t, "samples")) spec.samples = v->as_integer();
      const bool is_cloud = !spec.path.empty();
      const bool is_circle = !spec.center.empty();
      if (is_cloud == is_circle) {
        throw ConfigError(0, "each [[obstacle]] needs either path or center+radius");
      }
      if (is_circle) {
        if (spec.center.size() != 2) {
          throw ConfigError(0, "circle obstacles are two-dimensional");
        }
        if (spec.radius <= 0.0 || spec.samples < 3) {
          throw ConfigError(0, "circle obstacles need radius > 0 and samples >= 3");
        }
      }
      cfg.obstacles.push_back(std::move(spec));
    }
  }

  if (const TomlTable* sweep = doc.table("sweep")) {
    reject_unknown_keys(
        *sweep, {"target", "samples", "eps_lambda", "initial_upper", "max_doublings"},
        "[sweep]");
    SweepSpec spec;
    if (const TomlValue* v = find(*sweep, "target")) spec.target = v->as_integer();
    if (const TomlValue* v = find(*sweep, "samples")) spec.samples = v->as_integer();
    if (const TomlValue* v = find(*sweep, "eps_lambda")) {
      spec.eps_lambda = v->as_number();
    }
    if (const TomlValue* v = find(*sweep, "initial_upper")) {
      spec.initial_upper = v->as_number();
    }
    if (const TomlValue* v = find(*sweep, "max_doublings")) {
      spec.max_doublings = v->as_integer();
    }
    // The target indexes the assembled constraint list (config constraints,
    // then endpoint pins, then generated obstacle constraints); the full
    // range is only known after assembly, so the upper bound is checked there.
    if (spec.target < 0) {
      throw ConfigError(0, "[sweep] target must be nonnegative");
    }
    if (spec.samples < 3) {
      throw ConfigError(0, "[sweep] samples must be at least 3");
    }
    cfg.sweep = spec;
  }

  if (const TomlTable* family = doc.table("family")) {
    reject_unknown_keys(*family, {"levels", "sigma_s"}, "[family]");
    if (const TomlValue* v = find(*family, "levels")) {
      cfg.family_levels = v->as_number_array();
    }
    if (const TomlValue* v = find(*family, "sigma_s")) {
      cfg.sigma_s = v->as_number();
    }
  }
  for (double level : cfg.family_levels) {
    if (level < 0.0 || level > 1.0) {
      throw ConfigError(0, "family levels must lie in [0, 1]");
    }
  }
  if (cfg.sigma_s && (*cfg.sigma_s < 0.0 || *cfg.sigma_s > 1.0)) {
    throw ConfigError(0, "sigma_s must lie in [0, 1]");
  }

  if (const TomlTable* output = doc.table("output")) {
    reject_unknown_keys(*output, {"dir"}, "[output]");
    if (const TomlValue* v = find(*output, "dir")) {
      cfg.output_dir = v->as_string();
    }
  }
  return cfg;
}

Eigen::Index node_from_parameter(double t, Eigen::Index n) {
  return static_cast<Eigen::Index>(
      std::lround(t * static_cast<double>(n - 1)));
}

namespace {

Eigen::MatrixXd sample_circle(const ObstacleSpec& spec) {
  Eigen::MatrixXd cloud(spec.samples, 2);
  for (long i = 0; i < spec.samples; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * static_cast<double>(i) /
                     static_cast<double>(spec.samples);
    cloud(i, 0) = spec.center[0] + spec.radius * std::cos(a);
    cloud(i, 1) = spec.center[1] + spec.radius * std::sin(a);
  }
  return cloud;
}

std::string resolve(const std::string& base, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base.empty()) {
    return path;
  }
  return (std::filesystem::path(base) / p).string();
}

}  // namespace

ProblemSetup build_setup(const ExperimentConfig& cfg) {
  std::vector<Trajectory> all;
  for (std::size_t i = 0; i < cfg.demo_paths.size(); ++i) {
    DemonstrationSet loaded =
        load_demonstrations(resolve(cfg.base_dir, cfg.demo_paths[i]));
    for (const Trajectory& t : loaded.demos()) {
      if (cfg.demo_weights.empty()) {
        all.push_back(t);
      } else {
        all.emplace_back(t.points(), t.weights() * cfg.demo_weights[i]);
      }
    }
  }
  DemonstrationSet demos(std::move(all));
  const Eigen::Index d = demos.dim();
  const Eigen::Index n = cfg.nodes;

  ConstraintSet cons;
  for (const ConstraintSpec& spec : cfg.constraints) {
    const Eigen::Index j =
        spec.index ? static_cast<Eigen::Index>(*spec.index)
                   : node_from_parameter(*spec.t, n);
    if (static_cast<Eigen::Index>(spec.anchor.size()) != d) {
      throw ConfigError(0, "constraint anchor dimension does not match the demos");
    }
    Eigen::VectorXd y(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      y(k) = spec.anchor[static_cast<std::size_t>(k)];
    }
    cons.push_back(make_point_constraint(
        j, y, spec.radius, n,
        spec.kind == "endpoint" ? ConstraintKind::endpoint : ConstraintKind::via));
  }

  ObstacleSet obstacles;
  for (const ObstacleSpec& spec : cfg.obstacles) {
    if (!spec.path.empty()) {
      obstacles.add(load_point_cloud(resolve(cfg.base_dir, spec.path)));
    } else {
      if (d != 2) {
        throw ConfigError(0, "circle obstacles need two-dimensional demos");
      }
      obstacles.add(sample_circle(spec));
    }
  }

  PipelineParams params;
  params.elastic.alpha = cfg.alpha;
  params.elastic.beta = cfg.beta;
  params.elastic.node_count = n;
  params.tol.kkt = params.tol.feas = params.tol.comp_slack = cfg.tol;
  params.tol.scale = cfg.scale;
  params.pin_endpoints = cfg.pin_endpoints;
  params.sigma_s = cfg.sigma_s;

  return ProblemSetup{std::move(demos), std::move(obstacles), std::move(cons),
                      std::move(params)};
}

}  // namespace elmap::cli
