#include "runner.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "config.hpp"
#include "elmap/perturbation.hpp"
#include "elmap/pipeline.hpp"
#include "io.hpp"
#include "toml_lite.hpp"

namespace elmap::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

ExperimentConfig load_with_overrides(const RunOptions& options) {
  ExperimentConfig cfg = load_config(options.config_path);
  if (!options.out_dir.empty()) {
    cfg.output_dir = options.out_dir;
  }
  if (options.sigma_s) {
    cfg.sigma_s = *options.sigma_s;
  }
  if (!options.levels.empty()) {
    cfg.family_levels = options.levels;
  }
  if (options.seed) {
    cfg.seed = *options.seed;
  }
  if (options.tol) {
    cfg.tol = *options.tol;
  }
  return cfg;
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

ordered_json nodes_to_json(const Eigen::MatrixXd& nodes) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index k = 0; k < nodes.cols(); ++k) {
      row.push_back(nodes(i, k));
    }
    out.push_back(std::move(row));
  }
  return out;
}

const char* kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::via: return "via";
    case ConstraintKind::endpoint: return "endpoint";
    case ConstraintKind::obstacle: return "obstacle";
  }
  return "via";
}

ordered_json constraint_to_json(std::size_t id, const PointConstraint& c) {
  ordered_json out;
  out["id"] = id;
  out["kind"] = kind_name(c.kind);
  out["node_index"] = c.node_index;
  ordered_json anchor = ordered_json::array();
  for (Eigen::Index k = 0; k < c.anchor.size(); ++k) {
    anchor.push_back(c.anchor(k));
  }
  out["anchor"] = std::move(anchor);
  out["radius"] = c.radius;
  out["perturbation"] = c.perturbation;
  return out;
}

ordered_json kkt_to_json(const KktReport& rep) {
  return ordered_json{{"stationarity", rep.stationarity},
                      {"feasibility", rep.feasibility},
                      {"slackness", rep.slackness},
                      {"gap_abs", rep.gap_abs},
                      {"gap_rel", rep.gap_rel}};
}

ordered_json energies_to_json(const Energies& u) {
  return ordered_json{{"fit", u.fit},
                      {"stretch", u.stretch},
                      {"bend", u.bend},
                      {"total", u.total()}};
}

void write_json(const fs::path& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError(0, "cannot write '" + path.string() + "'");
  }
  out << doc.dump(2) << "\n";
}

void write_nodes_csv(const fs::path& path, const Eigen::MatrixXd& nodes,
                     const std::string& index_name) {
  std::ofstream out(path);
  out << index_name;
  for (Eigen::Index k = 0; k < nodes.cols(); ++k) {
    out << ",x" << k;
  }
  out << "\n";
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    out << i;
    for (Eigen::Index k = 0; k < nodes.cols(); ++k) {
      out << "," << format_double(nodes(i, k));
    }
    out << "\n";
  }
}

double reproduction_margin(const Reproduction& rep, const ObstacleSet& obstacles) {
  if (obstacles.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < rep.nodes.rows(); ++j) {
    margin = std::min(
        margin,
        closest_obstacle_point(rep.nodes.row(j).transpose(), obstacles).distance);
  }
  return margin;
}

ordered_json solution_to_json(const ExperimentConfig& cfg, const Reproduction& rep) {
  ordered_json doc;
  doc["mode"] = "solve";
  doc["seed"] = cfg.seed;
  doc["scale"] = rep.scale;
  doc["status"] = "solved";
  doc["p_star"] = rep.solution.p_star;
  doc["d_star"] = rep.solution.d_star;
  doc["gap"] = rep.solution.gap;
  doc["nodes"] = nodes_to_json(rep.nodes);
  doc["energies"] = energies_to_json(rep.energies);
  doc["kkt"] = kkt_to_json(rep.kkt);

  // Full-problem constraints with their duals; pruned entries carry zero.
  ordered_json lambda = ordered_json::array();
  std::size_t active_pos = 0;
  std::vector<bool> pruned(rep.all_constraints.size(), false);
  for (std::size_t id : rep.pruned_ids) {
    pruned[id] = true;
  }
  for (std::size_t i = 0; i < rep.all_constraints.size(); ++i) {
    ordered_json entry = constraint_to_json(i, rep.all_constraints[i]);
    entry["pruned"] = static_cast<bool>(pruned[i]);
    entry["lambda"] = pruned[i] ? 0.0 : rep.solution.lambda[active_pos++];
    lambda.push_back(std::move(entry));
  }
  doc["lambda"] = std::move(lambda);
  doc["pruned_constraint_ids"] = rep.pruned_ids;
  doc["constraint_count"] = ordered_json{{"total", rep.all_constraints.size()},
                                         {"retained", rep.active_constraints.size()}};
  return doc;
}

void write_solve_plotdata(const fs::path& dir, const ProblemSetup& setup,
                          const Reproduction& rep) {
  write_nodes_csv(dir / "plot_reproduction.csv", rep.nodes, "node");
  write_nodes_csv(dir / "plot_target.csv", rep.target, "node");
  for (std::size_t k = 0; k < setup.demos.count(); ++k) {
    write_nodes_csv(dir / ("plot_demo_" + std::to_string(k) + ".csv"),
                    setup.demos.demos()[k].points(), "point");
  }
  std::ofstream out(dir / "plot_constraints.csv");
  out << "id,kind,node_index,radius,effective_radius";
  const Eigen::Index d = rep.target.cols();
  for (Eigen::Index k = 0; k < d; ++k) {
    out << ",y" << k;
  }
  out << "\n";
  for (std::size_t i = 0; i < rep.all_constraints.size(); ++i) {
    const PointConstraint& c = rep.all_constraints[i];
    out << i << "," << kind_name(c.kind) << "," << c.node_index << ","
        << format_double(c.radius) << "," << format_double(c.effective_radius());
    for (Eigen::Index k = 0; k < d; ++k) {
      out << "," << format_double(c.anchor(k));
    }
    out << "\n";
  }
}

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    std::cerr << "certificate rows (lam >= 0, lam'A = 0, lam'b < 0):";
    for (Eigen::Index i = 0; i < e.certificate().size(); ++i) {
      if (e.certificate()(i) > 1e-9) {
        std::cerr << " " << i << ":" << format_double(e.certificate()(i));
      }
    }
    std::cerr << "\n";
    return kExitInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverError;
  }
}

}  // namespace

int run_solve(const RunOptions& options) {
  return guard([&]() {
    const ExperimentConfig cfg = load_with_overrides(options);
    const ProblemSetup setup = build_setup(cfg);
    const fs::path dir = prepare_out_dir(cfg);
    const Reproduction rep =
        reproduce(setup.demos, setup.constraints,
                  setup.obstacles.empty() ? nullptr : &setup.obstacles, setup.params);
    write_json(dir / "solution.json", solution_to_json(cfg, rep));
    write_solve_plotdata(dir, setup, rep);
    std::cout << "solve: p* = " << format_double(rep.solution.p_star) << ", gap = "
              << format_double(rep.solution.gap) << ", retained "
              << rep.active_constraints.size() << "/" << rep.all_constraints.size()
              << " constraints -> " << (dir / "solution.json").string() << "\n";
    return kExitOk;
  });
}

int run_sweep(const RunOptions& options) {
  return guard([&]() {
    const ExperimentConfig cfg = load_with_overrides(options);
    if (!cfg.sweep) {
      throw ConfigError(0, "sweep mode needs a [sweep] section");
    }
    const ProblemSetup setup = build_setup(cfg);
    const fs::path dir = prepare_out_dir(cfg);

    const AssembledProblem prob =
        assemble_problem(setup.demos, setup.constraints,
                         setup.obstacles.empty() ? nullptr : &setup.obstacles,
                         setup.params);
    GridSpec grid;
    grid.sample_count = static_cast<int>(cfg.sweep->samples);
    grid.eps_lambda = cfg.sweep->eps_lambda;
    grid.initial_upper = cfg.sweep->initial_upper;
    grid.max_doublings = static_cast<int>(cfg.sweep->max_doublings);
    const std::size_t target = static_cast<std::size_t>(cfg.sweep->target);
    if (target >= prob.constraints.size()) {
      throw ConfigError(0, "[sweep] target " + std::to_string(target) +
                               " is out of range; the assembled problem has " +
                               std::to_string(prob.constraints.size()) +
                               " constraints");
    }

    const PerturbationCurve curve =
        sweep(prob.objective, prob.constraints, target, grid, prob.tol);
    const SensitivityReport sens = check_sensitivity_bound(curve);

    double u_upper = std::numeric_limits<double>::quiet_NaN();
    std::string u_upper_error;
    try {
      u_upper = find_u_upper(curve, grid.eps_lambda);
    } catch (const std::exception& e) {
      u_upper_error = e.what();
    }

    ordered_json doc;
    doc["mode"] = "sweep";
    doc["seed"] = cfg.seed;
    doc["constraint"] =
        constraint_to_json(target, prob.constraints[target]);
    doc["p0"] = curve.p0;
    doc["lambda0"] = curve.lambda0;
    doc["u_lower"] = curve.u_lower;
    doc["u_limit"] = curve.u_limit;
    doc["range_capped"] = curve.range_capped;
    if (std::isnan(u_upper)) {
      doc["u_upper"] = nullptr;
      doc["u_upper_error"] = u_upper_error;
    } else {
      doc["u_upper"] = u_upper;
    }

    ordered_json samples = ordered_json::array();
    ordered_json margins = ordered_json::array();
    ordered_json confidence = ordered_json::array();
    for (const SweepSample& s : curve.samples) {
      ordered_json entry;
      entry["u"] = s.u;
      entry["p_star"] = s.p_star;
      entry["lambda"] = s.lambda;
      entry["feasible"] = s.feasible;
      entry["nodes"] = nodes_to_json(s.nodes);
      samples.push_back(std::move(entry));
      if (s.feasible) {
        margins.push_back(ordered_json{
            {"u", s.u},
            {"margin", s.p_star - (curve.p0 - curve.lambda0 * s.u)}});
        if (!std::isnan(u_upper) && s.u <= u_upper + 1e-15) {
          const ConfidencePoint c = confidence_of(
              std::max(s.u, -curve.base_radius), curve.base_radius, u_upper);
          confidence.push_back(ordered_json{
              {"u", s.u}, {"sigma_c", c.sigma_c}, {"confidence", c.confidence}});
        }
      }
    }
    doc["samples"] = std::move(samples);
    doc["sensitivity"] = ordered_json{{"holds", sens.holds},
                                      {"worst_margin", sens.worst_margin},
                                      {"worst_u", sens.worst_u},
                                      {"margins", std::move(margins)}};
    doc["confidence"] = std::move(confidence);
    write_json(dir / "curve.json", doc);

    {
      std::ofstream out(dir / "plot_curve.csv");
      out << "u,p_star,lambda,bound,feasible\n";
      for (const SweepSample& s : curve.samples) {
        out << format_double(s.u) << "," << format_double(s.p_star) << ","
            << format_double(s.lambda) << ","
            << format_double(curve.p0 - curve.lambda0 * s.u) << ","
            << (s.feasible ? 1 : 0) << "\n";
      }
    }
    {
      std::ofstream out(dir / "plot_reproductions.csv");
      out << "u,confidence,node";
      for (Eigen::Index k = 0; k < prob.target.cols(); ++k) {
        out << ",x" << k;
      }
      out << "\n";
      for (const SweepSample& s : curve.samples) {
        if (!s.feasible) {
          continue;
        }
        double conf = std::numeric_limits<double>::quiet_NaN();
        if (!std::isnan(u_upper) && s.u <= u_upper + 1e-15) {
          conf = confidence_of(std::max(s.u, -curve.base_radius), curve.base_radius,
                               u_upper)
                     .confidence;
        }
        for (Eigen::Index j = 0; j < s.nodes.rows(); ++j) {
          out << format_double(s.u) << "," << format_double(conf) << "," << j;
          for (Eigen::Index k = 0; k < s.nodes.cols(); ++k) {
            out << "," << format_double(s.nodes(j, k));
          }
          out << "\n";
        }
      }
    }
    std::cout << "sweep: " << curve.samples.size() << " samples, lambda0 = "
              << format_double(curve.lambda0) << ", u_upper = "
              << (std::isnan(u_upper) ? std::string("n/a") : format_double(u_upper))
              << ", sensitivity bound " << (sens.holds ? "holds" : "VIOLATED") << " -> "
              << (dir / "curve.json").string() << "\n";
    return kExitOk;
  });
}

int run_family(const RunOptions& options) {
  return guard([&]() {
    const ExperimentConfig cfg = load_with_overrides(options);
    if (cfg.family_levels.empty()) {
      throw ConfigError(0, "family mode needs [family] levels or --levels");
    }
    const ProblemSetup setup = build_setup(cfg);
    if (setup.obstacles.empty()) {
      throw ConfigError(0, "family mode needs at least one [[obstacle]]");
    }
    const fs::path dir = prepare_out_dir(cfg);

    const std::vector<Reproduction> family =
        confidence_family(setup.demos, setup.obstacles, cfg.family_levels,
                          setup.params, setup.constraints);

    ordered_json doc;
    doc["mode"] = "family";
    doc["seed"] = cfg.seed;
    doc["levels"] = cfg.family_levels;
    ordered_json members = ordered_json::array();
    for (std::size_t i = 0; i < family.size(); ++i) {
      const Reproduction& rep = family[i];
      ordered_json member;
      member["sigma_s"] = cfg.family_levels[i];
      member["confidence"] = cfg.family_levels[i];
      member["p_star"] = rep.solution.p_star;
      member["d_star"] = rep.solution.d_star;
      member["gap"] = rep.solution.gap;
      member["margin"] = reproduction_margin(rep, setup.obstacles);
      member["energies"] = energies_to_json(rep.energies);
      member["kkt"] = kkt_to_json(rep.kkt);
      member["constraint_count"] =
          ordered_json{{"total", rep.all_constraints.size()},
                       {"retained", rep.active_constraints.size()}};
      member["nodes"] = nodes_to_json(rep.nodes);
      members.push_back(std::move(member));
    }
    doc["members"] = std::move(members);
    write_json(dir / "family.json", doc);

    {
      std::ofstream out(dir / "plot_family.csv");
      out << "sigma_s,node";
      for (Eigen::Index k = 0; k < family.front().nodes.cols(); ++k) {
        out << ",x" << k;
      }
      out << "\n";
      for (std::size_t i = 0; i < family.size(); ++i) {
        for (Eigen::Index j = 0; j < family[i].nodes.rows(); ++j) {
          out << format_double(cfg.family_levels[i]) << "," << j;
          for (Eigen::Index k = 0; k < family[i].nodes.cols(); ++k) {
            out << "," << format_double(family[i].nodes(j, k));
          }
          out << "\n";
        }
      }
    }
    {
      std::ofstream out(dir / "plot_margins.csv");
      out << "sigma_s,margin,bend_energy,p_star\n";
      for (std::size_t i = 0; i < family.size(); ++i) {
        out << format_double(cfg.family_levels[i]) << ","
            << format_double(reproduction_margin(family[i], setup.obstacles)) << ","
            << format_double(family[i].energies.bend) << ","
            << format_double(family[i].solution.p_star) << "\n";
      }
    }
    std::cout << "family: " << family.size() << " members -> "
              << (dir / "family.json").string() << "\n";
    return kExitOk;
  });
}

int run_prune_report(const RunOptions& options) {
  return guard([&]() {
    const ExperimentConfig cfg = load_with_overrides(options);
    const ProblemSetup setup = build_setup(cfg);
    const fs::path dir = prepare_out_dir(cfg);

    const AssembledProblem prob =
        assemble_problem(setup.demos, setup.constraints,
                         setup.obstacles.empty() ? nullptr : &setup.obstacles,
                         setup.params);
    const Eigen::Index n = prob.objective.nodes();
    const Eigen::Index d = prob.objective.dim();
    const LinearConstraintSystem sys =
        reformulate_l1(prob.constraints, n, d, prob.min_radius);
    const Solution full = solve_qp(prob.objective, sys, prob.tol);
    if (full.status == SolveStatus::infeasible) {
      throw InfeasibleError("constraint set is infeasible", {}, full.certificate);
    }
    if (full.status != SolveStatus::solved) {
      throw std::runtime_error("solver failed to reach the requested tolerances");
    }

    const double eps_prune = 1e-6 * prob.tol.scale;
    const double slack_margin = 1e-7 * prob.tol.scale;
    const ConstraintSet kept =
        prune_zero_dual(prob.constraints, full, eps_prune, slack_margin);
    const std::vector<std::size_t> dropped =
        pruned_indices(prob.constraints, full, eps_prune, slack_margin);
    const LinearConstraintSystem pruned_sys = reformulate_l1(kept, n, d, prob.min_radius);
    const Solution re = solve_qp(prob.objective, pruned_sys, prob.tol);

    ordered_json doc;
    doc["mode"] = "prune-report";
    doc["seed"] = cfg.seed;
    doc["eps_prune"] = eps_prune;
    ordered_json entries = ordered_json::array();
    std::vector<bool> is_dropped(prob.constraints.size(), false);
    for (std::size_t id : dropped) {
      is_dropped[id] = true;
    }
    for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
      ordered_json entry = constraint_to_json(i, prob.constraints[i]);
      entry["lambda"] = full.lambda[i];
      entry["pruned"] = static_cast<bool>(is_dropped[i]);
      entries.push_back(std::move(entry));
    }
    doc["constraints"] = std::move(entries);
    doc["counts"] = ordered_json{{"total", prob.constraints.size()},
                                 {"pruned", dropped.size()},
                                 {"retained", kept.size()}};
    doc["resolve"] = ordered_json{
        {"max_node_deviation", (re.nodes - full.nodes).cwiseAbs().maxCoeff()},
        {"p_rel_diff", std::abs(re.p_star - full.p_star) /
                           std::max(1.0, std::abs(full.p_star))}};
    write_json(dir / "prune_report.json", doc);
    std::cout << "prune-report: pruned " << dropped.size() << "/"
              << prob.constraints.size() << " constraints -> "
              << (dir / "prune_report.json").string() << "\n";
    return kExitOk;
  });
}

int run_validate(const RunOptions& options) {
  int failures = 0;
  const int rc = guard([&]() {
    const ExperimentConfig cfg = load_with_overrides(options);
    const ProblemSetup setup = build_setup(cfg);

    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
      std::cout << (ok ? "[ok]   " : "[FAIL] ") << name;
      if (!detail.empty()) {
        std::cout << ": " << detail;
      }
      std::cout << "\n";
      if (!ok) {
        ++failures;
      }
    };

    const ObstacleSet* obstacles =
        setup.obstacles.empty() ? nullptr : &setup.obstacles;
    const Reproduction rep =
        reproduce(setup.demos, setup.constraints, obstacles, setup.params);
    SolverTolerances tol = setup.params.tol;
    tol.scale = rep.scale;
    check("solve reaches KKT tolerances", rep.kkt.within(tol),
          "stationarity " + format_double(rep.kkt.stationarity) + ", gap_rel " +
              format_double(rep.kkt.gap_rel));
    check("strong duality",
          rep.solution.gap <= 1e-6 * std::max(1.0, std::abs(rep.solution.p_star)),
          "gap " + format_double(rep.solution.gap));
    bool duals_ok = true;
    for (double lam : rep.solution.lambda) {
      duals_ok = duals_ok && lam >= -1e-12;
    }
    check("dual feasibility", duals_ok, "");

    const Reproduction again =
        reproduce(setup.demos, setup.constraints, obstacles, setup.params);
    const bool deterministic =
        again.nodes.size() == rep.nodes.size() &&
        std::memcmp(again.nodes.data(), rep.nodes.data(),
                    sizeof(double) * static_cast<std::size_t>(rep.nodes.size())) == 0;
    check("determinism (bitwise reproduction)", deterministic, "");

    bool feas_ok = true;
    for (const PointConstraint& c : rep.active_constraints) {
      const double lhs =
          l1_distance(c.anchor, rep.nodes.row(c.node_index).transpose());
      feas_ok = feas_ok && lhs <= std::max(c.effective_radius(), 1e-6 * rep.scale) +
                                      1e-7 * std::max(1.0, rep.scale);
    }
    check("retained constraints satisfied", feas_ok, "");

    if (cfg.sweep) {
      const AssembledProblem prob =
          assemble_problem(setup.demos, setup.constraints, obstacles, setup.params);
      GridSpec grid;
      grid.sample_count = static_cast<int>(cfg.sweep->samples);
      grid.eps_lambda = cfg.sweep->eps_lambda;
      grid.initial_upper = cfg.sweep->initial_upper;
      grid.max_doublings = static_cast<int>(cfg.sweep->max_doublings);
      const PerturbationCurve curve =
          sweep(prob.objective, prob.constraints,
                static_cast<std::size_t>(cfg.sweep->target), grid, prob.tol);
      const SensitivityReport sens = check_sensitivity_bound(curve);
      check("sensitivity bound p*(u) >= p*(0) - lambda0 u", sens.holds,
            "worst margin " + format_double(sens.worst_margin));
      bool monotone = true;
      bool lambda_monotone = true;
      const SweepSample* prev = nullptr;
      for (const SweepSample& s : curve.samples) {
        if (!s.feasible) {
          continue;
        }
        if (prev != nullptr) {
          monotone = monotone &&
                     s.p_star <= prev->p_star +
                                     1e-8 * std::max(1.0, std::abs(curve.p0));
          lambda_monotone = lambda_monotone && s.lambda <= prev->lambda + 1e-6;
        }
        prev = &s;
      }
      check("p*(u) nonincreasing along the sweep", monotone, "");
      check("lambda(u) nonincreasing along the sweep", lambda_monotone, "");
    }

    if (!cfg.family_levels.empty() && obstacles != nullptr) {
      const std::vector<Reproduction> family = confidence_family(
          setup.demos, setup.obstacles, cfg.family_levels, setup.params,
          setup.constraints);
      bool p_monotone = true;
      for (std::size_t i = 1; i < family.size(); ++i) {
        if (cfg.family_levels[i] >= cfg.family_levels[i - 1]) {
          p_monotone = p_monotone &&
                       family[i].solution.p_star >=
                           family[i - 1].solution.p_star -
                               1e-8 * std::max(1.0, std::abs(family[i].solution.p_star));
        }
      }
      check("p* nondecreasing in sigma_s", p_monotone, "");
    }
    return failures == 0 ? kExitOk : kExitValidationFailed;
  });
  return rc;
}

}  // namespace elmap::cli
