#include <CLI11.hpp>

#include <string>
#include <vector>

#include "runner.hpp"

namespace {

void add_common_options(CLI::App* cmd, elmap::cli::RunOptions& options,
                        std::string& levels_csv) {
  cmd->add_option("--config", options.config_path, "Experiment config file")
      ->required();
  cmd->add_option("--out", options.out_dir, "Output directory (overrides config)");
  cmd->add_option("--sigma-s", options.sigma_s,
                  "Confidence factor for obstacle constraints, in [0, 1]");
  cmd->add_option("--levels", levels_csv,
                  "Comma-separated confidence factors for family mode");
  cmd->add_option("--seed", options.seed, "Seed recorded in the output files");
  cmd->add_option("--tol", options.tol, "Solver tolerance (kkt/feas/slackness)");
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> levels;
  std::size_t pos = 0;
  while (pos <= csv.size() && !csv.empty()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) {
      comma = csv.size();
    }
    levels.push_back(std::stod(csv.substr(pos, comma - pos)));
    if (comma == csv.size()) {
      break;
    }
    pos = comma + 1;
  }
  return levels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "elmap: trajectory reproduction from demonstrations via convex "
      "elastic-map optimization, with dual-based confidence analysis"};
  app.require_subcommand(1);

  elmap::cli::RunOptions options;
  std::string levels_csv;

  CLI::App* solve = app.add_subcommand(
      "solve", "Reproduce the demonstration under the configured constraints");
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Perturb one constraint across a grid and trace p*(u)");
  CLI::App* family = app.add_subcommand(
      "family", "One reproduction per confidence factor");
  CLI::App* prune = app.add_subcommand(
      "prune-report", "Report which constraints carry zero duals");
  CLI::App* validate = app.add_subcommand(
      "validate", "Run the invariant checks on a config");
  for (CLI::App* cmd : {solve, sweep, family, prune, validate}) {
    add_common_options(cmd, options, levels_csv);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (!levels_csv.empty()) {
      options.levels = parse_levels(levels_csv);
    }
  } catch (const std::exception&) {
    std::cerr << "config error: cannot parse --levels '" << levels_csv << "'\n";
    return elmap::cli::kExitConfigError;
  }

  if (solve->parsed()) {
    return elmap::cli::run_solve(options);
  }
  if (sweep->parsed()) {
    return elmap::cli::run_sweep(options);
  }
  if (family->parsed()) {
    return elmap::cli::run_family(options);
  }
  if (prune->parsed()) {
    return elmap::cli::run_prune_report(options);
  }
  return elmap::cli::run_validate(options);
}
