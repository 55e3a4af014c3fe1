#pragma once

#include <optional>
#include <string>
#include <vector>

namespace elmap::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitValidationFailed = 3;
inline constexpr int kExitSolverError = 4;

struct RunOptions {
  std::string config_path;
  std::string out_dir;               // overrides [output] dir when nonempty
  std::optional<double> sigma_s;     // overrides [family] sigma_s
  std::vector<double> levels;        // overrides [family] levels when nonempty
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

int run_solve(const RunOptions& options);
int run_sweep(const RunOptions& options);
int run_family(const RunOptions& options);
int run_prune_report(const RunOptions& options);
int run_validate(const RunOptions& options);

}  // namespace elmap::cli
