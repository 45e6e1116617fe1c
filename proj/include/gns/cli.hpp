#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gns/bench.hpp"
#include "gns/nmpc.hpp"

namespace gns {

/// Exit codes shared by all subcommands.
enum ExitCode {
  exit_ok = 0,
  exit_config_error = 1,
  exit_max_iters = 2,
  exit_diverged = 3,
};

/// Parsed and validated run configuration. Unknown JSON keys are rejected.
struct RunConfig {
  std::string system;
  BenchOverrides overrides;
  VariantConfig variant{1, true};
  std::string variant_name = "ilqr";
  std::string init_type = "steady_state";  // steady_state | interpolate | provided
  std::optional<Vector> init_x_goal;
  std::vector<Vector> init_states;
  std::vector<Vector> init_controls;
  SolverSettings solver;
  double mpc_duration = 5.0;
  int mpc_shift = 0;
  double noise_scale = 0.0;
  int contraction_samples = 100;
  double contraction_scale = 0.1;
  std::vector<std::string> contraction_variants = {"ilqr", "gnms"};
  unsigned long long seed = 0;
  int threads = 0;  // 0 -> resolve from GNSHOOT_THREADS, then hardware
};

/// Loads and validates a config file. Throws ConfigError naming the offending
/// field on any schema violation.
RunConfig load_config(const std::filesystem::path& path);

/// Flag overrides applied on top of the config file.
struct CmdOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_path;
  std::optional<std::string> variant;
  std::optional<int> intervals;
  std::optional<int> threads;
  std::optional<unsigned long long> seed;
  std::optional<int> dump_lq_iter;
  std::optional<bool> line_search;
  std::optional<bool> shift;
  std::optional<int> samples;
  std::optional<double> duration;
  std::optional<std::filesystem::path> json_summary;
};

/// `solve`: one trajectory optimization; writes the iteration CSV
/// (iter,cost,defect_l1,update_norm,alpha,wall_ms).
int cmd_solve(const CmdOptions& options);

/// `mpc`: closed-loop NMPC run; writes the cycle CSV
/// (cycle,t_sim,x_meas_*,cost_stage,feedback_ms,prep_ms) and prints a summary.
int cmd_mpc(const CmdOptions& options);

/// `contraction`: perturbed-restart study; writes
/// (variant,M,mean_rate,std_rate,n_converged,n_excluded).
int cmd_contraction(const CmdOptions& options);

/// Full argv interface used by the gnshoot binary.
int run_cli(int argc, const char* const* argv);

/// FNV-1a hash of the raw config bytes, embedded in every output header for
/// provenance.
std::string config_hash(const std::filesystem::path& path);

}  // namespace gns
