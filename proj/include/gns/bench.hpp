#pragma once

#include <map>
#include <string>

#include "gns/solver.hpp"

namespace gns {

/// Optional overrides for a benchmark problem's default setup. Scalar weight
/// overrides are expanded to diagonal matrices of the right size.
struct BenchOverrides {
  std::optional<double> dt;
  std::optional<int> horizon;
  std::optional<double> q_weight;
  std::optional<double> r_weight;
  std::optional<double> q_terminal_weight;
  std::optional<Vector> x_init;
  std::optional<Vector> x_des;
  std::optional<Vector> u_des;
  std::optional<unsigned long long> seed;  // linear_random only
  std::optional<Integrator::Scheme> scheme;
};

/// Built-in systems: "scalar_unstable", "pendulum", "cartpole",
/// "linear_random".
std::vector<std::string> builtin_systems();

/// Builds a ready-to-solve problem for a built-in system, applying overrides
/// to the preset. Throws ConfigError for unknown names.
OcProblem make_benchmark_problem(const std::string& name,
                                 const BenchOverrides& overrides = {});

/// Default initial guess strategy for a built-in system (steady state where
/// one exists, interpolation otherwise).
InitStrategy default_init(const std::string& name, const OcProblem& problem);

struct VariantRun {
  std::string name;
  VariantConfig variant;
  SolveResult result;
};

struct ConvergenceExperiment {
  std::vector<VariantRun> runs;
};

/// Solves the named problem once per variant from an identical initialization
/// and collects the per-iteration records. Unstable variants are recorded
/// with their status instead of propagating the failure.
ConvergenceExperiment run_convergence_experiment(const OcProblem& problem,
                                                 const std::vector<VariantConfig>& variants,
                                                 const InitStrategy& init,
                                                 const SolverSettings& settings = {});

struct ContractionStats {
  std::string variant_name;
  VariantConfig variant;
  double mean_rate = 0.0;
  double std_rate = 0.0;
  int n_converged = 0;
  int n_excluded = 0;    // diverged or not converged
  int n_degenerate = 0;  // converged but too few usable iterates (e.g. zero perturbation)
  std::vector<double> rates;  // per converged, non-degenerate sample
};

struct ContractionStudySettings {
  int samples = 100;
  double perturbation_scale = 0.1;
  unsigned long long seed = 0;
  int threads = 1;
  int max_iterations = 80;
  double defect_tolerance = 1e-10;
  double cost_change_tolerance = 1e-13;
  /// Iterates entering the log-linear rate fit; <= 0 fits one first-order
  /// regression through the whole decay.
  int rate_fit_window = 0;
};

/// Perturbs x_init inside a seeded uniform ball, re-solves each sample from
/// the converged reference solution (closed-loop variants reuse its feedback
/// policy for the first rollout) and estimates the contraction rate of every
/// run. Samples run concurrently; aggregation is ordered by sample index, so
/// results depend only on (problem, variants, seed).
std::vector<ContractionStats> run_contraction_study(
    const OcProblem& problem, const std::vector<VariantConfig>& variants,
    const ContractionStudySettings& settings);

}  // namespace gns
