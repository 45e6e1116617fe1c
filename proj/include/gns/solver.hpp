#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gns/sweep.hpp"

namespace gns {

/// One member of the Gauss-Newton shooting family: the number of shooting
/// intervals M and whether interval rollouts are closed-loop.
///
///   SS            = (M = 1, open)        iLQR         = (M = 1, closed)
///   GNMS          = (M = N, either)      GNMS(M)      = (M, open)
///   iLQR-GNMS(M)  = (M, closed)
///
/// At M = N intervals are a single stage, feedback never acts inside an
/// interval and the closed_loop flag has no effect on results.
struct VariantConfig {
  int intervals = 1;
  bool closed_loop = true;

  static VariantConfig single_shooting() { return {1, false}; }
  static VariantConfig ilqr() { return {1, true}; }
  static VariantConfig gnms(int horizon) { return {horizon, false}; }
  static VariantConfig gnms_m(int m) { return {m, false}; }
  static VariantConfig ilqr_gnms_m(int m) { return {m, true}; }

  std::string name(int horizon) const;
};

struct LineSearchSettings {
  bool enabled = false;       // full-step by default
  int max_backtracks = 7;     // alphas 1, 1/2, ..., 1/2^7
  double merit_defect_weight = 10.0;  // rho in phi = J + rho * sum|d|
};

struct SolverSettings {
  double defect_tolerance = 1e-6;      // d_max
  double cost_change_tolerance = 1e-6; // J_rel_min
  int max_iterations = 100;
  LineSearchSettings line_search;
  Regularization regularization;
  int threads = 1;  // worker threads for interval rollouts; <=0 -> hardware

  /// Called once per accepted iteration.
  std::function<void(const IterationRecord&)> record_sink;
  /// Called with the assembled subproblem at the start of each iteration.
  std::function<void(int iter, const LQSubproblem&)> lq_observer;

  void validate() const;
};

enum class SolveStatus { converged, max_iters, diverged, unstable_rollout };

const char* to_string(SolveStatus status);

struct SolveResult {
  Trajectory trajectory;             // last accepted snapshot
  RiccatiSolution policy;            // from the last backward sweep
  std::vector<IterationRecord> records;
  std::vector<Trajectory> iterates;  // snapshots per iteration, [0] = initial
  SolveStatus status = SolveStatus::max_iters;
  double initial_cost = 0.0;
  double initial_defect = 0.0;
  std::string message;

  /// Stored control trajectories per iteration, including the initial guess.
  std::vector<std::vector<Vector>> control_iterates() const;
};

/// Initial guess strategies.
struct InitSteadyState {};                    // X = x_init, U solving f(x_init, u) = 0
struct InitInterpolate {                      // linear state ramp, zero controls
  Vector x_goal;
};
struct InitProvided {                         // caller-supplied trajectories
  std::vector<Vector> states;
  std::vector<Vector> controls;
};
struct InitPolicy {                           // rollout of a stabilizing policy
  AffinePolicy policy;
};
using InitStrategy =
    std::variant<InitSteadyState, InitInterpolate, InitProvided, InitPolicy>;

struct Initialization {
  Trajectory trajectory;               // after the initial shooting rollouts
  std::vector<StageSensitivity> sens;  // from the same pass
  std::optional<AffinePolicy> policy;  // present for InitPolicy / InitProvided+gains
};

/// Builds X^[0], U^[0] per the strategy and runs the initial multiple-shooting
/// rollouts of the variant's partition, producing the iteration-ready snapshot
/// with defects d^[0]. A dynamically consistent guess yields zero defects.
/// Throws DivergenceError if the initial rollout diverges.
Initialization initialize(const OcProblem& problem, const VariantConfig& variant,
                          const InitStrategy& strategy,
                          const AffinePolicy* gains = nullptr,
                          ThreadPool* pool = nullptr);

/// Runs the main iteration: LQ assembly, backward Riccati sweep, linear
/// forward sweep, interval rollouts, cost/defect evaluation, until both
/// |J_k - J_{k-1}| / |J_k| < cost_change_tolerance and the total defect is
/// below defect_tolerance, or max_iterations / divergence. With line search
/// enabled, backtracks over alpha accepting the first candidate whose merit
/// J + rho sum|d| improves; otherwise always takes the full step.
SolveResult solve(const OcProblem& problem, const VariantConfig& variant,
                  const SolverSettings& settings, const Initialization& init);

/// Pure tracking form of a solved policy: u_n(x) = U[n] + L_n (x - X[n]),
/// with the feedforward absorbed into the reference controls.
AffinePolicy tracking_policy(const RiccatiSolution& sol, const Trajectory& traj);

/// Asymptotic contraction rate estimate: geometric-mean ratio of successive
/// control-trajectory errors |U^[k] - U*|_2, obtained from the slope of a
/// least-squares line fit to log|U^[k] - U*| over the last `window` usable
/// iterates (iterates within `floor` of U* are skipped; window <= 0 fits the
/// whole usable sequence). Throws InsufficientDataError with fewer than two
/// usable iterates.
double contraction_rate(const std::vector<std::vector<Vector>>& control_iterates,
                        const std::vector<Vector>& u_star, int window = 5,
                        double floor = 1e-12);

}  // namespace gns
