#pragma once

#include <optional>

#include "gns/solver.hpp"

namespace gns {

struct NmpcSettings {
  /// Stages to shift the stored trajectories per cycle (terminal node
  /// duplicated). 0 keeps the horizon anchored, which is the printed
  /// algorithm's behavior.
  int shift_per_cycle = 0;
  int threads = 1;  // worker threads for the preparation-phase rollouts
  Regularization regularization;
};

/// Result of one feedback phase: the policy and trajectories to publish.
struct FeedbackResult {
  AffinePolicy policy;             // u_n(x) = U+[n] + L_n (x - X+[n])
  std::vector<Vector> states;      // X+
  std::vector<Vector> controls;    // U+
  double feedback_ms = 0.0;
  bool fallback = false;  // set when the cycle failed and the previous policy stands
};

/// Receding-horizon controller running one Gauss-Newton iteration per cycle,
/// split into a low-latency feedback phase (first shooting interval +
/// backward/forward sweep) and a preparation phase (remaining intervals,
/// parallelized).
class NmpcController {
 public:
  /// Warm start from a solved trajectory and its feedback policy. The
  /// constructor performs a full preparation pass over intervals 1..M-1 so
  /// the first feedback_step finds consistent data.
  NmpcController(OcProblem problem, VariantConfig variant, NmpcSettings settings,
                 Trajectory warm_start, AffinePolicy warm_policy);
  ~NmpcController();

  NmpcController(NmpcController&&) noexcept;
  NmpcController& operator=(NmpcController&&) = delete;

  /// Feedback phase: re-anchors x_0 to the measurement, rolls out the first
  /// interval closed-loop, completes the LQ data for its stages, runs the
  /// backward and forward sweeps and returns the updated policy and
  /// trajectories for publication. On rollout divergence the previous policy
  /// is returned with `fallback` set.
  FeedbackResult feedback_step(const Vector& x_meas);

  /// Preparation phase: adopts the last published solution, rolls out
  /// intervals 1..M-1 (concurrently), recomputes their sensitivities,
  /// defects and cost expansion. Returns the phase wall time in ms.
  double preparation_step();

  const Trajectory& trajectory() const;
  const AffinePolicy& policy() const;
  const IntervalPartition& partition() const;
  int stage_clock() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Additive uniform process noise applied to the plant state once per cycle.
struct NoiseConfig {
  double scale = 0.0;
  unsigned long long seed = 0;
};

struct CycleLog {
  int cycle = 0;
  double t_sim = 0.0;
  Vector x_meas;
  double cost_stage = 0.0;
  double feedback_ms = 0.0;
  double prep_ms = 0.0;
  bool fallback = false;
};

struct ClosedLoopResult {
  std::vector<CycleLog> cycles;
  double accumulated_cost = 0.0;   // running cost of the executed trajectory
  double mean_cycle_ms = 0.0;      // feedback + preparation
  double mean_frequency_hz = 0.0;
  Vector final_state;
  bool plant_diverged = false;
};

/// Simulates measure -> feedback -> apply first control -> preparation loops
/// for `duration` seconds of plant time (one control stage per cycle). The
/// plant integrates `plant_model` with the controller's integrator settings.
/// Plant divergence ends the run early with partial statistics.
ClosedLoopResult run_closed_loop(const DynamicsModel& plant_model,
                                 const NoiseConfig& noise, NmpcController& controller,
                                 const OcProblem& problem, double duration);

}  // namespace gns
