#pragma once

#include <vector>

#include "gns/riccati.hpp"
#include "gns/thread_pool.hpp"
#include "gns/types.hpp"

namespace gns {

/// Partition of the horizon [0, N) into M shooting intervals.
struct IntervalPartition {
  int horizon = 0;              // N
  std::vector<int> starts;      // i_0 = 0 < i_1 < ... < i_{M-1}
  std::vector<int> lengths;     // sum == N

  int intervals() const { return static_cast<int>(starts.size()); }
  int end_stage(int k) const { return starts[k] + lengths[k] - 1; }
};

/// Splits N stages into M intervals: base length N/M, the first N%M intervals
/// get one extra stage. Throws ConfigError unless 1 <= M <= N.
IntervalPartition make_partition(int horizon, int intervals);

/// Linear forward sweep producing the candidate decision variables:
///   u_n+ = u_n + alpha l_n + L_n (x_n+ - x_n)
///   x_{n+1}+ = x_{n+1} + (A_n + B_n L_n)(x_n+ - x_n) + alpha (B_n l_n + d_n)
/// with x_0+ = x_init. At alpha = 1 the candidate satisfies the affine
/// subproblem dynamics exactly; the candidate is affine in alpha and equals
/// traj_old at alpha = 0. Defects are carried over unchanged (the subsequent
/// rollout recomputes them).
Trajectory forward_sweep(const LQSubproblem& lq, const RiccatiSolution& sol,
                         const Trajectory& traj_old, const Vector& x_init,
                         double alpha = 1.0);

struct RolloutResult {
  Trajectory traj;                     // states/controls after overwriting, fresh defects
  std::vector<StageSensitivity> sens;  // per control stage, from the same pass
};

/// Simulates every shooting interval of the candidate with the nonlinear
/// dynamics and recomputes the defects (sensitivities are produced in the
/// same pass for the next LQ assembly).
///
/// Closed-loop: inner stages apply u_j = u_j_ref + alpha l_j + L_j (x_j - x_j_ref)
/// with the previous iterate as reference, and the applied controls overwrite
/// the stored ones. Open-loop: the candidate's stored controls are applied
/// unchanged. States strictly inside an interval are overwritten by the
/// integration; interval starts are kept.
///
/// With a single interval the method degenerates to pure shooting: there are
/// no intermediate state decision variables, the integration also replaces
/// the terminal state and every defect is exactly zero. With M >= 2 the
/// terminal state stays a decision variable and the last interval reports its
/// defect against it, so M = N reproduces the fully lifted formulation
/// stage for stage.
///
/// Intervals run concurrently on `pool` when provided; each interval touches
/// a disjoint trajectory slice and the merged result is deterministic.
RolloutResult rollout_and_defects(const OcProblem& problem,
                                  const IntervalPartition& partition,
                                  const Trajectory& candidate,
                                  const RiccatiSolution& policy,
                                  const Trajectory& traj_ref, bool closed_loop,
                                  double alpha = 1.0, ThreadPool* pool = nullptr);

/// Rollout used before the first iteration: applies the stored controls
/// (or `init_policy` closed-loop when given) interval by interval, overwrites
/// inner states and computes the initial defects. Same overwrite and defect
/// conventions as rollout_and_defects.
RolloutResult initial_rollout(const OcProblem& problem,
                              const IntervalPartition& partition,
                              const Trajectory& init,
                              const AffinePolicy* init_policy = nullptr,
                              ThreadPool* pool = nullptr);

namespace detail {

/// Control law evaluated at a global stage index and the simulated state.
using ControlLaw = std::function<Vector(int stage, const Vector& x)>;

struct ShotOutput {
  std::vector<Vector> states;          // length + 1, [0] == x_start
  std::vector<Vector> controls;        // applied, length
  std::vector<StageSensitivity> sens;  // length, empty unless requested
};

/// Integrates one shooting interval. `stored` is indexed by global stage;
/// stages use the law when given (the start stage only if law_at_start).
ShotOutput shoot(const DynamicsModel& model, const Integrator& integ,
                 const Vector& x_start, int first_stage, int length,
                 const std::vector<Vector>& stored, const ControlLaw& law,
                 bool law_at_start, bool with_sens, int interval_index);

}  // namespace detail

}  // namespace gns
