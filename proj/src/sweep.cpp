#include "gns/sweep.hpp"

#include <string>
#include <utility>

namespace gns {

IntervalPartition make_partition(int horizon, int intervals) {
  if (intervals < 1)
    throw ConfigError("number of shooting intervals must be >= 1", "M");
  if (intervals > horizon)
    throw ConfigError("number of shooting intervals must not exceed the horizon",
                      "M");
  IntervalPartition part;
  part.horizon = horizon;
  part.starts.resize(intervals);
  part.lengths.resize(intervals);
  const int base = horizon / intervals;
  const int remainder = horizon % intervals;
  int start = 0;
  for (int k = 0; k < intervals; ++k) {
    part.starts[k] = start;
    part.lengths[k] = base + (k < remainder ? 1 : 0);
    start += part.lengths[k];
  }
  return part;
}

namespace detail {

ShotOutput shoot(const DynamicsModel& model, const Integrator& integ,
                 const Vector& x_start, int first_stage, int length,
                 const std::vector<Vector>& stored, const ControlLaw& law,
                 bool law_at_start, bool with_sens, int interval_index) {
  ShotOutput out;
  out.states.reserve(length + 1);
  out.controls.reserve(length);
  if (with_sens) out.sens.reserve(length);
  out.states.push_back(x_start);

  for (int j = 0; j < length; ++j) {
    const int stage = first_stage + j;
    const Vector& x = out.states.back();
    Vector u = (law && (j > 0 || law_at_start)) ? law(stage, x) : stored[stage];

    Vector x_next;
    try {
      if (with_sens) {
        auto [xn, sens] = step_with_sensitivity(model, integ, x, u);
        x_next = std::move(xn);
        out.sens.push_back(std::move(sens));
      } else {
        x_next = step(model, integ, x, u);
      }
    } catch (const DivergenceError&) {
      throw DivergenceError("rollout diverged in interval " +
                                std::to_string(interval_index) + " at stage " +
                                std::to_string(stage),
                            interval_index, stage);
    }
    out.controls.push_back(std::move(u));
    out.states.push_back(std::move(x_next));
  }
  return out;
}

}  // namespace detail

Trajectory forward_sweep(const LQSubproblem& lq, const RiccatiSolution& sol,
                         const Trajectory& traj_old, const Vector& x_init,
                         double alpha) {
  const int horizon = lq.horizon();
  if (traj_old.horizon() != horizon || sol.horizon() != horizon)
    throw DimensionError("forward sweep inputs disagree in horizon");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("step size must lie in (0, 1]", "alpha");

  Trajectory cand;
  cand.states.resize(horizon + 1);
  cand.controls.resize(horizon);
  cand.defects = traj_old.defects;  // recomputed by the subsequent rollout
  cand.states[0] = x_init;

  for (int n = 0; n < horizon; ++n) {
    const LQSubproblem::Stage& st = lq.stages[n];
    const RiccatiSolution::Stage& rs = sol.stages[n];
    const Vector dx = cand.states[n] - traj_old.states[n];
    const Vector du = alpha * rs.feedforward + rs.gain * dx;
    cand.controls[n] = traj_old.controls[n] + du;
    cand.states[n + 1] =
        traj_old.states[n + 1] + st.A * dx + st.B * du + alpha * st.d;
  }
  return cand;
}

namespace {

/// Shared interval-rollout loop: simulates the partition's intervals from the
/// base trajectory's start nodes, overwrites inner decision variables and
/// recomputes the defects.
///
/// Retained nodes are the interval starts plus (for M >= 2) the terminal
/// state; each interval's defect is reported at its last stage against the
/// next retained node. A single interval has no retained node to match, so
/// the integration also replaces the terminal state and all defects are
/// exactly zero (pure single shooting).
RolloutResult run_shots(const OcProblem& problem, const IntervalPartition& partition,
                        const Trajectory& base, const detail::ControlLaw& law,
                        bool law_at_start, ThreadPool* pool) {
  const int horizon = problem.horizon;
  if (base.horizon() != horizon || partition.horizon != horizon)
    throw DimensionError("rollout inputs disagree in horizon");
  const int intervals = partition.intervals();

  RolloutResult out;
  out.traj = base;
  out.sens.resize(horizon);

  const auto run_interval = [&](int k) {
    const int start = partition.starts[k];
    const int length = partition.lengths[k];
    const detail::ShotOutput shot =
        detail::shoot(*problem.dynamics, problem.integrator, base.states[start],
                      start, length, base.controls, law, law_at_start, true, k);

    for (int j = 0; j < length; ++j) {
      out.sens[start + j] = shot.sens[j];
      out.traj.controls[start + j] = shot.controls[j];
      out.traj.defects[start + j] = Vector::Zero(problem.state_dim);
      if (start + j + 1 < start + length)  // strictly inside the interval
        out.traj.states[start + j + 1] = shot.states[j + 1];
    }

    const int end_stage = start + length - 1;
    if (intervals == 1) {
      out.traj.states[horizon] = shot.states[length];
    } else {
      // Defect against the next retained node (next start, or the terminal
      // decision state for the last interval). Read from `base`, which no
      // concurrent interval mutates.
      out.traj.defects[end_stage] = shot.states[length] - base.states[start + length];
    }
  };

  if (pool != nullptr && pool->size() > 1 && intervals > 1) {
    pool->run_indexed(intervals, run_interval);
  } else {
    for (int k = 0; k < intervals; ++k) run_interval(k);
  }
  return out;
}

}  // namespace

RolloutResult rollout_and_defects(const OcProblem& problem,
                                  const IntervalPartition& partition,
                                  const Trajectory& candidate,
                                  const RiccatiSolution& policy,
                                  const Trajectory& traj_ref, bool closed_loop,
                                  double alpha, ThreadPool* pool) {
  detail::ControlLaw law;
  if (closed_loop) {
    law = [&policy, &traj_ref, alpha](int stage, const Vector& x) -> Vector {
      const RiccatiSolution::Stage& rs = policy.stages[stage];
      return traj_ref.controls[stage] + alpha * rs.feedforward +
             rs.gain * (x - traj_ref.states[stage]);
    };
  }
  // Interval starts always apply the candidate's stored control: the linear
  // sweep has already folded the feedback at those nodes into the candidate.
  return run_shots(problem, partition, candidate, law, false, pool);
}

RolloutResult initial_rollout(const OcProblem& problem,
                              const IntervalPartition& partition,
                              const Trajectory& init, const AffinePolicy* init_policy,
                              ThreadPool* pool) {
  detail::ControlLaw law;
  if (init_policy != nullptr && !init_policy->empty()) {
    const AffinePolicy& p = *init_policy;
    law = [&p](int stage, const Vector& x) -> Vector {
      Vector u = p.control_ref[stage] + p.gains[stage] * (x - p.state_ref[stage]);
      if (!p.feedforward.empty()) u += p.feedforward[stage];
      return u;
    };
  }
  return run_shots(problem, partition, init, law, true, pool);
}

}  // namespace gns
