#include "gns/nmpc.hpp"

#include <chrono>
#include <random>
#include <utility>

#include "gns/cost.hpp"
#include "gns/lq.hpp"

namespace gns {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

struct NmpcController::Impl {
  OcProblem problem;
  VariantConfig variant;
  NmpcSettings settings;
  IntervalPartition partition;

  Trajectory traj;      // adopted decision variables
  AffinePolicy policy;  // tracking law around traj
  LQSubproblem lq;      // stages 0..l-1 filled by feedback, rest by preparation
  int stage_clock = 0;

  struct Pending {
    Trajectory traj;
    AffinePolicy policy;
  };
  std::optional<Pending> pending;

  std::optional<ThreadPool> pool;

  Impl(OcProblem prob, VariantConfig var, NmpcSettings cfg, Trajectory warm,
       AffinePolicy warm_policy)
      : problem(std::move(prob)),
        variant(var),
        settings(cfg),
        partition(make_partition(problem.horizon, var.intervals)),
        traj(std::move(warm)),
        policy(std::move(warm_policy)) {
    problem.validate();
    if (traj.horizon() != problem.horizon)
      throw DimensionError("warm-start trajectory disagrees with the horizon");
    if (static_cast<int>(policy.gains.size()) != problem.horizon)
      throw DimensionError("warm-start policy disagrees with the horizon");
    traj.defects.assign(problem.horizon, Vector::Zero(problem.state_dim));

    lq.stages.resize(problem.horizon);
    const int n_threads = ThreadPool::resolve_thread_count(settings.threads);
    if (n_threads > 1 && partition.intervals() > 2) pool.emplace(n_threads);

    prepare_intervals();
  }

  detail::ControlLaw policy_law() const {
    return [this](int stage, const Vector& x) -> Vector {
      return policy.control_ref[stage] +
             policy.gains[stage] * (x - policy.state_ref[stage]);
    };
  }

  void fill_stage(int n, const StageCostExpansion& e, const StageSensitivity& sens,
                  Vector defect) {
    LQSubproblem::Stage& st = lq.stages[n];
    st.A = sens.A;
    st.B = sens.B;
    st.d = std::move(defect);
    st.Q = 0.5 * (e.Q + e.Q.transpose()).eval();
    st.q = e.grad_x;
    st.q0 = e.constant;
    st.R = 0.5 * (e.R + e.R.transpose()).eval();
    st.r = e.grad_u;
    st.P = e.P;
  }

  void quadratize_terminal() {
    const TerminalCostExpansion e =
        problem.cost->quadratize_terminal(traj.states[problem.horizon]);
    lq.Q_terminal = 0.5 * (e.Q + e.Q.transpose()).eval();
    lq.q_terminal = e.grad_x;
    lq.q0_terminal = e.constant;
  }

  /// Rolls out one interval closed-loop (open for open-loop variants),
  /// stores the visited states/controls and fills the LQ data of its stages.
  void run_interval(int k) {
    const int start = partition.starts[k];
    const int length = partition.lengths[k];
    const detail::ControlLaw law =
        variant.closed_loop ? policy_law() : detail::ControlLaw{};
    const detail::ShotOutput shot =
        detail::shoot(*problem.dynamics, problem.integrator, traj.states[start],
                      start, length, traj.controls, law, true, true, k);

    for (int j = 0; j < length; ++j) {
      const int stage = start + j;
      traj.controls[stage] = shot.controls[j];
      if (stage + 1 < start + length) traj.states[stage + 1] = shot.states[j + 1];
      traj.defects[stage] = Vector::Zero(problem.state_dim);
    }
    const int end_stage = start + length - 1;
    if (partition.intervals() == 1) {
      traj.states[problem.horizon] = shot.states[length];
    } else {
      traj.defects[end_stage] = shot.states[length] - traj.states[start + length];
    }
    for (int j = 0; j < length; ++j) {
      const int stage = start + j;
      fill_stage(stage,
                 problem.cost->quadratize_stage(traj.states[stage],
                                                traj.controls[stage], stage),
                 shot.sens[j], traj.defects[stage]);
    }
  }

  /// Preparation work: intervals 1..M-1 plus the terminal expansion.
  void prepare_intervals() {
    const int m_intervals = partition.intervals();
    if (m_intervals > 1) {
      const auto job = [this](int i) { run_interval(i + 1); };
      if (pool && pool->size() > 1) {
        pool->run_indexed(m_intervals - 1, job);
      } else {
        for (int i = 0; i < m_intervals - 1; ++i) job(i);
      }
    }
    quadratize_terminal();
  }
};

NmpcController::NmpcController(OcProblem problem, VariantConfig variant,
                               NmpcSettings settings, Trajectory warm_start,
                               AffinePolicy warm_policy)
    : impl_(std::make_unique<Impl>(std::move(problem), variant, settings,
                                   std::move(warm_start), std::move(warm_policy))) {}

NmpcController::~NmpcController() = default;
NmpcController::NmpcController(NmpcController&&) noexcept = default;

const Trajectory& NmpcController::trajectory() const { return impl_->traj; }
const AffinePolicy& NmpcController::policy() const { return impl_->policy; }
const IntervalPartition& NmpcController::partition() const {
  return impl_->partition;
}
int NmpcController::stage_clock() const { return impl_->stage_clock; }

FeedbackResult NmpcController::feedback_step(const Vector& x_meas) {
  Impl& s = *impl_;
  const auto t0 = Clock::now();

  FeedbackResult out;
  const int length = s.partition.lengths[0];
  const int horizon = s.problem.horizon;

  detail::ShotOutput shot;
  try {
    shot = detail::shoot(*s.problem.dynamics, s.problem.integrator, x_meas, 0,
                         length, s.traj.controls, s.policy_law(), true, true, 0);
  } catch (const DivergenceError&) {
    // Keep the previous policy on a failed cycle; the controller must
    // always output something.
    out.policy = s.policy;
    out.states = s.traj.states;
    out.controls = s.traj.controls;
    out.feedback_ms = ms_since(t0);
    out.fallback = true;
    return out;
  }

  // Re-anchor the first interval at the measurement.
  s.traj.states[0] = x_meas;
  for (int j = 0; j < length; ++j) {
    s.traj.controls[j] = shot.controls[j];
    if (j + 1 < length) s.traj.states[j + 1] = shot.states[j + 1];
    s.traj.defects[j] = Vector::Zero(s.problem.state_dim);
  }
  if (s.partition.intervals() == 1) {
    s.traj.states[horizon] = shot.states[length];
    s.quadratize_terminal();
  } else {
    s.traj.defects[length - 1] = shot.states[length] - s.traj.states[length];
  }
  for (int j = 0; j < length; ++j) {
    s.fill_stage(j,
                 s.problem.cost->quadratize_stage(s.traj.states[j],
                                                  s.traj.controls[j], j),
                 shot.sens[j], s.traj.defects[j]);
  }

  const RiccatiSolution sweep = backward_sweep(s.lq, s.settings.regularization);
  Trajectory candidate = forward_sweep(s.lq, sweep, s.traj, x_meas, 1.0);

  AffinePolicy updated;
  updated.gains.reserve(horizon);
  for (const RiccatiSolution::Stage& st : sweep.stages)
    updated.gains.push_back(st.gain);
  updated.state_ref = candidate.states;
  updated.control_ref = candidate.controls;

  out.policy = updated;
  out.states = candidate.states;
  out.controls = candidate.controls;
  out.feedback_ms = ms_since(t0);

  s.pending = Impl::Pending{std::move(candidate), std::move(updated)};
  return out;
}

double NmpcController::preparation_step() {
  Impl& s = *impl_;
  const auto t0 = Clock::now();
  if (!s.pending)
    throw Error("preparation_step requires a published feedback step");

  s.traj.states = std::move(s.pending->traj.states);
  s.traj.controls = std::move(s.pending->traj.controls);
  s.traj.defects.assign(s.problem.horizon, Vector::Zero(s.problem.state_dim));
  s.policy = std::move(s.pending->policy);
  s.pending.reset();

  const int shift = s.settings.shift_per_cycle;
  if (shift > 0) {
    const int horizon = s.problem.horizon;
    for (int n = 0; n + shift <= horizon; ++n)
      s.traj.states[n] = s.traj.states[n + shift];
    for (int n = 0; n < horizon; ++n) {
      const int src = std::min(n + shift, horizon - 1);
      s.traj.controls[n] = s.traj.controls[src];
      s.policy.gains[n] = s.policy.gains[src];
    }
    s.policy.state_ref = s.traj.states;
    s.policy.control_ref = s.traj.controls;
  }

  s.prepare_intervals();
  s.stage_clock += 1;
  return ms_since(t0);
}

ClosedLoopResult run_closed_loop(const DynamicsModel& plant_model,
                                 const NoiseConfig& noise, NmpcController& controller,
                                 const OcProblem& problem, double duration) {
  ClosedLoopResult result;
  const int cycles = static_cast<int>(std::llround(duration / problem.dt));
  Vector x = problem.x_init;

  std::mt19937_64 rng(noise.seed ^ 0x2545f4914f6cdd1dull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  double total_ms = 0.0;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    const FeedbackResult fb = controller.feedback_step(x);
    const Vector u = fb.policy.control_ref[0] +
                     fb.policy.gains[0] * (x - fb.policy.state_ref[0]);

    const int stage = std::min(cycle, problem.horizon - 1);
    const double stage_cost = problem.cost->stage_cost(x, u, stage);
    result.accumulated_cost += stage_cost;

    Vector x_next;
    try {
      x_next = step(plant_model, problem.integrator, x, u);
    } catch (const DivergenceError&) {
      result.plant_diverged = true;
      break;
    }
    if (noise.scale > 0.0) {
      for (int i = 0; i < x_next.size(); ++i)
        x_next[i] += noise.scale * unit(rng);
    }

    const double prep_ms = controller.preparation_step();
    total_ms += fb.feedback_ms + prep_ms;

    CycleLog log;
    log.cycle = cycle;
    log.t_sim = cycle * problem.dt;
    log.x_meas = x;
    log.cost_stage = stage_cost;
    log.feedback_ms = fb.feedback_ms;
    log.prep_ms = prep_ms;
    log.fallback = fb.fallback;
    result.cycles.push_back(std::move(log));

    x = std::move(x_next);
  }

  result.final_state = x;
  if (!result.cycles.empty()) {
    result.mean_cycle_ms = total_ms / static_cast<double>(result.cycles.size());
    result.mean_frequency_hz =
        result.mean_cycle_ms > 0.0 ? 1000.0 / result.mean_cycle_ms : 0.0;
  }
  return result;
}

}  // namespace gns
