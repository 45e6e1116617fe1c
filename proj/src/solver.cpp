#include "gns/solver.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "gns/cost.hpp"
#include "gns/lq.hpp"

namespace gns {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Least-squares Newton iteration for a control holding f(x_init, u) = 0.
Vector steady_state_control(const DynamicsModel& model, const Vector& x) {
  Vector u = Vector::Zero(model.control_dim());
  for (int it = 0; it < 50; ++it) {
    const Vector residual = model.flow(x, u);
    if (residual.lpNorm<Eigen::Infinity>() < 1e-13) break;
    const Matrix J = model.flow_jacobian_control(x, u);
    const Matrix JtJ =
        J.transpose() * J + 1e-12 * Matrix::Identity(u.size(), u.size());
    u -= JtJ.ldlt().solve(J.transpose() * residual);
  }
  return u;
}

}  // namespace

std::string VariantConfig::name(int horizon) const {
  if (intervals == horizon) return "gnms";
  if (intervals == 1) return closed_loop ? "ilqr" : "ss";
  const std::string m = std::to_string(intervals);
  return closed_loop ? "ilqr-gnms(" + m + ")" : "gnms(" + m + ")";
}

void SolverSettings::validate() const {
  if (defect_tolerance <= 0.0)
    throw ConfigError("defect tolerance must be positive", "termination.d_max");
  if (cost_change_tolerance <= 0.0)
    throw ConfigError("relative cost tolerance must be positive",
                      "termination.j_rel_min");
  if (max_iterations < 1)
    throw ConfigError("max_iterations must be >= 1", "termination.max_iters");
  if (line_search.merit_defect_weight < 0.0)
    throw ConfigError("merit defect weight must be >= 0", "line_search.rho");
  if (line_search.max_backtracks < 0)
    throw ConfigError("max_backtracks must be >= 0", "line_search.max_backtracks");
  if (regularization.mu_initial <= 0.0 || regularization.mu_growth <= 1.0 ||
      regularization.mu_cap < regularization.mu_initial)
    throw ConfigError("invalid regularization schedule", "regularization");
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::unstable_rollout: return "unstable_rollout";
  }
  return "unknown";
}

std::vector<std::vector<Vector>> SolveResult::control_iterates() const {
  std::vector<std::vector<Vector>> out;
  out.reserve(iterates.size());
  for (const Trajectory& traj : iterates) out.push_back(traj.controls);
  return out;
}

AffinePolicy tracking_policy(const RiccatiSolution& sol, const Trajectory& traj) {
  AffinePolicy policy;
  policy.gains.reserve(sol.stages.size());
  for (const RiccatiSolution::Stage& st : sol.stages) policy.gains.push_back(st.gain);
  policy.state_ref = traj.states;
  policy.control_ref = traj.controls;
  return policy;
}

Initialization initialize(const OcProblem& problem, const VariantConfig& variant,
                          const InitStrategy& strategy, const AffinePolicy* gains,
                          ThreadPool* pool) {
  problem.validate();
  const IntervalPartition partition =
      make_partition(problem.horizon, variant.intervals);
  const int horizon = problem.horizon;

  Trajectory guess = Trajectory::zero(problem);
  const AffinePolicy* rollout_policy = gains;

  if (std::holds_alternative<InitSteadyState>(strategy)) {
    const Vector u = steady_state_control(*problem.dynamics, problem.x_init);
    for (int n = 0; n <= horizon; ++n) guess.states[n] = problem.x_init;
    for (int n = 0; n < horizon; ++n) guess.controls[n] = u;
  } else if (const auto* interp = std::get_if<InitInterpolate>(&strategy)) {
    if (interp->x_goal.size() != problem.state_dim)
      throw DimensionError("interpolation goal has wrong size");
    for (int n = 0; n <= horizon; ++n) {
      const double t = static_cast<double>(n) / horizon;
      guess.states[n] = (1.0 - t) * problem.x_init + t * interp->x_goal;
    }
  } else if (const auto* provided = std::get_if<InitProvided>(&strategy)) {
    if (static_cast<int>(provided->states.size()) != horizon + 1 ||
        static_cast<int>(provided->controls.size()) != horizon)
      throw DimensionError("provided initialization has wrong lengths");
    guess.states = provided->states;
    guess.controls = provided->controls;
    guess.states[0] = problem.x_init;
  } else if (const auto* pol = std::get_if<InitPolicy>(&strategy)) {
    if (static_cast<int>(pol->policy.gains.size()) != horizon)
      throw DimensionError("initial policy has wrong length");
    guess.states = pol->policy.state_ref;
    if (static_cast<int>(guess.states.size()) != horizon + 1)
      throw DimensionError("initial policy reference has wrong length");
    guess.states[0] = problem.x_init;
    rollout_policy = &pol->policy;
  }

  RolloutResult rolled;
  try {
    rolled = initial_rollout(problem, partition, guess, rollout_policy, pool);
  } catch (const DivergenceError& e) {
    throw DivergenceError("unstable initialization: " + std::string(e.what()),
                          e.interval(), e.stage());
  }

  Initialization init;
  init.trajectory = std::move(rolled.traj);
  init.sens = std::move(rolled.sens);
  if (rollout_policy != nullptr) init.policy = *rollout_policy;
  return init;
}

SolveResult solve(const OcProblem& problem, const VariantConfig& variant,
                  const SolverSettings& settings, const Initialization& init) {
  problem.validate();
  settings.validate();
  const IntervalPartition partition =
      make_partition(problem.horizon, variant.intervals);

  const int n_threads = ThreadPool::resolve_thread_count(settings.threads);
  std::optional<ThreadPool> pool;
  if (n_threads > 1 && partition.intervals() > 1) pool.emplace(n_threads);
  ThreadPool* pool_ptr = pool ? &*pool : nullptr;

  SolveResult result;
  Trajectory traj = init.trajectory;
  std::vector<StageSensitivity> sens = init.sens;

  double cost = evaluate(*problem.cost, traj);
  double defect = total_defect(traj);
  result.initial_cost = cost;
  result.initial_defect = defect;
  result.iterates.push_back(traj);
  result.status = SolveStatus::max_iters;

  const double rho = settings.line_search.merit_defect_weight;

  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    const auto t0 = Clock::now();

    const LQSubproblem lq = assemble(problem, traj, sens);
    if (settings.lq_observer) settings.lq_observer(iter, lq);
    const RiccatiSolution sweep = backward_sweep(lq, settings.regularization);
    result.policy = sweep;

    RolloutResult rolled;
    double new_cost = 0.0;
    double alpha = 1.0;
    bool accepted = false;

    if (!settings.line_search.enabled) {
      Trajectory cand = forward_sweep(lq, sweep, traj, problem.x_init, 1.0);
      try {
        rolled = rollout_and_defects(problem, partition, cand, sweep, traj,
                                     variant.closed_loop, 1.0, pool_ptr);
      } catch (const DivergenceError& e) {
        result.status = SolveStatus::unstable_rollout;
        result.message = e.what();
        break;
      }
      new_cost = evaluate(*problem.cost, rolled.traj);
      accepted = true;
    } else {
      const double merit_old = cost + rho * defect;
      for (int bt = 0; bt <= settings.line_search.max_backtracks; ++bt) {
        alpha = std::ldexp(1.0, -bt);  // 1, 1/2, ..., 1/2^max_backtracks
        Trajectory cand = forward_sweep(lq, sweep, traj, problem.x_init, alpha);
        RolloutResult trial;
        double trial_cost;
        try {
          trial = rollout_and_defects(problem, partition, cand, sweep, traj,
                                      variant.closed_loop, alpha, pool_ptr);
          trial_cost = evaluate(*problem.cost, trial.traj);
        } catch (const DivergenceError&) {
          continue;  // step too aggressive, damp further
        } catch (const ModelError&) {
          continue;
        }
        const double merit = trial_cost + rho * total_defect(trial.traj);
        if (merit < merit_old) {
          rolled = std::move(trial);
          new_cost = trial_cost;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        result.message = "line search found no merit-improving step";
        break;  // keep the last accepted iterate; status stays max_iters
      }
    }

    const double update_norm =
        control_update_norm(rolled.traj.controls, traj.controls);
    const double previous_cost = cost;
    traj = std::move(rolled.traj);
    sens = std::move(rolled.sens);
    cost = new_cost;
    defect = total_defect(traj);
    result.iterates.push_back(traj);

    IterationRecord record;
    record.iter = iter;
    record.cost = cost;
    record.defect_l1 = defect;
    record.update_norm = update_norm;
    record.alpha = alpha;
    record.wall_ms = ms_since(t0);
    result.records.push_back(record);
    if (settings.record_sink) settings.record_sink(record);

    if (std::abs(cost) > 1e6 * (std::abs(result.initial_cost) + 1.0) ||
        defect > 1e6 * (result.initial_defect + 1.0)) {
      result.status = SolveStatus::diverged;
      result.message = "cost or defect grew by more than 1e6x the initial value";
      break;
    }

    const double denom = std::abs(cost);
    const double change = std::abs(cost - previous_cost);
    const double relative_change =
        denom > 0.0 ? change / denom
                    : (change == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (relative_change < settings.cost_change_tolerance &&
        defect < settings.defect_tolerance) {
      result.status = SolveStatus::converged;
      break;
    }
  }

  result.trajectory = std::move(traj);
  return result;
}

double contraction_rate(const std::vector<std::vector<Vector>>& control_iterates,
                        const std::vector<Vector>& u_star, int window,
                        double floor) {
  struct Point {
    double k;
    double log_err;
  };
  std::vector<Point> usable;
  for (std::size_t k = 0; k < control_iterates.size(); ++k) {
    const double err = control_update_norm(control_iterates[k], u_star);
    if (std::isfinite(err) && err > floor)
      usable.push_back({static_cast<double>(k), std::log(err)});
  }
  if (usable.size() < 2)
    throw InsufficientDataError(
        "need at least two iterates measurably away from the solution");
  if (window > 0 && static_cast<int>(usable.size()) > window)
    usable.erase(usable.begin(), usable.end() - window);

  double mean_k = 0.0, mean_e = 0.0;
  for (const Point& pt : usable) {
    mean_k += pt.k;
    mean_e += pt.log_err;
  }
  mean_k /= static_cast<double>(usable.size());
  mean_e /= static_cast<double>(usable.size());
  double cov = 0.0, var = 0.0;
  for (const Point& pt : usable) {
    cov += (pt.k - mean_k) * (pt.log_err - mean_e);
    var += (pt.k - mean_k) * (pt.k - mean_k);
  }
  if (var == 0.0)
    throw InsufficientDataError("iterates collapse onto a single index");
  return std::exp(cov / var);
}

}  // namespace gns
