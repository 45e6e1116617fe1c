#include "gns/bench.hpp"

#include <cmath>
#include <random>

#include "gns/cost.hpp"

namespace gns {

namespace {

/// dx/dt = (1 + x) x + u. Slightly nonlinear and unstable around the origin.
class ScalarUnstable : public DynamicsModel {
 public:
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }

  Vector flow(const Vector& x, const Vector& u) const override {
    Vector dx(1);
    dx[0] = (1.0 + x[0]) * x[0] + u[0];
    return dx;
  }
  Matrix flow_jacobian_state(const Vector& x, const Vector&) const override {
    Matrix j(1, 1);
    j(0, 0) = 1.0 + 2.0 * x[0];
    return j;
  }
  Matrix flow_jacobian_control(const Vector&, const Vector&) const override {
    return Matrix::Identity(1, 1);
  }
};

/// Torque-actuated pendulum, angle measured from the hanging position.
class Pendulum : public DynamicsModel {
 public:
  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }

  Vector flow(const Vector& x, const Vector& u) const override {
    Vector dx(2);
    dx[0] = x[1];
    dx[1] = -(kGravity / kLength) * std::sin(x[0]) + u[0];
    return dx;
  }
  Matrix flow_jacobian_state(const Vector& x, const Vector&) const override {
    Matrix j = Matrix::Zero(2, 2);
    j(0, 1) = 1.0;
    j(1, 0) = -(kGravity / kLength) * std::cos(x[0]);
    return j;
  }
  Matrix flow_jacobian_control(const Vector&, const Vector&) const override {
    Matrix j = Matrix::Zero(2, 1);
    j(1, 0) = 1.0;
    return j;
  }

 private:
  static constexpr double kGravity = 9.81;
  static constexpr double kLength = 1.0;
};

/// Cart-pole with state (cart position, pole angle from hanging, cart
/// velocity, pole rate) and a horizontal force input.
class CartPole : public DynamicsModel {
 public:
  int state_dim() const override { return 4; }
  int control_dim() const override { return 1; }

  Vector flow(const Vector& x, const Vector& u) const override {
    const double theta = x[1], xd = x[2], w = x[3], f = u[0];
    const double s = std::sin(theta), c = std::cos(theta);
    const double denom = kMassCart + kMassPole * s * s;

    Vector dx(4);
    dx[0] = xd;
    dx[1] = w;
    dx[2] = (f + kMassPole * s * (kLength * w * w + kGravity * c)) / denom;
    dx[3] = (-f * c - kMassPole * kLength * w * w * c * s -
             (kMassCart + kMassPole) * kGravity * s) /
            (kLength * denom);
    return dx;
  }

  Matrix flow_jacobian_state(const Vector& x, const Vector& u) const override {
    const double theta = x[1], w = x[3], f = u[0];
    const double s = std::sin(theta), c = std::cos(theta);
    const double c2 = std::cos(2.0 * theta);
    const double denom = kMassCart + kMassPole * s * s;
    const double ddenom = 2.0 * kMassPole * s * c;  // d denom / d theta

    const double n3 = f + kMassPole * s * (kLength * w * w + kGravity * c);
    const double n3_theta = kMassPole * (c * kLength * w * w + kGravity * c2);
    const double n4 = -f * c - kMassPole * kLength * w * w * c * s -
                      (kMassCart + kMassPole) * kGravity * s;
    const double n4_theta = f * s - kMassPole * kLength * w * w * c2 -
                            (kMassCart + kMassPole) * kGravity * c;

    Matrix j = Matrix::Zero(4, 4);
    j(0, 2) = 1.0;
    j(1, 3) = 1.0;
    j(2, 1) = n3_theta / denom - n3 * ddenom / (denom * denom);
    j(2, 3) = 2.0 * kMassPole * s * kLength * w / denom;
    j(3, 1) = n4_theta / (kLength * denom) -
              n4 * ddenom / (kLength * denom * denom);
    j(3, 3) = -2.0 * kMassPole * w * c * s / denom;
    return j;
  }

  Matrix flow_jacobian_control(const Vector& x, const Vector&) const override {
    const double theta = x[1];
    const double s = std::sin(theta), c = std::cos(theta);
    const double denom = kMassCart + kMassPole * s * s;
    Matrix j = Matrix::Zero(4, 1);
    j(2, 0) = 1.0 / denom;
    j(3, 0) = -c / (kLength * denom);
    return j;
  }

 private:
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.3;
  static constexpr double kLength = 0.5;
  static constexpr double kGravity = 9.81;
};

/// Seeded random stable-ish LTI system dx/dt = A x + B u.
class LinearRandom : public DynamicsModel {
 public:
  LinearRandom(int m, int p, unsigned long long seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    A_.resize(m, m);
    B_.resize(m, p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A_(i, j) = gauss(rng) / std::sqrt(double(m));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p; ++j) B_(i, j) = gauss(rng);
  }

  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int control_dim() const override { return static_cast<int>(B_.cols()); }

  Vector flow(const Vector& x, const Vector& u) const override {
    return A_ * x + B_ * u;
  }
  Matrix flow_jacobian_state(const Vector&, const Vector&) const override {
    return A_;
  }
  Matrix flow_jacobian_control(const Vector&, const Vector&) const override {
    return B_;
  }

 private:
  Matrix A_;
  Matrix B_;
};

struct Preset {
  int state_dim;
  int control_dim;
  double dt;
  int horizon;
  Vector x_init;
  Vector x_des;
  Matrix Q;
  Matrix R;
  Matrix Q_terminal;
};

Preset preset_for(const std::string& name) {
  Preset p;
  if (name == "scalar_unstable") {
    p.state_dim = 1;
    p.control_dim = 1;
    p.dt = 0.01;
    p.horizon = 300;
    p.x_init = Vector::Constant(1, 1.5);
    p.x_des = Vector::Zero(1);
    p.Q = Matrix::Zero(1, 1);
    p.R = Matrix::Constant(1, 1, 0.01);
    p.Q_terminal = Matrix::Constant(1, 1, 10.0);
  } else if (name == "pendulum") {
    p.state_dim = 2;
    p.control_dim = 1;
    p.dt = 0.02;
    p.horizon = 150;
    p.x_init = Vector::Zero(2);
    p.x_des = (Vector(2) << M_PI, 0.0).finished();
    p.Q = 0.01 * Matrix::Identity(2, 2);
    p.R = 0.01 * Matrix::Identity(1, 1);
    p.Q_terminal = (Vector(2) << 100.0, 10.0).finished().asDiagonal();
  } else if (name == "cartpole") {
    p.state_dim = 4;
    p.control_dim = 1;
    p.dt = 0.02;
    p.horizon = 150;
    p.x_init = Vector::Zero(4);
    p.x_des = (Vector(4) << 0.0, M_PI, 0.0, 0.0).finished();
    p.Q = 0.01 * Matrix::Identity(4, 4);
    p.R = 0.01 * Matrix::Identity(1, 1);
    p.Q_terminal = (Vector(4) << 10.0, 100.0, 10.0, 10.0).finished().asDiagonal();
  } else if (name == "linear_random") {
    p.state_dim = 3;
    p.control_dim = 2;
    p.dt = 0.05;
    p.horizon = 40;
    p.x_init = Vector::Constant(3, 1.0);
    p.x_des = Vector::Zero(3);
    p.Q = 0.1 * Matrix::Identity(3, 3);
    p.R = 0.1 * Matrix::Identity(2, 2);
    p.Q_terminal = Matrix::Identity(3, 3);
  } else {
    throw ConfigError("unknown system '" + name + "'", "system");
  }
  return p;
}

}  // namespace

std::vector<std::string> builtin_systems() {
  return {"scalar_unstable", "pendulum", "cartpole", "linear_random"};
}

OcProblem make_benchmark_problem(const std::string& name,
                                 const BenchOverrides& overrides) {
  Preset p = preset_for(name);

  if (overrides.q_weight)
    p.Q = *overrides.q_weight * Matrix::Identity(p.state_dim, p.state_dim);
  if (overrides.r_weight)
    p.R = *overrides.r_weight * Matrix::Identity(p.control_dim, p.control_dim);
  if (overrides.q_terminal_weight)
    p.Q_terminal =
        *overrides.q_terminal_weight * Matrix::Identity(p.state_dim, p.state_dim);
  if (overrides.x_init) p.x_init = *overrides.x_init;
  if (overrides.x_des) p.x_des = *overrides.x_des;

  OcProblem problem;
  problem.state_dim = p.state_dim;
  problem.control_dim = p.control_dim;
  problem.horizon = overrides.horizon.value_or(p.horizon);
  problem.dt = overrides.dt.value_or(p.dt);
  problem.x_init = p.x_init;
  problem.integrator.dt = problem.dt;
  problem.integrator.scheme = overrides.scheme.value_or(Integrator::Scheme::RK4);

  if (name == "scalar_unstable") {
    problem.dynamics = std::make_shared<ScalarUnstable>();
  } else if (name == "pendulum") {
    problem.dynamics = std::make_shared<Pendulum>();
  } else if (name == "cartpole") {
    problem.dynamics = std::make_shared<CartPole>();
  } else {
    problem.dynamics = std::make_shared<LinearRandom>(p.state_dim, p.control_dim,
                                                      overrides.seed.value_or(0));
  }

  Vector u_des = overrides.u_des.value_or(Vector::Zero(p.control_dim));
  auto cost = std::make_shared<QuadraticTrackingCost>(p.Q, p.R, p.Q_terminal,
                                                      p.x_des, u_des, p.x_des);
  problem.cost = std::move(cost);
  problem.validate();
  return problem;
}

InitStrategy default_init(const std::string& name, const OcProblem& problem) {
  if (name == "linear_random")
    return InitInterpolate{Vector::Zero(problem.state_dim)};
  return InitSteadyState{};
}

ConvergenceExperiment run_convergence_experiment(
    const OcProblem& problem, const std::vector<VariantConfig>& variants,
    const InitStrategy& init, const SolverSettings& settings) {
  ConvergenceExperiment experiment;
  experiment.runs.reserve(variants.size());
  for (const VariantConfig& variant : variants) {
    VariantRun run;
    run.variant = variant;
    run.name = variant.name(problem.horizon);
    try {
      const Initialization initialization = initialize(problem, variant, init);
      run.result = solve(problem, variant, settings, initialization);
    } catch (const DivergenceError& e) {
      run.result.status = SolveStatus::unstable_rollout;
      run.result.message = e.what();
    } catch (const NonConvexityError& e) {
      run.result.status = SolveStatus::diverged;
      run.result.message = e.what();
    }
    experiment.runs.push_back(std::move(run));
  }
  return experiment;
}

namespace {

/// Deterministic per-sample draw from the uniform ball of radius `scale`.
Vector perturbation(int dim, double scale, unsigned long long seed, int sample) {
  std::mt19937_64 rng(seed * 0x100000001b3ull + static_cast<unsigned long long>(sample) +
                      0xcbf29ce484222325ull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector delta(dim);
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (int i = 0; i < dim; ++i) delta[i] = unit(rng);
    if (delta.squaredNorm() <= 1.0) return scale * delta;
  }
  return scale * delta / std::max(1.0, delta.norm());
}

}  // namespace

std::vector<ContractionStats> run_contraction_study(
    const OcProblem& problem, const std::vector<VariantConfig>& variants,
    const ContractionStudySettings& settings) {
  SolverSettings tight;
  tight.defect_tolerance = settings.defect_tolerance;
  tight.cost_change_tolerance = settings.cost_change_tolerance;
  tight.max_iterations = settings.max_iterations;
  tight.threads = 1;

  // Fully converged reference solution; also the normalization anchor.
  const VariantConfig ref_variant = VariantConfig::ilqr();
  const Initialization ref_init =
      initialize(problem, ref_variant, InitSteadyState{});
  const SolveResult reference = solve(problem, ref_variant, tight, ref_init);
  if (reference.status != SolveStatus::converged)
    throw Error("contraction study: reference solve did not converge");
  const AffinePolicy ref_policy =
      tracking_policy(reference.policy, reference.trajectory);

  const int n_samples = settings.samples;
  std::vector<ContractionStats> stats;
  stats.reserve(variants.size());

  ThreadPool pool(ThreadPool::resolve_thread_count(settings.threads));

  for (const VariantConfig& variant : variants) {
    enum class Outcome { ok, excluded, degenerate };
    std::vector<Outcome> outcomes(n_samples, Outcome::excluded);
    std::vector<double> rates(n_samples, 0.0);

    pool.run_indexed(n_samples, [&](int sample) {
      OcProblem perturbed = problem;
      perturbed.x_init =
          problem.x_init + perturbation(problem.state_dim, settings.perturbation_scale,
                                        settings.seed, sample);
      try {
        const InitStrategy init_strategy = InitProvided{
            reference.trajectory.states, reference.trajectory.controls};
        const Initialization init =
            initialize(perturbed, variant, init_strategy,
                       variant.closed_loop ? &ref_policy : nullptr);
        const SolveResult result = solve(perturbed, variant, tight, init);
        if (result.status != SolveStatus::converged) return;
        if (result.records.size() < 2) {
          // Converged immediately (e.g. zero perturbation): no decaying
          // sequence to fit a limit ratio to.
          outcomes[sample] = Outcome::degenerate;
          return;
        }

        // Fully converged reference for this sample: continue well past the
        // termination point so the measured iterates are compared against a
        // fixed point resolved below their own error floor.
        SolverSettings deep = tight;
        deep.cost_change_tolerance = 1e-15;
        deep.defect_tolerance = 1e-14;
        deep.max_iterations = 30;
        const AffinePolicy warm_policy =
            tracking_policy(result.policy, result.trajectory);
        const Initialization warm = initialize(
            perturbed, variant,
            InitProvided{result.trajectory.states, result.trajectory.controls},
            variant.closed_loop ? &warm_policy : nullptr);
        const SolveResult resolved = solve(perturbed, variant, deep, warm);

        try {
          rates[sample] =
              contraction_rate(result.control_iterates(),
                               resolved.trajectory.controls,
                               settings.rate_fit_window);
          outcomes[sample] = Outcome::ok;
        } catch (const InsufficientDataError&) {
          outcomes[sample] = Outcome::degenerate;
        }
      } catch (const Error&) {
        // divergence / instability: excluded and counted
      }
    });

    ContractionStats st;
    st.variant = variant;
    st.variant_name = variant.name(problem.horizon);
    for (int i = 0; i < n_samples; ++i) {
      switch (outcomes[i]) {
        case Outcome::ok:
          st.rates.push_back(rates[i]);
          ++st.n_converged;
          break;
        case Outcome::degenerate:
          ++st.n_degenerate;
          ++st.n_converged;
          break;
        case Outcome::excluded:
          ++st.n_excluded;
          break;
      }
    }
    if (!st.rates.empty()) {
      double mean = 0.0;
      for (double r : st.rates) mean += r;
      mean /= static_cast<double>(st.rates.size());
      double var = 0.0;
      for (double r : st.rates) var += (r - mean) * (r - mean);
      st.mean_rate = mean;
      st.std_rate = std::sqrt(var / static_cast<double>(st.rates.size()));
    }
    stats.push_back(std::move(st));
  }
  return stats;
}

}  // namespace gns
