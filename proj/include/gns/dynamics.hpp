#pragma once

#include <Eigen/Core>

#include <memory>
#include <span>
#include <vector>

#include "gns/errors.hpp"

namespace gns {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Continuous-time control system dx/dt = f(x, u).
///
/// Models are stateless after construction: evaluation is const, deterministic
/// and safe to call concurrently. Jacobians default to central finite
/// differences of f(); override both for analytic derivatives.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  /// Continuous vector field f(x, u).
  virtual Vector flow(const Vector& x, const Vector& u) const = 0;

  /// df/dx of the continuous vector field.
  virtual Matrix flow_jacobian_state(const Vector& x, const Vector& u) const;

  /// df/du of the continuous vector field.
  virtual Matrix flow_jacobian_control(const Vector& x, const Vector& u) const;
};

/// Fixed-step integration scheme turning the continuous model into a
/// discrete flow map over one control stage (zero-order-hold control).
struct Integrator {
  enum class Scheme { Euler, RK4 };

  Scheme scheme = Scheme::RK4;
  double dt = 0.01;   // control stage duration [s]
  int substeps = 1;   // integration substeps per control stage

  void validate() const {
    if (dt <= 0.0) throw ConfigError("integrator dt must be positive", "dt");
    if (substeps < 1) throw ConfigError("integrator substeps must be >= 1", "substeps");
  }
};

/// Exact Jacobians of the discrete flow map, A = dF/dx, B = dF/du.
struct StageSensitivity {
  Matrix A;
  Matrix B;
};

/// Integrates one control stage: x_next = F(x, u).
/// Throws DivergenceError if the result is non-finite.
Vector step(const DynamicsModel& model, const Integrator& integ, const Vector& x,
            const Vector& u);

/// Integrates one control stage and propagates the Jacobians of the discrete
/// map through every integrator stage and substep by the chain rule. The
/// returned A, B are exact for the discrete flow (up to the accuracy of the
/// model's continuous Jacobians), so the LQ model matches the simulated
/// rollout to machine precision.
std::pair<Vector, StageSensitivity> step_with_sensitivity(const DynamicsModel& model,
                                                          const Integrator& integ,
                                                          const Vector& x,
                                                          const Vector& u);

/// Time-varying affine feedback law u_n(x) = u_ref_n + ff_n + L_n (x - x_ref_n).
/// The feedforward block may be empty (pure tracking feedback).
struct AffinePolicy {
  std::vector<Vector> feedforward;  // per stage, may be empty
  std::vector<Matrix> gains;        // L_n, per stage
  std::vector<Vector> state_ref;    // x_ref_n
  std::vector<Vector> control_ref;  // u_ref_n

  bool empty() const { return gains.empty(); }
};

/// View of an affine policy over one shooting interval. `first_stage` maps
/// local indices to the policy's global stage index; `step_scale` scales the
/// feedforward term (line-search damping).
struct PolicyView {
  const AffinePolicy* policy = nullptr;
  int first_stage = 0;
  double step_scale = 1.0;
};

struct IntervalRollout {
  std::vector<Vector> states;    // length == controls.size() + 1, states[0] == x_start
  std::vector<Vector> controls;  // applied controls
};

/// Forward-integrates one shooting interval. Open-loop (no policy): applies
/// the stored controls. Closed-loop: applies the affine law at every inner
/// stage and returns the applied controls. Throws DivergenceError naming the
/// interval and stage on a non-finite state.
IntervalRollout rollout_interval(const DynamicsModel& model, const Integrator& integ,
                                 const Vector& x_start, std::span<const Vector> controls,
                                 const PolicyView& policy = {}, int interval_index = 0);

}  // namespace gns
