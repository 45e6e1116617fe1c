#include "gns/dynamics.hpp"

#include <cmath>
#include <string>

namespace gns {

namespace {

bool finite(const Vector& v) { return v.allFinite(); }

struct SubstepResult {
  Vector x;
  Matrix A;  // d x_next / d x over this substep
  Matrix B;  // d x_next / d u over this substep
};

Vector euler_substep(const DynamicsModel& model, const Vector& x, const Vector& u,
                     double h) {
  return x + h * model.flow(x, u);
}

SubstepResult euler_substep_sens(const DynamicsModel& model, const Vector& x,
                                 const Vector& u, double h) {
  const int m = model.state_dim();
  SubstepResult out;
  out.x = x + h * model.flow(x, u);
  out.A = Matrix::Identity(m, m) + h * model.flow_jacobian_state(x, u);
  out.B = h * model.flow_jacobian_control(x, u);
  return out;
}

Vector rk4_substep(const DynamicsModel& model, const Vector& x, const Vector& u,
                   double h) {
  const Vector k1 = model.flow(x, u);
  const Vector k2 = model.flow(x + 0.5 * h * k1, u);
  const Vector k3 = model.flow(x + 0.5 * h * k2, u);
  const Vector k4 = model.flow(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SubstepResult rk4_substep_sens(const DynamicsModel& model, const Vector& x,
                               const Vector& u, double h) {
  const int m = model.state_dim();
  const Matrix eye = Matrix::Identity(m, m);

  const Vector x1 = x;
  const Vector k1 = model.flow(x1, u);
  const Vector x2 = x + 0.5 * h * k1;
  const Vector k2 = model.flow(x2, u);
  const Vector x3 = x + 0.5 * h * k2;
  const Vector k3 = model.flow(x3, u);
  const Vector x4 = x + h * k3;
  const Vector k4 = model.flow(x4, u);

  // Chain rule through the stage evaluations: dk_i/dx and dk_i/du.
  const Matrix f1x = model.flow_jacobian_state(x1, u);
  const Matrix f1u = model.flow_jacobian_control(x1, u);
  const Matrix f2x = model.flow_jacobian_state(x2, u);
  const Matrix f2u = model.flow_jacobian_control(x2, u);
  const Matrix f3x = model.flow_jacobian_state(x3, u);
  const Matrix f3u = model.flow_jacobian_control(x3, u);
  const Matrix f4x = model.flow_jacobian_state(x4, u);
  const Matrix f4u = model.flow_jacobian_control(x4, u);

  const Matrix dk1x = f1x;
  const Matrix dk1u = f1u;
  const Matrix dk2x = f2x * (eye + 0.5 * h * dk1x);
  const Matrix dk2u = f2x * (0.5 * h * dk1u) + f2u;
  const Matrix dk3x = f3x * (eye + 0.5 * h * dk2x);
  const Matrix dk3u = f3x * (0.5 * h * dk2u) + f3u;
  const Matrix dk4x = f4x * (eye + h * dk3x);
  const Matrix dk4u = f4x * (h * dk3u) + f4u;

  SubstepResult out;
  out.x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.A = eye + (h / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x);
  out.B = (h / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u);
  return out;
}

}  // namespace

Matrix DynamicsModel::flow_jacobian_state(const Vector& x, const Vector& u) const {
  const int m = state_dim();
  Matrix jac(m, m);
  Vector xp = x;
  for (int j = 0; j < m; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const Vector fp = flow(xp, u);
    xp[j] = x[j] - h;
    const Vector fm = flow(xp, u);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Matrix DynamicsModel::flow_jacobian_control(const Vector& x, const Vector& u) const {
  const int p = control_dim();
  Matrix jac(state_dim(), p);
  Vector up = u;
  for (int j = 0; j < p; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
    up[j] = u[j] + h;
    const Vector fp = flow(x, up);
    up[j] = u[j] - h;
    const Vector fm = flow(x, up);
    up[j] = u[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Vector step(const DynamicsModel& model, const Integrator& integ, const Vector& x,
            const Vector& u) {
  const double h = integ.dt / integ.substeps;
  Vector xi = x;
  for (int s = 0; s < integ.substeps; ++s) {
    xi = integ.scheme == Integrator::Scheme::Euler ? euler_substep(model, xi, u, h)
                                                   : rk4_substep(model, xi, u, h);
  }
  if (!finite(xi))
    throw DivergenceError("integration produced a non-finite state", -1, -1);
  return xi;
}

std::pair<Vector, StageSensitivity> step_with_sensitivity(const DynamicsModel& model,
                                                          const Integrator& integ,
                                                          const Vector& x,
                                                          const Vector& u) {
  const double h = integ.dt / integ.substeps;
  const int m = model.state_dim();
  const int p = model.control_dim();

  Vector xi = x;
  Matrix A = Matrix::Identity(m, m);
  Matrix B = Matrix::Zero(m, p);
  for (int s = 0; s < integ.substeps; ++s) {
    const SubstepResult sub = integ.scheme == Integrator::Scheme::Euler
                                  ? euler_substep_sens(model, xi, u, h)
                                  : rk4_substep_sens(model, xi, u, h);
    // Compose with the substeps so far: x -> xi -> sub.x.
    B = sub.A * B + sub.B;
    A = sub.A * A;
    xi = sub.x;
  }
  if (!finite(xi) || !A.allFinite() || !B.allFinite())
    throw DivergenceError("integration produced a non-finite state", -1, -1);
  return {std::move(xi), StageSensitivity{std::move(A), std::move(B)}};
}

IntervalRollout rollout_interval(const DynamicsModel& model, const Integrator& integ,
                                 const Vector& x_start, std::span<const Vector> controls,
                                 const PolicyView& policy, int interval_index) {
  IntervalRollout out;
  out.states.reserve(controls.size() + 1);
  out.controls.reserve(controls.size());
  out.states.push_back(x_start);

  for (std::size_t j = 0; j < controls.size(); ++j) {
    const Vector& x = out.states.back();
    Vector u;
    if (policy.policy != nullptr && !policy.policy->empty()) {
      const int n = policy.first_stage + static_cast<int>(j);
      const AffinePolicy& law = *policy.policy;
      u = law.control_ref[n] + law.gains[n] * (x - law.state_ref[n]);
      if (!law.feedforward.empty()) u += policy.step_scale * law.feedforward[n];
    } else {
      u = controls[j];
    }
    Vector x_next;
    try {
      x_next = step(model, integ, x, u);
    } catch (const DivergenceError&) {
      throw DivergenceError(
          "rollout diverged in interval " + std::to_string(interval_index) +
              " at stage " + std::to_string(policy.first_stage + static_cast<int>(j)),
          interval_index, policy.first_stage + static_cast<int>(j));
    }
    out.controls.push_back(std::move(u));
    out.states.push_back(std::move(x_next));
  }
  return out;
}

}  // namespace gns
