#pragma once

#include <Eigen/Cholesky>

#include <random>

#include "gns/bench.hpp"
#include "gns/cost.hpp"
#include "gns/lq.hpp"
#include "gns/oracle.hpp"
#include "gns/riccati.hpp"
#include "gns/solver.hpp"

namespace gns::test {

/// Central finite differences of the discrete flow map, the independent
/// oracle for step_with_sensitivity.
inline StageSensitivity fd_step_jacobians(const DynamicsModel& model,
                                          const Integrator& integ, const Vector& x,
                                          const Vector& u, double eps = 1e-6) {
  const int m = model.state_dim();
  const int p = model.control_dim();
  StageSensitivity sens;
  sens.A.resize(m, m);
  sens.B.resize(m, p);
  Vector xp = x;
  for (int j = 0; j < m; ++j) {
    xp[j] = x[j] + eps;
    const Vector fp = step(model, integ, xp, u);
    xp[j] = x[j] - eps;
    const Vector fm = step(model, integ, xp, u);
    xp[j] = x[j];
    sens.A.col(j) = (fp - fm) / (2.0 * eps);
  }
  Vector up = u;
  for (int j = 0; j < p; ++j) {
    up[j] = u[j] + eps;
    const Vector fp = step(model, integ, x, up);
    up[j] = u[j] - eps;
    const Vector fm = step(model, integ, x, up);
    up[j] = u[j];
    sens.B.col(j) = (fp - fm) / (2.0 * eps);
  }
  return sens;
}

/// Seeded random LQ instance with PD R, PSD Q and random defects.
inline LQSubproblem random_lq(int m, int p, int horizon, unsigned long long seed,
                              bool with_defects = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto rand_matrix = [&](int rows, int cols) {
    Matrix mat(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) mat(i, j) = gauss(rng);
    return mat;
  };
  const auto rand_vector = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
  };

  LQSubproblem lq;
  lq.stages.resize(horizon);
  for (int n = 0; n < horizon; ++n) {
    LQSubproblem::Stage& st = lq.stages[n];
    st.A = Matrix::Identity(m, m) + 0.1 * rand_matrix(m, m);
    st.B = rand_matrix(m, p);
    st.d = with_defects ? Vector(0.3 * rand_vector(m)) : Vector(Vector::Zero(m));
    const Matrix q_root = rand_matrix(m, m);
    st.Q = q_root.transpose() * q_root;  // PSD
    const Matrix r_root = rand_matrix(p, p);
    st.R = r_root.transpose() * r_root + Matrix::Identity(p, p);  // PD
    st.P = 0.1 * rand_matrix(p, m);
    st.q = rand_vector(m);
    st.r = rand_vector(p);
    st.q0 = gauss(rng);
  }
  const Matrix qn_root = rand_matrix(m, m);
  lq.Q_terminal = qn_root.transpose() * qn_root;
  lq.q_terminal = rand_vector(m);
  lq.q0_terminal = gauss(rng);
  return lq;
}

/// Independent textbook iLQR step, written from the classical recipe:
/// quadratize around the rollout, standard Riccati recursion without defect
/// terms, closed-loop forward pass with full step. Used to pin the M = 1
/// closed-loop limit of the family.
struct TextbookIlqrIterate {
  std::vector<Vector> states;
  std::vector<Vector> controls;
  double cost = 0.0;
};

inline TextbookIlqrIterate textbook_ilqr_iteration(const OcProblem& problem,
                                                   const std::vector<Vector>& states,
                                                   const std::vector<Vector>& controls) {
  const int horizon = problem.horizon;
  const DynamicsModel& model = *problem.dynamics;
  const CostModel& cost = *problem.cost;

  // Linearize/quadratize along the current trajectory.
  std::vector<StageSensitivity> sens(horizon);
  std::vector<StageCostExpansion> stage_cost(horizon);
  for (int n = 0; n < horizon; ++n) {
    auto [x_next, s] = step_with_sensitivity(model, problem.integrator, states[n],
                                             controls[n]);
    (void)x_next;
    sens[n] = std::move(s);
    stage_cost[n] = cost.quadratize_stage(states[n], controls[n], n);
    stage_cost[n].Q = 0.5 * (stage_cost[n].Q + stage_cost[n].Q.transpose()).eval();
    stage_cost[n].R = 0.5 * (stage_cost[n].R + stage_cost[n].R.transpose()).eval();
  }
  TerminalCostExpansion terminal = cost.quadratize_terminal(states[horizon]);
  terminal.Q = 0.5 * (terminal.Q + terminal.Q.transpose()).eval();

  // Standard Riccati recursion (no defects anywhere).
  Matrix S = terminal.Q;
  Vector s = terminal.grad_x;
  std::vector<Vector> ff(horizon);
  std::vector<Matrix> gain(horizon);
  for (int n = horizon - 1; n >= 0; --n) {
    const Matrix& A = sens[n].A;
    const Matrix& B = sens[n].B;
    const Vector h = stage_cost[n].grad_u + B.transpose() * s;
    const Matrix G = stage_cost[n].P + B.transpose() * S * A;
    Matrix H = stage_cost[n].R + B.transpose() * S * B;
    H = 0.5 * (H + H.transpose()).eval();
    const Eigen::LLT<Matrix> llt(H);
    ff[n] = -llt.solve(h);
    gain[n] = -llt.solve(G);
    const Matrix S_new =
        stage_cost[n].Q + A.transpose() * S * A - gain[n].transpose() * H * gain[n];
    s = stage_cost[n].grad_x + A.transpose() * s + G.transpose() * ff[n] +
        gain[n].transpose() * (h + H * ff[n]);
    S = 0.5 * (S_new + S_new.transpose());
  }

  // Closed-loop forward pass.
  TextbookIlqrIterate out;
  out.states.resize(horizon + 1);
  out.controls.resize(horizon);
  out.states[0] = problem.x_init;
  for (int n = 0; n < horizon; ++n) {
    out.controls[n] = controls[n] + 1.0 * ff[n] + gain[n] * (out.states[n] - states[n]);
    out.states[n + 1] = step(model, problem.integrator, out.states[n], out.controls[n]);
  }
  for (int n = 0; n < horizon; ++n)
    out.cost += cost.stage_cost(out.states[n], out.controls[n], n);
  out.cost += cost.terminal_cost(out.states[horizon]);
  return out;
}

inline double relative_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double max_abs_diff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
  return worst;
}

}  // namespace gns::test
