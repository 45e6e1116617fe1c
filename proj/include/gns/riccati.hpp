#pragma once

#include <vector>

#include "gns/lq.hpp"

namespace gns {

/// Levenberg-style fallback for stages where H_n fails to factorize:
/// H_n <- H_n + mu I with mu escalating geometrically until the factorization
/// succeeds or mu exceeds the cap (NonConvexityError).
struct Regularization {
  double mu_initial = 1e-6;
  double mu_growth = 10.0;
  double mu_cap = 1e6;
};

/// Output of the backward sweep: affine policy terms and the quadratic
/// value function
///   V_n(dx) = s0_n + dx's_n + 1/2 dx'S_n dx.
/// The stored H_n include any regularization, so l_n = -H_n^{-1} h_n and
/// L_n = -H_n^{-1} G_n hold exactly as stored.
struct RiccatiSolution {
  struct Stage {
    Vector feedforward;  // l_n
    Matrix gain;         // L_n
    Matrix H;            // p x p
    Matrix G;            // p x m
    Vector h;            // p
  };

  std::vector<Stage> stages;    // n = 0 .. N-1
  std::vector<Matrix> S;        // n = 0 .. N
  std::vector<Vector> s;        // n = 0 .. N
  std::vector<double> s0;       // n = 0 .. N

  int horizon() const { return static_cast<int>(stages.size()); }
};

/// Solves the LQ subproblem by the backward Riccati difference equations.
///
/// For n = N-1 .. 0, with terminal conditions S_N = Q_N, s_N = q_N, s0_N = q0_N:
///   h_n = r_n + B_n'(s_{n+1} + S_{n+1} d_n)
///   G_n = P_n + B_n'S_{n+1} A_n
///   H_n = R_n + B_n'S_{n+1} B_n
///   l_n = -H_n^{-1} h_n,  L_n = -H_n^{-1} G_n
///   S_n = Q_n + A_n'S_{n+1} A_n - L_n'H_n L_n          (symmetrized)
///   s_n = q_n + A_n'(s_{n+1} + S_{n+1} d_n) + G_n'l_n + L_n'(h_n + H_n l_n)
///   s0_n = q0_n + s0_{n+1} + d_n's_{n+1} + 1/2 d_n'S_{n+1} d_n
///          + l_n'(h_n + 1/2 H_n l_n)
///
/// H_n is solved through a Cholesky factorization; explicit inverses are
/// never formed. S_n is symmetrized after every update so asymmetry cannot
/// accumulate over long horizons.
RiccatiSolution backward_sweep(const LQSubproblem& lq,
                               const Regularization& reg = {});

/// Predicted total-cost change of the full-step update with dx_0 = 0:
/// s0_0 minus the constant cost terms. Matches the optimal objective change
/// of the LQ subproblem (KKT oracle) when no regularization was triggered.
double predicted_cost_change(const RiccatiSolution& sol, const LQSubproblem& lq);

}  // namespace gns
