#pragma once

#include "gns/lq.hpp"

namespace gns {

/// Direct solution of the LQ subproblem as an equality-constrained QP.
struct KktSolution {
  std::vector<Vector> dx;  // n = 0 .. N, dx[0] = 0
  std::vector<Vector> du;  // n = 0 .. N-1
  double objective_change = 0.0;  // optimal objective excluding constant terms
};

/// Solves the LQ subproblem monolithically through a dense factorization of
/// the KKT system stacking stationarity and constraint rows for the decision
/// vector (dx_1..dx_N, du_0..du_{N-1}) and the constraint multipliers
/// (dx_0 = 0 eliminated). Brute-force correctness reference for the Riccati
/// sweep; never used inside the production iteration. O((N(m+p))^3).
/// Throws DegenerateProblemError if the KKT matrix is singular.
KktSolution solve_kkt(const LQSubproblem& lq);

}  // namespace gns
