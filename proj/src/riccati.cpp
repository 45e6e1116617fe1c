#include "gns/riccati.hpp"

#include <Eigen/Cholesky>

#include <string>

namespace gns {

namespace {

/// Cholesky of H, retried with H + mu I on failure, mu escalating
/// geometrically up to the cap.
Eigen::LLT<Matrix> factorize(Matrix& H, const Regularization& reg, int stage) {
  if (!H.allFinite())
    throw NonConvexityError("non-finite H at stage " + std::to_string(stage), stage);
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() == Eigen::Success) return llt;

  const Matrix eye = Matrix::Identity(H.rows(), H.cols());
  for (double mu = reg.mu_initial; mu <= reg.mu_cap; mu *= reg.mu_growth) {
    Matrix H_reg = H + mu * eye;
    llt.compute(H_reg);
    if (llt.info() == Eigen::Success) {
      H = std::move(H_reg);
      return llt;
    }
  }
  throw NonConvexityError(
      "H is not positive definite at stage " + std::to_string(stage) +
          " even after regularization",
      stage);
}

}  // namespace

RiccatiSolution backward_sweep(const LQSubproblem& lq, const Regularization& reg) {
  const int horizon = lq.horizon();
  if (horizon < 1) throw DimensionError("LQ subproblem has no stages");

  RiccatiSolution sol;
  sol.stages.resize(horizon);
  sol.S.resize(horizon + 1);
  sol.s.resize(horizon + 1);
  sol.s0.resize(horizon + 1);

  sol.S[horizon] = lq.Q_terminal;
  sol.s[horizon] = lq.q_terminal;
  sol.s0[horizon] = lq.q0_terminal;

  for (int n = horizon - 1; n >= 0; --n) {
    const LQSubproblem::Stage& st = lq.stages[n];
    const Matrix& S_next = sol.S[n + 1];
    const Vector& s_next = sol.s[n + 1];

    const Vector sd = s_next + S_next * st.d;
    const Matrix BtS = st.B.transpose() * S_next;

    Vector h = st.r + st.B.transpose() * sd;
    Matrix G = st.P + BtS * st.A;
    Matrix H = st.R + BtS * st.B;
    H = 0.5 * (H + H.transpose()).eval();

    const Eigen::LLT<Matrix> llt = factorize(H, reg, n);
    Vector l = -llt.solve(h);
    Matrix L = -llt.solve(G);

    Matrix S = st.Q + st.A.transpose() * S_next * st.A - L.transpose() * H * L;
    sol.S[n] = 0.5 * (S + S.transpose());
    sol.s[n] = st.q + st.A.transpose() * sd + G.transpose() * l +
               L.transpose() * (h + H * l);
    sol.s0[n] = st.q0 + sol.s0[n + 1] + st.d.dot(s_next) +
                0.5 * st.d.dot(S_next * st.d) + l.dot(h + 0.5 * H * l);

    RiccatiSolution::Stage& out = sol.stages[n];
    out.feedforward = std::move(l);
    out.gain = std::move(L);
    out.H = std::move(H);
    out.G = std::move(G);
    out.h = std::move(h);
  }
  return sol;
}

double predicted_cost_change(const RiccatiSolution& sol, const LQSubproblem& lq) {
  double constants = lq.q0_terminal;
  for (const LQSubproblem::Stage& st : lq.stages) constants += st.q0;
  return sol.s0[0] - constants;
}

}  // namespace gns
