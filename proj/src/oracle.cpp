#include "gns/oracle.hpp"

#include <Eigen/LU>

namespace gns {

KktSolution solve_kkt(const LQSubproblem& lq) {
  const int horizon = lq.horizon();
  const int m = lq.state_dim();
  const int p = lq.control_dim();

  // Decision vector z = (dx_1 .. dx_N, du_0 .. du_{N-1}); dx_0 = 0 eliminated.
  const int nx = horizon * m;
  const int nu = horizon * p;
  const int nz = nx + nu;
  const int nc = horizon * m;  // one constraint row block per stage
  const int dim = nz + nc;

  const auto x_off = [m](int n) { return (n - 1) * m; };  // dx_n, n >= 1
  const auto u_off = [nx, p](int n) { return nx + n * p; };

  Matrix K = Matrix::Zero(dim, dim);
  Vector rhs = Vector::Zero(dim);

  // Hessian and gradient of the objective.
  for (int n = 0; n < horizon; ++n) {
    const LQSubproblem::Stage& st = lq.stages[n];
    K.block(u_off(n), u_off(n), p, p) = st.R;
    rhs.segment(u_off(n), p) = -st.r;
    if (n >= 1) {
      K.block(x_off(n), x_off(n), m, m) = st.Q;
      K.block(u_off(n), x_off(n), p, m) = st.P;
      K.block(x_off(n), u_off(n), m, p) = st.P.transpose();
      rhs.segment(x_off(n), m) = -st.q;
    }
  }
  K.block(x_off(horizon), x_off(horizon), m, m) += lq.Q_terminal;
  rhs.segment(x_off(horizon), m) -= lq.q_terminal;

  // Constraint rows dx_{n+1} - A_n dx_n - B_n du_n = d_n and their transpose.
  for (int n = 0; n < horizon; ++n) {
    const LQSubproblem::Stage& st = lq.stages[n];
    const int row = nz + n * m;
    K.block(row, x_off(n + 1), m, m) = Matrix::Identity(m, m);
    if (n >= 1) K.block(row, x_off(n), m, m) = -st.A;
    K.block(row, u_off(n), m, p) = -st.B;
    rhs.segment(row, m) = st.d;
  }
  K.block(0, nz, nz, nc) = K.block(nz, 0, nc, nz).transpose();

  const Eigen::PartialPivLU<Matrix> lu(K);
  const Vector sol = lu.solve(rhs);
  const double residual = (K * sol - rhs).norm();
  if (!sol.allFinite() || residual > 1e-8 * (1.0 + rhs.norm()) ||
      lu.rcond() < 1e-12)
    throw DegenerateProblemError("KKT system is singular or ill-conditioned");

  KktSolution out;
  out.dx.resize(horizon + 1);
  out.du.resize(horizon);
  out.dx[0] = Vector::Zero(m);
  for (int n = 1; n <= horizon; ++n) out.dx[n] = sol.segment(x_off(n), m);
  for (int n = 0; n < horizon; ++n) out.du[n] = sol.segment(u_off(n), p);

  double objective = 0.0;
  for (int n = 0; n < horizon; ++n) {
    const LQSubproblem::Stage& st = lq.stages[n];
    const Vector& dx = out.dx[n];
    const Vector& du = out.du[n];
    objective += st.q.dot(dx) + st.r.dot(du) + 0.5 * dx.dot(st.Q * dx) +
                 0.5 * du.dot(st.R * du) + du.dot(st.P * dx);
  }
  const Vector& dxN = out.dx[horizon];
  objective += lq.q_terminal.dot(dxN) + 0.5 * dxN.dot(lq.Q_terminal * dxN);
  out.objective_change = objective;
  return out;
}

}  // namespace gns
