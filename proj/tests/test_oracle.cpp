#include <doctest.h>

#include "test_support.hpp"

using namespace gns;

namespace {

LQSubproblem scalar_one_stage(double defect) {
  LQSubproblem lq;
  lq.stages.resize(1);
  auto& st = lq.stages[0];
  st.A = Matrix::Constant(1, 1, 1.0);
  st.B = Matrix::Constant(1, 1, 1.0);
  st.d = Vector::Constant(1, defect);
  st.Q = Matrix::Zero(1, 1);
  st.q = Vector::Zero(1);
  st.R = Matrix::Constant(1, 1, 1.0);
  st.r = Vector::Zero(1);
  st.P = Matrix::Zero(1, 1);
  lq.Q_terminal = Matrix::Constant(1, 1, 1.0);
  lq.q_terminal = Vector::Zero(1);
  return lq;
}

double kkt_stationarity_residual(const LQSubproblem& lq, const KktSolution& sol) {
  // Recover the multipliers from the state stationarity rows, then report the
  // worst violation of the control stationarity rows. With the Lagrangian
  // using lambda_n'(dx_{n+1} - A_n dx_n - B_n du_n - d_n):
  //   dx_N:  q_N + Q_N dx_N + lambda_{N-1} = 0
  //   dx_k:  q_k + Q_k dx_k + P_k'du_k + lambda_{k-1} - A_k'lambda_k = 0
  //   du_k:  r_k + R_k du_k + P_k dx_k - B_k'lambda_k = 0
  const int horizon = lq.horizon();
  std::vector<Vector> lambda(horizon);
  lambda[horizon - 1] = -(lq.q_terminal + lq.Q_terminal * sol.dx[horizon]);
  for (int n = horizon - 1; n >= 1; --n) {
    const auto& st = lq.stages[n];
    lambda[n - 1] = st.A.transpose() * lambda[n] -
                    (st.q + st.Q * sol.dx[n] + st.P.transpose() * sol.du[n]);
  }
  double worst = 0.0;
  for (int n = 0; n < horizon; ++n) {
    const auto& st = lq.stages[n];
    const Vector res = st.r + st.R * sol.du[n] + st.P * sol.dx[n] -
                       st.B.transpose() * lambda[n];
    worst = std::max(worst, res.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace

TEST_CASE("zero gradients and defects give the zero solution") {
  LQSubproblem lq = test::random_lq(3, 2, 6, 12345, /*with_defects=*/false);
  for (auto& st : lq.stages) {
    st.q.setZero();
    st.r.setZero();
  }
  lq.q_terminal.setZero();
  const KktSolution sol = solve_kkt(lq);
  for (const Vector& dx : sol.dx) CHECK(dx.lpNorm<Eigen::Infinity>() < 1e-12);
  for (const Vector& du : sol.du) CHECK(du.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(std::abs(sol.objective_change) < 1e-12);
}

TEST_CASE("hand-checked scalar instance with unit defect") {
  const KktSolution sol = solve_kkt(scalar_one_stage(1.0));
  CHECK(sol.du[0][0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(sol.dx[1][0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.objective_change == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("KKT solutions are feasible and stationary") {
  for (unsigned long long seed = 1; seed <= 20; ++seed) {
    const LQSubproblem lq =
        test::random_lq(1 + seed % 4, 1 + (seed + 1) % 3, 4 + seed % 12, seed * 17);
    const KktSolution sol = solve_kkt(lq);
    for (int n = 0; n < lq.horizon(); ++n) {
      const auto& st = lq.stages[n];
      const Vector residual =
          sol.dx[n + 1] - st.A * sol.dx[n] - st.B * sol.du[n] - st.d;
      CHECK(residual.lpNorm<Eigen::Infinity>() < 1e-10);
    }
    CHECK(kkt_stationarity_residual(lq, sol) < 1e-9);
  }
}

TEST_CASE("singular instances are rejected") {
  LQSubproblem lq = scalar_one_stage(0.0);
  lq.stages[0].R.setZero();   // no control cost
  lq.Q_terminal.setZero();    // and nothing downstream to determine du
  CHECK_THROWS_AS(solve_kkt(lq), DegenerateProblemError);
}
