#include <doctest.h>

#include <random>

#include "test_support.hpp"

using namespace gns;

namespace {

Trajectory scalar_traj(int horizon) {
  Trajectory traj;
  traj.states.assign(horizon + 1, Vector::Zero(1));
  traj.controls.assign(horizon, Vector::Zero(1));
  traj.defects.assign(horizon, Vector::Zero(1));
  return traj;
}

}  // namespace

TEST_CASE("total_defect sums elementwise absolute values") {
  Trajectory traj = scalar_traj(2);
  CHECK(total_defect(traj) == 0.0);

  traj.defects[0][0] = 0.0375;
  traj.defects[1][0] = -0.01;
  CHECK(total_defect(traj) == doctest::Approx(0.0475).epsilon(1e-14));
}

TEST_CASE("total_defect is nonnegative and zero iff all defects vanish") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory traj;
    traj.states.assign(6, Vector::Zero(3));
    traj.controls.assign(5, Vector::Zero(2));
    traj.defects.assign(5, Vector::Zero(3));
    bool any_nonzero = false;
    for (auto& d : traj.defects)
      for (int i = 0; i < 3; ++i) {
        d[i] = (trial % 2 == 0) ? 0.0 : gauss(rng);
        any_nonzero |= d[i] != 0.0;
      }
    const double sum = total_defect(traj);
    CHECK(sum >= 0.0);
    CHECK((sum == 0.0) == !any_nonzero);
  }
}

TEST_CASE("control_update_norm basics") {
  std::vector<Vector> a{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  CHECK(control_update_norm(a, a) == 0.0);

  std::vector<Vector> b{Vector::Constant(1, 4.0), Vector::Constant(1, 6.0)};
  // diff = [3, 4]
  CHECK(control_update_norm(b, a) == doctest::Approx(5.0).epsilon(1e-15));

  std::vector<Vector> wrong{Vector::Constant(1, 1.0)};
  CHECK_THROWS_AS(control_update_norm(a, wrong), DimensionError);
  std::vector<Vector> wide{Vector::Zero(2), Vector::Zero(2)};
  CHECK_THROWS_AS(control_update_norm(a, wide), DimensionError);
}

TEST_CASE("control_update_norm matches brute-force flatten-and-norm oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    const int horizon = 1 + static_cast<int>(rng() % 8);
    const int p = 1 + static_cast<int>(rng() % 3);
    std::vector<Vector> u_new(horizon), u_old(horizon);
    double brute = 0.0;
    for (int n = 0; n < horizon; ++n) {
      u_new[n].resize(p);
      u_old[n].resize(p);
      for (int i = 0; i < p; ++i) {
        u_new[n][i] = gauss(rng);
        u_old[n][i] = gauss(rng);
        const double diff = u_new[n][i] - u_old[n][i];
        brute += diff * diff;
      }
    }
    CHECK(control_update_norm(u_new, u_old) ==
          doctest::Approx(std::sqrt(brute)).epsilon(1e-13));
  }
}

TEST_CASE("control_update_norm satisfies the triangle inequality") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> a(4), b(4), c(4);
    for (int n = 0; n < 4; ++n) {
      a[n] = Vector::NullaryExpr(2, [&](Eigen::Index) { return gauss(rng); });
      b[n] = Vector::NullaryExpr(2, [&](Eigen::Index) { return gauss(rng); });
      c[n] = Vector::NullaryExpr(2, [&](Eigen::Index) { return gauss(rng); });
    }
    const double ab = control_update_norm(a, b);
    const double bc = control_update_norm(b, c);
    const double ac = control_update_norm(a, c);
    CHECK(ac <= ab + bc + 1e-12);
  }
}

TEST_CASE("problem validation rejects bad setups") {
  OcProblem problem = make_benchmark_problem("scalar_unstable");
  CHECK_NOTHROW(problem.validate());

  OcProblem bad = problem;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = problem;
  bad.x_init = Vector::Zero(2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = problem;
  bad.dt = -0.01;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
