#pragma once

#include <memory>
#include <vector>

#include "gns/dynamics.hpp"

namespace gns {

class CostModel;

/// Discrete-time, finite-horizon optimal control problem
///   min  Phi(x_N) + sum_n L_n(x_n, u_n, n)
///   s.t. x_{n+1} = F(x_n, u_n),  x_0 = x_init
/// where F is the integrated flow of `dynamics` over one stage of `integrator`.
struct OcProblem {
  int state_dim = 0;
  int control_dim = 0;
  int horizon = 0;  // number of control stages N
  double dt = 0.0;
  std::shared_ptr<const DynamicsModel> dynamics;
  std::shared_ptr<const CostModel> cost;
  Vector x_init;
  Integrator integrator;

  /// Checks the structural invariants; throws ConfigError on violation.
  void validate() const;
};

/// One trajectory snapshot: states X (N+1), controls U (N) and per-stage
/// defects D (N). Defects are exactly zero at every stage interior to a
/// shooting interval.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> controls;
  std::vector<Vector> defects;

  int horizon() const { return static_cast<int>(controls.size()); }

  /// All-zero trajectory with the problem's dimensions, X[0] = x_init.
  static Trajectory zero(const OcProblem& problem);
};

/// Convergence bookkeeping for one solver iteration.
struct IterationRecord {
  int iter = 0;
  double cost = 0.0;         // J after this iteration
  double defect_l1 = 0.0;    // sum_n |d_n| (elementwise absolute sum)
  double update_norm = 0.0;  // |U_new - U_old|_2 over stacked controls
  double alpha = 1.0;        // accepted step size
  double wall_ms = 0.0;
};

/// Elementwise-L1 total defect, sum_n sum_i |D[n][i]|.
double total_defect(const Trajectory& traj);

/// Euclidean norm of the stacked control difference. Throws DimensionError
/// if the sequences disagree in length or width.
double control_update_norm(const std::vector<Vector>& u_new,
                           const std::vector<Vector>& u_old);

}  // namespace gns
