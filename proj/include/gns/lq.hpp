#pragma once

#include <vector>

#include "gns/cost.hpp"
#include "gns/types.hpp"

namespace gns {

/// Stage-wise LQ subproblem built around one trajectory snapshot:
///
///   min  q_N + dx_N'q_N + 1/2 dx_N'Q_N dx_N
///        + sum_n q_n + dx'q_n + du'r_n + 1/2 dx'Q_n dx + 1/2 du'R_n du + du'P_n dx
///   s.t. dx_{n+1} = A_n dx_n + B_n du_n + d_n,   dx_0 = 0
struct LQSubproblem {
  struct Stage {
    Matrix A;        // m x m
    Matrix B;        // m x p
    Vector d;        // defect, m
    Matrix Q;        // m x m, symmetric PSD
    Vector q;        // m
    double q0 = 0.0; // scalar cost term
    Matrix R;        // p x p, symmetric PD
    Vector r;        // p
    Matrix P;        // p x m cross term
  };

  std::vector<Stage> stages;  // n = 0 .. N-1
  Matrix Q_terminal;
  Vector q_terminal;
  double q0_terminal = 0.0;

  int horizon() const { return static_cast<int>(stages.size()); }
  int state_dim() const { return static_cast<int>(Q_terminal.rows()); }
  int control_dim() const {
    return stages.empty() ? 0 : static_cast<int>(stages.front().R.rows());
  }
};

/// Assembles the LQ subproblem from a trajectory snapshot: cost terms from
/// quadratize(), dynamics terms from the sensitivities recorded during the
/// most recent rollout, defects copied from the trajectory. Pure function of
/// its inputs.
LQSubproblem assemble(const OcProblem& problem, const Trajectory& traj,
                      const std::vector<StageSensitivity>& sens);

}  // namespace gns
