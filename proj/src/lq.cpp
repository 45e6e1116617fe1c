#include "gns/lq.hpp"

namespace gns {

LQSubproblem assemble(const OcProblem& problem, const Trajectory& traj,
                      const std::vector<StageSensitivity>& sens) {
  const int horizon = problem.horizon;
  if (traj.horizon() != horizon || static_cast<int>(sens.size()) != horizon ||
      static_cast<int>(traj.defects.size()) != horizon)
    throw DimensionError("trajectory/sensitivity lengths disagree with horizon");

  const CostExpansion cost = quadratize(*problem.cost, traj);

  LQSubproblem lq;
  lq.stages.resize(horizon);
  for (int n = 0; n < horizon; ++n) {
    LQSubproblem::Stage& st = lq.stages[n];
    st.A = sens[n].A;
    st.B = sens[n].B;
    st.d = traj.defects[n];
    st.Q = cost.stages[n].Q;
    st.q = cost.stages[n].grad_x;
    st.q0 = cost.stages[n].constant;
    st.R = cost.stages[n].R;
    st.r = cost.stages[n].grad_u;
    st.P = cost.stages[n].P;
  }
  lq.Q_terminal = cost.terminal.Q;
  lq.q_terminal = cost.terminal.grad_x;
  lq.q0_terminal = cost.terminal.constant;
  return lq;
}

}  // namespace gns
