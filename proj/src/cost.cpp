#include "gns/cost.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace gns {

QuadraticTrackingCost::QuadraticTrackingCost(Matrix Q, Matrix R, Matrix Q_terminal,
                                             Vector x_des, Vector u_des,
                                             Vector x_des_terminal)
    : Q_(std::move(Q)),
      R_(std::move(R)),
      Q_terminal_(std::move(Q_terminal)),
      x_des_(std::move(x_des)),
      u_des_(std::move(u_des)),
      x_des_terminal_(std::move(x_des_terminal)) {
  if (Q_.rows() != Q_.cols() || R_.rows() != R_.cols() ||
      Q_terminal_.rows() != Q_terminal_.cols())
    throw DimensionError("cost weight matrices must be square");
  if (Q_terminal_.rows() != Q_.rows())
    throw DimensionError("terminal and stage state weights disagree in size");
  if (x_des_.size() != Q_.rows() || x_des_terminal_.size() != Q_.rows() ||
      u_des_.size() != R_.rows())
    throw DimensionError("cost reference sizes disagree with weights");
}

void QuadraticTrackingCost::set_stage_references(std::vector<Vector> x_des_n,
                                                 std::vector<Vector> u_des_n) {
  x_des_n_ = std::move(x_des_n);
  u_des_n_ = std::move(u_des_n);
}

const Vector& QuadraticTrackingCost::x_ref(int n) const {
  return x_des_n_.empty() ? x_des_ : x_des_n_[n];
}

const Vector& QuadraticTrackingCost::u_ref(int n) const {
  return u_des_n_.empty() ? u_des_ : u_des_n_[n];
}

double QuadraticTrackingCost::stage_cost(const Vector& x, const Vector& u,
                                         int n) const {
  const Vector dx = x - x_ref(n);
  const Vector du = u - u_ref(n);
  return 0.5 * dx.dot(Q_ * dx) + 0.5 * du.dot(R_ * du);
}

double QuadraticTrackingCost::terminal_cost(const Vector& x) const {
  const Vector dx = x - x_des_terminal_;
  return 0.5 * dx.dot(Q_terminal_ * dx);
}

StageCostExpansion QuadraticTrackingCost::quadratize_stage(const Vector& x,
                                                           const Vector& u,
                                                           int n) const {
  StageCostExpansion e;
  const Vector dx = x - x_ref(n);
  const Vector du = u - u_ref(n);
  e.constant = 0.5 * dx.dot(Q_ * dx) + 0.5 * du.dot(R_ * du);
  e.grad_x = Q_ * dx;
  e.grad_u = R_ * du;
  e.Q = Q_;
  e.R = R_;
  e.P = Matrix::Zero(R_.rows(), Q_.rows());
  return e;
}

TerminalCostExpansion QuadraticTrackingCost::quadratize_terminal(const Vector& x) const {
  TerminalCostExpansion e;
  const Vector dx = x - x_des_terminal_;
  e.constant = 0.5 * dx.dot(Q_terminal_ * dx);
  e.grad_x = Q_terminal_ * dx;
  e.Q = Q_terminal_;
  return e;
}

double evaluate(const CostModel& cost, const Trajectory& traj) {
  const int horizon = traj.horizon();
  if (static_cast<int>(traj.states.size()) != horizon + 1)
    throw DimensionError("trajectory states/controls lengths inconsistent");
  double total = 0.0;
  for (int n = 0; n < horizon; ++n) {
    const double c = cost.stage_cost(traj.states[n], traj.controls[n], n);
    if (!std::isfinite(c))
      throw ModelError("non-finite stage cost at stage " + std::to_string(n), n);
    total += c;
  }
  const double terminal = cost.terminal_cost(traj.states[horizon]);
  if (!std::isfinite(terminal))
    throw ModelError("non-finite terminal cost", horizon);
  return total + terminal;
}

CostExpansion quadratize(const CostModel& cost, const Trajectory& traj) {
  const int horizon = traj.horizon();
  CostExpansion out;
  out.stages.reserve(horizon);
  for (int n = 0; n < horizon; ++n) {
    StageCostExpansion e = cost.quadratize_stage(traj.states[n], traj.controls[n], n);
    e.Q = 0.5 * (e.Q + e.Q.transpose()).eval();
    e.R = 0.5 * (e.R + e.R.transpose()).eval();
    if (!e.Q.allFinite() || !e.R.allFinite() || !e.P.allFinite() ||
        !e.grad_x.allFinite() || !e.grad_u.allFinite() || !std::isfinite(e.constant))
      throw ModelError("non-finite cost expansion at stage " + std::to_string(n), n);
    Eigen::LLT<Matrix> llt(e.R);
    if (llt.info() != Eigen::Success)
      throw ModelError("R is not positive definite at stage " + std::to_string(n), n);
    out.stages.push_back(std::move(e));
  }
  out.terminal = cost.quadratize_terminal(traj.states[horizon]);
  out.terminal.Q = 0.5 * (out.terminal.Q + out.terminal.Q.transpose()).eval();
  if (!out.terminal.Q.allFinite() || !out.terminal.grad_x.allFinite())
    throw ModelError("non-finite terminal cost expansion", horizon);
  return out;
}

}  // namespace gns
