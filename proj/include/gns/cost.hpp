#pragma once

#include <vector>

#include "gns/types.hpp"

namespace gns {

/// Second-order expansion of one stage cost around (x, u):
///   L(x+dx, u+du) ~= const + dx'grad_x + du'grad_u
///                    + 1/2 dx'Q dx + 1/2 du'R du + du'P dx
struct StageCostExpansion {
  double constant = 0.0;
  Vector grad_x;  // q_n
  Vector grad_u;  // r_n
  Matrix Q;
  Matrix R;
  Matrix P;  // cross term, p x m
};

struct TerminalCostExpansion {
  double constant = 0.0;
  Vector grad_x;  // q_N
  Matrix Q;       // Q_N
};

/// Stage plus terminal cost with exact second-order expansions. The expansion
/// supplies the exact cost Hessians; dynamics enter the subproblem only to
/// first order, which is what makes the overall method Gauss-Newton.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  virtual double stage_cost(const Vector& x, const Vector& u, int n) const = 0;
  virtual double terminal_cost(const Vector& x) const = 0;

  virtual StageCostExpansion quadratize_stage(const Vector& x, const Vector& u,
                                              int n) const = 0;
  virtual TerminalCostExpansion quadratize_terminal(const Vector& x) const = 0;
};

/// Quadratic penalty on deviations from reference state/control trajectories:
///   L_n = 1/2 (x - x_des_n)'Q(x - x_des_n) + 1/2 (u - u_des_n)'R(u - u_des_n)
///   Phi = 1/2 (x - x_des_N)'Q_N(x - x_des_N)
/// References default to zero; P is identically zero.
class QuadraticTrackingCost : public CostModel {
 public:
  QuadraticTrackingCost(Matrix Q, Matrix R, Matrix Q_terminal, Vector x_des,
                        Vector u_des, Vector x_des_terminal);

  /// Per-stage references; sizes must be N and N+1 if set.
  void set_stage_references(std::vector<Vector> x_des_n, std::vector<Vector> u_des_n);

  int state_dim() const override { return static_cast<int>(Q_.rows()); }
  int control_dim() const override { return static_cast<int>(R_.rows()); }

  double stage_cost(const Vector& x, const Vector& u, int n) const override;
  double terminal_cost(const Vector& x) const override;
  StageCostExpansion quadratize_stage(const Vector& x, const Vector& u,
                                      int n) const override;
  TerminalCostExpansion quadratize_terminal(const Vector& x) const override;

 private:
  const Vector& x_ref(int n) const;
  const Vector& u_ref(int n) const;

  Matrix Q_, R_, Q_terminal_;
  Vector x_des_, u_des_, x_des_terminal_;
  std::vector<Vector> x_des_n_, u_des_n_;
};

/// J = Phi(X[N]) + sum_n L_n(X[n], U[n], n).
/// Throws ModelError with the stage index if a term is non-finite.
double evaluate(const CostModel& cost, const Trajectory& traj);

/// Per-stage second-order expansions along the trajectory. Q and R are
/// symmetrized; R_n is checked positive definite (ModelError otherwise).
struct CostExpansion {
  std::vector<StageCostExpansion> stages;
  TerminalCostExpansion terminal;
};

CostExpansion quadratize(const CostModel& cost, const Trajectory& traj);

}  // namespace gns
