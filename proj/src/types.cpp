#include "gns/types.hpp"

#include <cmath>

#include "gns/cost.hpp"

namespace gns {

void OcProblem::validate() const {
  if (state_dim < 1) throw ConfigError("state_dim must be >= 1", "state_dim");
  if (control_dim < 1) throw ConfigError("control_dim must be >= 1", "control_dim");
  if (horizon < 1) throw ConfigError("horizon must be >= 1", "N");
  if (dt <= 0.0) throw ConfigError("dt must be positive", "dt");
  if (!dynamics) throw ConfigError("dynamics model missing", "dynamics");
  if (!cost) throw ConfigError("cost model missing", "cost");
  if (x_init.size() != state_dim)
    throw ConfigError("x_init length must equal state_dim", "x_init");
  if (dynamics->state_dim() != state_dim || dynamics->control_dim() != control_dim)
    throw DimensionError("dynamics model dimensions disagree with problem");
  if (cost->state_dim() != state_dim || cost->control_dim() != control_dim)
    throw DimensionError("cost model dimensions disagree with problem");
  integrator.validate();
}

Trajectory Trajectory::zero(const OcProblem& problem) {
  Trajectory traj;
  traj.states.assign(problem.horizon + 1, Vector::Zero(problem.state_dim));
  traj.controls.assign(problem.horizon, Vector::Zero(problem.control_dim));
  traj.defects.assign(problem.horizon, Vector::Zero(problem.state_dim));
  traj.states[0] = problem.x_init;
  return traj;
}

double total_defect(const Trajectory& traj) {
  double sum = 0.0;
  for (const Vector& d : traj.defects) sum += d.cwiseAbs().sum();
  return sum;
}

double control_update_norm(const std::vector<Vector>& u_new,
                           const std::vector<Vector>& u_old) {
  if (u_new.size() != u_old.size())
    throw DimensionError("control sequences differ in length");
  double sq = 0.0;
  for (std::size_t n = 0; n < u_new.size(); ++n) {
    if (u_new[n].size() != u_old[n].size())
      throw DimensionError("control sequences differ in width");
    sq += (u_new[n] - u_old[n]).squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace gns
