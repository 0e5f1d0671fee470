#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace respalloc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Box limit applied to every control coordinate when a scenario does not
/// provide its own.
inline constexpr double kDefaultControlLimit = 10.0;

struct AgentSpec {
  int state_dim = 0;
  int control_dim = 0;
  Vec control_lower;  // may hold -inf
  Vec control_upper;  // may hold +inf

  static AgentSpec make(int state_dim, int control_dim,
                        double limit = kDefaultControlLimit);

  /// Throws std::invalid_argument on non-positive dims or lower > upper.
  void validate() const;
};

/// Multi-agent control-affine system  xdot = f(x) + sum_i g_i(x) u_i.
///
/// The state is either the stacked joint state of all agents or, for the
/// relative systems, a single shared coordinate; `state_dim()` is the length
/// of whatever vector the evaluators accept. Controls are handled as one
/// stacked vector (u_1, ..., u_N); `control_offset(i)` locates agent i.
class ControlAffineSystem {
 public:
  using DriftFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;
  using ActuationFn = std::function<Mat(const Vec&, int)>;

  ControlAffineSystem(std::string name, std::vector<AgentSpec> agents,
                      int state_dim, int relative_degree, DriftFn drift,
                      JacobianFn drift_jacobian, ActuationFn actuation);

  const std::string& name() const { return name_; }
  int n_agents() const { return static_cast<int>(agents_.size()); }
  int state_dim() const { return state_dim_; }
  int relative_degree() const { return relative_degree_; }
  const AgentSpec& agent(int i) const { return agents_.at(i); }
  const std::vector<AgentSpec>& agents() const { return agents_; }

  int control_dim(int i) const { return agents_.at(i).control_dim; }
  int control_offset(int i) const { return offsets_.at(i); }
  int total_control_dim() const { return total_control_dim_; }
  std::vector<int> control_dims() const;

  Vec drift(const Vec& x) const;
  Mat drift_jacobian(const Vec& x) const;
  /// g_i(x), shape state_dim x control_dim(i).
  Mat actuation(const Vec& x, int agent) const;

  /// f(x) + sum_i g_i(x) u_i for stacked controls u.
  Vec xdot(const Vec& x, const Vec& u) const;
  Vec euler_step(const Vec& x, const Vec& u, double dt) const;

  Vec control_lower() const;
  Vec control_upper() const;

  /// Copy of this system with every control coordinate boxed to [lo, hi].
  ControlAffineSystem with_control_limits(double lo, double hi) const;

 private:
  void check_state(const Vec& x) const;

  std::string name_;
  std::vector<AgentSpec> agents_;
  std::vector<int> offsets_;
  int total_control_dim_ = 0;
  int state_dim_ = 0;
  int relative_degree_ = 1;
  DriftFn drift_;
  JacobianFn drift_jacobian_;
  ActuationFn actuation_;
};

/// N agents on a line, xdot_i = u_i.
ControlAffineSystem make_single_integrator_1d(int n_agents);

/// N agents with per-agent state (p, v) in `spatial_dim` dimensions,
/// pdot = v, vdot = u. Agent i occupies state entries
/// [2*spatial_dim*i, 2*spatial_dim*(i+1)), positions first.
ControlAffineSystem make_double_integrator(int n_agents, int spatial_dim);
ControlAffineSystem make_double_integrator_2d(int n_agents);

/// Two-agent relative double integrator on r = x2 - x1 with
/// r = (r_lon, r_lat, rdot_lon, rdot_lat); g_1 = -[0; I], g_2 = +[0; I].
ControlAffineSystem make_relative_double_integrator();

}  // namespace respalloc
