#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "respalloc/cbf.hpp"
#include "respalloc/dynamics.hpp"
#include "respalloc/filter_qp.hpp"

namespace respalloc {

/// Handcrafted traffic-weaving desired controls.
struct DesiredPolicyParams {
  double zeta = 4.7;
  double beta = 0.022;
  double alpha = 0.8;
  double kappa = 2.0;
  /// Optional lateral velocity damping, -d * v_lat, added to the lateral
  /// law. Zero reproduces the pure tanh steering law.
  double lateral_damping = 0.0;
};

/// -(x_lon + zeta) * beta * tanh(alpha * (x_lat - x_lat_target))
double desired_lateral_control(double x_lon, double x_lat, double x_lat_target,
                               const DesiredPolicyParams& params);

/// With r = other - self: 0 when the other agent is ahead (r_lon > 0),
/// otherwise -(kappa / 2) * (tanh(r_lon * rdot_lon) - 1).
double desired_longitudinal_control(double r_lon, double rdot_lon,
                                    const DesiredPolicyParams& params);

enum class ScenarioKind { synthetic_2agent, synthetic_6agent, weaving };

std::string_view to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(std::string_view name);

struct ScenarioParams {
  FilterWeights weights;
  double control_limit = kDefaultControlLimit;
  double margin = 1.0;  // pairwise distance barrier
  double softmin_temperature = kDefaultSoftminTemperature;
  /// Class-K gains, innermost first; empty selects 1 for every order.
  std::vector<double> alpha_gains;
  double ellipse_a1 = 9.22;
  double ellipse_a2 = 1.76;
  DesiredPolicyParams policy;
  /// Desired lateral positions of agents 1 and 2 in the weaving scene.
  std::array<double, 2> lane_targets{-1.85, 1.85};
};

nlohmann::json to_json(const ScenarioParams& params);
ScenarioParams scenario_params_from_json(const nlohmann::json& doc);

/// Everything needed to turn a stored joint state into a safety-filter
/// problem: dynamics, barrier, class-K chain, filter weights, and the map
/// from stored state to model context.
///
///  synthetic_2agent  two 1D single integrators, b = (x1 - x2)^2 - margin^2,
///                    context = joint state (x1, x2)
///  synthetic_6agent  six 2D double integrators, soft-min pairwise barrier
///                    with a second-order CBF, context = joint state
///  weaving           two cars with per-agent state (lon, lat, vlon, vlat);
///                    the filter runs on the relative double integrator
///                    r = x2 - x1 with the ellipse barrier, context = r
class Scenario {
 public:
  Scenario(ScenarioKind kind, ScenarioParams params = {});

  ScenarioKind kind() const { return kind_; }
  std::string_view name() const { return to_string(kind_); }
  const ScenarioParams& params() const { return params_; }
  const ControlAffineSystem& system() const { return system_; }
  const Barrier& barrier() const { return barrier_; }
  const AlphaChain& alpha() const { return alpha_; }

  int n_agents() const { return system_.n_agents(); }
  int control_dim() const { return system_.control_dim(0); }
  int total_control_dim() const { return system_.total_control_dim(); }
  int joint_state_dim() const { return joint_state_dim_; }
  int context_dim() const { return static_cast<int>(context_axes_.size()); }
  const std::vector<std::string>& context_axes() const { return context_axes_; }
  /// Index of a named context axis, or nullopt.
  std::optional<int> context_axis(std::string_view name) const;

  /// Map from stored joint state to the state the filter dynamics use.
  Vec system_state(const Vec& x) const;
  Vec context(const Vec& x) const;
  /// A joint state whose context equals `context`, taking everything the
  /// context does not determine from `anchor`.
  Vec state_with_context(const Vec& anchor, const Vec& context) const;

  double barrier_value(const Vec& x) const;
  CbfLinearConstraint constraint(const Vec& x) const;
  FilterProblem problem(const Vec& x, const Vec& desired, const Vec& gamma) const;

  bool has_desired_policy() const { return kind_ == ScenarioKind::weaving; }
  /// Stacked desired controls from the handcrafted policy (weaving only).
  Vec desired_controls(const Vec& x) const;

  nlohmann::json to_json() const;
  static Scenario from_json(const nlohmann::json& doc);

 private:
  static ControlAffineSystem make_system(ScenarioKind kind, const ScenarioParams& params);
  static Barrier make_barrier(ScenarioKind kind, const ScenarioParams& params);

  ScenarioKind kind_;
  ScenarioParams params_;
  ControlAffineSystem system_;
  Barrier barrier_;
  AlphaChain alpha_;
  int joint_state_dim_ = 0;
  std::vector<std::string> context_axes_;
};

}  // namespace respalloc
