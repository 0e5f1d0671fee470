#include "respalloc/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace respalloc {

using nlohmann::json;

double desired_lateral_control(double x_lon, double x_lat, double x_lat_target,
                               const DesiredPolicyParams& p) {
  return -(x_lon + p.zeta) * p.beta * std::tanh(p.alpha * (x_lat - x_lat_target));
}

double desired_longitudinal_control(double r_lon, double rdot_lon, const DesiredPolicyParams& p) {
  if (r_lon > 0.0) return 0.0;
  return -0.5 * p.kappa * (std::tanh(r_lon * rdot_lon) - 1.0);
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::synthetic_2agent: return "synthetic-2agent";
    case ScenarioKind::synthetic_6agent: return "synthetic-6agent";
    case ScenarioKind::weaving: return "weaving";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
  if (name == "synthetic-2agent") return ScenarioKind::synthetic_2agent;
  if (name == "synthetic-6agent") return ScenarioKind::synthetic_6agent;
  if (name == "weaving" || name.starts_with("weaving-")) return ScenarioKind::weaving;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

json to_json(const ScenarioParams& p) {
  return json{
      {"beta1", p.weights.beta1},
      {"beta2", p.weights.beta2},
      {"control_limit", p.control_limit},
      {"margin", p.margin},
      {"softmin_temperature", p.softmin_temperature},
      {"alpha_gains", p.alpha_gains},
      {"ellipse_a1", p.ellipse_a1},
      {"ellipse_a2", p.ellipse_a2},
      {"policy",
       {{"zeta", p.policy.zeta},
        {"beta", p.policy.beta},
        {"alpha", p.policy.alpha},
        {"kappa", p.policy.kappa},
        {"lateral_damping", p.policy.lateral_damping}}},
      {"lane_targets", p.lane_targets},
  };
}

ScenarioParams scenario_params_from_json(const json& doc) {
  ScenarioParams p;
  auto read = [&doc](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("beta1", p.weights.beta1);
  read("beta2", p.weights.beta2);
  read("control_limit", p.control_limit);
  read("margin", p.margin);
  read("softmin_temperature", p.softmin_temperature);
  read("alpha_gains", p.alpha_gains);
  read("ellipse_a1", p.ellipse_a1);
  read("ellipse_a2", p.ellipse_a2);
  read("lane_targets", p.lane_targets);
  if (doc.contains("policy")) {
    const json& pol = doc.at("policy");
    auto read_pol = [&pol](const char* key, double& field) {
      if (pol.contains(key)) field = pol.at(key).get<double>();
    };
    read_pol("zeta", p.policy.zeta);
    read_pol("beta", p.policy.beta);
    read_pol("alpha", p.policy.alpha);
    read_pol("kappa", p.policy.kappa);
    read_pol("lateral_damping", p.policy.lateral_damping);
  }
  return p;
}

ControlAffineSystem Scenario::make_system(ScenarioKind kind, const ScenarioParams& p) {
  const double lim = p.control_limit;
  switch (kind) {
    case ScenarioKind::synthetic_2agent:
      return make_single_integrator_1d(2).with_control_limits(-lim, lim);
    case ScenarioKind::synthetic_6agent:
      return make_double_integrator_2d(6).with_control_limits(-lim, lim);
    case ScenarioKind::weaving:
      return make_relative_double_integrator().with_control_limits(-lim, lim);
  }
  throw std::invalid_argument("unknown scenario kind");
}

Barrier Scenario::make_barrier(ScenarioKind kind, const ScenarioParams& p) {
  switch (kind) {
    case ScenarioKind::synthetic_2agent:
      return make_pairwise_distance_barrier(p.margin, PositionLayout::single_integrator_1d(2),
                                            p.softmin_temperature);
    case ScenarioKind::synthetic_6agent:
      return make_pairwise_distance_barrier(p.margin, PositionLayout::double_integrator(6, 2),
                                            p.softmin_temperature);
    case ScenarioKind::weaving:
      return make_ellipse_barrier(p.ellipse_a1, p.ellipse_a2);
  }
  throw std::invalid_argument("unknown scenario kind");
}

Scenario::Scenario(ScenarioKind kind, ScenarioParams params)
    : kind_(kind),
      params_(std::move(params)),
      system_(make_system(kind, params_)),
      barrier_(make_barrier(kind, params_)) {
  const int degree = system_.relative_degree();
  if (params_.alpha_gains.empty()) params_.alpha_gains.assign(degree, 1.0);
  if (static_cast<int>(params_.alpha_gains.size()) != degree)
    throw std::invalid_argument("scenario " + std::string(name()) + " needs " +
                                std::to_string(degree) + " class-K gain(s)");
  for (double k : params_.alpha_gains) alpha_.emplace_back(k);

  switch (kind_) {
    case ScenarioKind::synthetic_2agent:
      joint_state_dim_ = 2;
      context_axes_ = {"x1", "x2"};
      break;
    case ScenarioKind::synthetic_6agent:
      joint_state_dim_ = 24;
      for (int i = 1; i <= 6; ++i)
        for (const char* f : {"px", "py", "vx", "vy"})
          context_axes_.push_back(std::string(f).insert(1, std::to_string(i)));
      break;
    case ScenarioKind::weaving:
      joint_state_dim_ = 8;
      context_axes_ = {"r_lon", "r_lat", "rdot_lon", "rdot_lat"};
      break;
  }
}

std::optional<int> Scenario::context_axis(std::string_view name) const {
  for (std::size_t k = 0; k < context_axes_.size(); ++k)
    if (context_axes_[k] == name) return static_cast<int>(k);
  return std::nullopt;
}

Vec Scenario::system_state(const Vec& x) const {
  if (x.size() != joint_state_dim_)
    throw std::invalid_argument("scenario " + std::string(name()) + ": joint state has length " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(joint_state_dim_));
  if (kind_ == ScenarioKind::weaving) return x.segment(4, 4) - x.segment(0, 4);
  return x;
}

Vec Scenario::context(const Vec& x) const { return system_state(x); }

Vec Scenario::state_with_context(const Vec& anchor, const Vec& context) const {
  if (context.size() != context_dim()) throw std::invalid_argument("context has wrong length");
  if (kind_ != ScenarioKind::weaving) return context;
  system_state(anchor);  // validates length
  Vec x = anchor;
  x.segment(4, 4) = x.segment(0, 4) + context;
  return x;
}

double Scenario::barrier_value(const Vec& x) const { return barrier_.value(system_state(x)); }

CbfLinearConstraint Scenario::constraint(const Vec& x) const {
  return assemble_constraint(system_, barrier_, alpha_, system_state(x));
}

FilterProblem Scenario::problem(const Vec& x, const Vec& desired, const Vec& gamma) const {
  return make_filter_problem(system_, constraint(x), desired, gamma, params_.weights);
}

Vec Scenario::desired_controls(const Vec& x) const {
  if (kind_ != ScenarioKind::weaving)
    throw std::logic_error("scenario " + std::string(name()) + " has no desired-control policy");
  system_state(x);  // validates length
  const auto& pol = params_.policy;
  Vec u(4);
  for (int i = 0; i < 2; ++i) {
    const auto self = x.segment(4 * i, 4);
    const auto other = x.segment(4 * (1 - i), 4);
    u[2 * i] = desired_longitudinal_control(other[0] - self[0], other[2] - self[2], pol);
    u[2 * i + 1] = desired_lateral_control(self[0], self[1], params_.lane_targets[i], pol) -
                   pol.lateral_damping * self[3];
  }
  return u;
}

json Scenario::to_json() const {
  return json{{"kind", std::string(name())}, {"params", respalloc::to_json(params_)}};
}

Scenario Scenario::from_json(const json& doc) {
  return Scenario(scenario_kind_from_string(doc.at("kind").get<std::string>()),
                  scenario_params_from_json(doc.value("params", json::object())));
}

}  // namespace respalloc
