#include "respalloc/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace respalloc {

AgentSpec AgentSpec::make(int state_dim, int control_dim, double limit) {
  AgentSpec spec;
  spec.state_dim = state_dim;
  spec.control_dim = control_dim;
  spec.control_lower = Vec::Constant(control_dim, -limit);
  spec.control_upper = Vec::Constant(control_dim, limit);
  spec.validate();
  return spec;
}

void AgentSpec::validate() const {
  if (state_dim <= 0 || control_dim <= 0)
    throw std::invalid_argument("agent dimensions must be positive");
  if (control_lower.size() != control_dim || control_upper.size() != control_dim)
    throw std::invalid_argument("control bound length differs from control_dim");
  for (int j = 0; j < control_dim; ++j) {
    if (std::isnan(control_lower[j]) || std::isnan(control_upper[j]))
      throw std::invalid_argument("control bounds must not be NaN");
    if (control_lower[j] > control_upper[j])
      throw std::invalid_argument("control_lower exceeds control_upper");
  }
}

ControlAffineSystem::ControlAffineSystem(std::string name,
                                         std::vector<AgentSpec> agents,
                                         int state_dim, int relative_degree,
                                         DriftFn drift, JacobianFn drift_jacobian,
                                         ActuationFn actuation)
    : name_(std::move(name)),
      agents_(std::move(agents)),
      state_dim_(state_dim),
      relative_degree_(relative_degree),
      drift_(std::move(drift)),
      drift_jacobian_(std::move(drift_jacobian)),
      actuation_(std::move(actuation)) {
  if (agents_.empty()) throw std::invalid_argument("system needs at least one agent");
  if (state_dim_ <= 0) throw std::invalid_argument("state_dim must be positive");
  if (relative_degree_ != 1 && relative_degree_ != 2)
    throw std::invalid_argument("relative degree must be 1 or 2");
  offsets_.reserve(agents_.size());
  for (const auto& a : agents_) {
    a.validate();
    offsets_.push_back(total_control_dim_);
    total_control_dim_ += a.control_dim;
  }
}

std::vector<int> ControlAffineSystem::control_dims() const {
  std::vector<int> dims;
  dims.reserve(agents_.size());
  for (const auto& a : agents_) dims.push_back(a.control_dim);
  return dims;
}

void ControlAffineSystem::check_state(const Vec& x) const {
  if (x.size() != state_dim_)
    throw std::invalid_argument(name_ + ": state has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(state_dim_));
}

Vec ControlAffineSystem::drift(const Vec& x) const {
  check_state(x);
  return drift_(x);
}

Mat ControlAffineSystem::drift_jacobian(const Vec& x) const {
  check_state(x);
  return drift_jacobian_(x);
}

Mat ControlAffineSystem::actuation(const Vec& x, int agent) const {
  check_state(x);
  if (agent < 0 || agent >= n_agents()) throw std::out_of_range("agent index");
  return actuation_(x, agent);
}

Vec ControlAffineSystem::xdot(const Vec& x, const Vec& u) const {
  if (u.size() != total_control_dim_)
    throw std::invalid_argument("stacked control has wrong length");
  Vec out = drift(x);
  for (int i = 0; i < n_agents(); ++i)
    out += actuation_(x, i) * u.segment(offsets_[i], agents_[i].control_dim);
  return out;
}

Vec ControlAffineSystem::euler_step(const Vec& x, const Vec& u, double dt) const {
  return x + dt * xdot(x, u);
}

Vec ControlAffineSystem::control_lower() const {
  Vec lo(total_control_dim_);
  for (int i = 0; i < n_agents(); ++i)
    lo.segment(offsets_[i], agents_[i].control_dim) = agents_[i].control_lower;
  return lo;
}

Vec ControlAffineSystem::control_upper() const {
  Vec hi(total_control_dim_);
  for (int i = 0; i < n_agents(); ++i)
    hi.segment(offsets_[i], agents_[i].control_dim) = agents_[i].control_upper;
  return hi;
}

ControlAffineSystem ControlAffineSystem::with_control_limits(double lo, double hi) const {
  auto agents = agents_;
  for (auto& a : agents) {
    a.control_lower.setConstant(lo);
    a.control_upper.setConstant(hi);
  }
  return ControlAffineSystem(name_, std::move(agents), state_dim_, relative_degree_,
                             drift_, drift_jacobian_, actuation_);
}

ControlAffineSystem make_single_integrator_1d(int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  std::vector<AgentSpec> agents(n_agents, AgentSpec::make(1, 1));
  const int n = n_agents;
  return ControlAffineSystem(
      "single_integrator_1d", std::move(agents), n, 1,
      [n](const Vec&) { return Vec::Zero(n); },
      [n](const Vec&) { return Mat::Zero(n, n); },
      [n](const Vec&, int i) {
        Mat g = Mat::Zero(n, 1);
        g(i, 0) = 1.0;
        return g;
      });
}

ControlAffineSystem make_double_integrator(int n_agents, int spatial_dim) {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  if (spatial_dim < 1) throw std::invalid_argument("spatial_dim must be >= 1");
  const int d = spatial_dim;
  const int block = 2 * d;
  const int n = n_agents * block;
  std::vector<AgentSpec> agents(n_agents, AgentSpec::make(block, d));

  Mat a = Mat::Zero(n, n);
  for (int i = 0; i < n_agents; ++i)
    a.block(i * block, i * block + d, d, d).setIdentity();

  return ControlAffineSystem(
      "double_integrator_" + std::to_string(d) + "d", std::move(agents), n, 2,
      [a](const Vec& x) -> Vec { return a * x; },
      [a](const Vec&) { return a; },
      [n, d, block](const Vec&, int i) {
        Mat g = Mat::Zero(n, d);
        g.block(i * block + d, 0, d, d).setIdentity();
        return g;
      });
}

ControlAffineSystem make_double_integrator_2d(int n_agents) {
  return make_double_integrator(n_agents, 2);
}

ControlAffineSystem make_relative_double_integrator() {
  std::vector<AgentSpec> agents(2, AgentSpec::make(4, 2));
  Mat a = Mat::Zero(4, 4);
  a.block(0, 2, 2, 2).setIdentity();
  return ControlAffineSystem(
      "relative_double_integrator", std::move(agents), 4, 2,
      [a](const Vec& r) -> Vec { return a * r; },
      [a](const Vec&) { return a; },
      [](const Vec&, int i) {
        Mat g = Mat::Zero(4, 2);
        g.block(2, 0, 2, 2).setIdentity();
        if (i == 0) g = -g;
        return g;
      });
}

}  // namespace respalloc
