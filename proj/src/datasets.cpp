#include "respalloc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace respalloc {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

std::string sample_label(const InteractionSample& s) {
  return "sample (trajectory " + std::to_string(s.trajectory_id) + ", t=" + std::to_string(s.t) +
         ")";
}

constexpr int kWeavingStateDim = 8;
constexpr int kWeavingControlDim = 4;

bool has_weaving_layout(const InteractionSample& s) {
  return s.x.size() == kWeavingStateDim && s.u.size() == kWeavingControlDim &&
         (s.u_des.size() == 0 || s.u_des.size() == kWeavingControlDim) &&
         (s.gamma.size() == 0 || s.gamma.size() == 2);
}

}  // namespace

void validate_sample(const InteractionSample& s, const Scenario& scenario) {
  const auto fail = [&s](const std::string& what) {
    throw std::invalid_argument(sample_label(s) + ": " + what);
  };
  if (s.x.size() != scenario.joint_state_dim())
    fail("state has length " + std::to_string(s.x.size()) + ", expected " +
         std::to_string(scenario.joint_state_dim()));
  if (s.u.size() != scenario.total_control_dim())
    fail("controls have length " + std::to_string(s.u.size()) + ", expected " +
         std::to_string(scenario.total_control_dim()));
  if (s.u_des.size() != 0 && s.u_des.size() != scenario.total_control_dim())
    fail("desired controls have the wrong length");
  if (s.gamma.size() != 0 && s.gamma.size() != scenario.n_agents())
    fail("gamma has the wrong length");
  if (!std::isfinite(s.t) || !all_finite(s.x) || !all_finite(s.u) || !all_finite(s.u_des) ||
      !all_finite(s.gamma))
    fail("non-finite value");
}

Vec desired_controls(const InteractionSample& sample, const Scenario& scenario) {
  if (sample.u_des.size() != 0) return sample.u_des;
  if (!scenario.has_desired_policy())
    throw std::invalid_argument(sample_label(sample) + ": no desired controls stored and scenario " +
                                std::string(scenario.name()) + " has no policy");
  return scenario.desired_controls(sample.x);
}

GammaSchedule constant_schedule(Vec gamma) {
  return [gamma = std::move(gamma)](int) { return gamma; };
}

GammaSchedule piecewise_schedule(std::vector<Vec> levels, int n_samples) {
  if (levels.empty() || n_samples <= 0)
    throw std::invalid_argument("piecewise schedule needs levels and a positive sample count");
  return [levels = std::move(levels), n_samples](int k) {
    const auto n_levels = static_cast<long>(levels.size());
    const long idx = std::clamp<long>(static_cast<long>(k) * n_levels / n_samples, 0, n_levels - 1);
    return levels[static_cast<std::size_t>(idx)];
  };
}

void SyntheticConfig::validate() const {
  if (n_samples <= 0) throw std::invalid_argument("sample count must be positive");
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  if (!(position_range > 0.0) || !(velocity_range >= 0.0) || !(desired_range >= 0.0))
    throw std::invalid_argument("sampling ranges must be positive");
}

std::vector<InteractionSample> generate_synthetic(const SyntheticConfig& config,
                                                  const Scenario& scenario,
                                                  const GammaSchedule& gamma_truth) {
  config.validate();
  if (scenario.kind() == ScenarioKind::weaving)
    throw std::invalid_argument("generate_synthetic: use the weaving generator for weaving scenes");

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));

  const int nx = scenario.joint_state_dim();
  const int nu = scenario.total_control_dim();
  std::vector<InteractionSample> out;
  out.reserve(static_cast<std::size_t>(config.n_samples));
  for (int k = 0; k < config.n_samples; ++k) {
    InteractionSample s;
    s.trajectory_id = 0;
    s.t = k;
    s.x.resize(nx);
    if (scenario.kind() == ScenarioKind::synthetic_2agent) {
      for (int j = 0; j < nx; ++j) s.x[j] = config.position_range * unit(rng);
    } else {
      for (int j = 0; j < nx; ++j)
        s.x[j] = (j % 4 < 2 ? config.position_range : config.velocity_range) * unit(rng);
    }
    s.u_des.resize(nu);
    for (int j = 0; j < nu; ++j) s.u_des[j] = config.desired_range * unit(rng);
    s.gamma = gamma_truth(k);

    const FilterSolution sol = solve_filter(scenario.problem(s.x, s.u_des, s.gamma));
    s.u = sol.controls;
    if (config.noise_variance > 0.0)
      for (int j = 0; j < nu; ++j) s.u[j] += noise(rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(WeavingKind kind) {
  switch (kind) {
    case WeavingKind::single: return "single";
    case WeavingKind::side_by_side: return "side-by-side";
    case WeavingKind::rear_overtake: return "rear-overtake";
    case WeavingKind::mixed: return "mixed";
  }
  return "unknown";
}

WeavingKind weaving_kind_from_string(std::string_view name) {
  if (name.starts_with("weaving-")) name.remove_prefix(8);
  std::string n(name);
  std::replace(n.begin(), n.end(), '_', '-');
  if (n == "single") return WeavingKind::single;
  if (n == "side-by-side") return WeavingKind::side_by_side;
  if (n == "rear-overtake") return WeavingKind::rear_overtake;
  if (n == "mixed") return WeavingKind::mixed;
  throw std::invalid_argument("unknown weaving kind '" + std::string(name) + "'");
}

void WeavingConfig::validate() const {
  if (!(dt > 0.0) || !(duration >= dt)) throw std::invalid_argument("weaving: need 0 < dt <= duration");
  if (!(speed_min > 0.0) || !(speed_max >= speed_min))
    throw std::invalid_argument("weaving: need 0 < speed_min <= speed_max");
  if (!(noise_variance >= 0.0) || !(advantage_jitter >= 0.0) || !(lateral_damping >= 0.0))
    throw std::invalid_argument("weaving: noise, jitter and damping must be >= 0");
}

Scenario make_weaving_scenario(const WeavingConfig& config, ScenarioParams base) {
  base.lane_targets = {-config.lane_center, config.lane_center};
  base.policy.lateral_damping = config.lateral_damping;
  return Scenario(ScenarioKind::weaving, std::move(base));
}

ResponsibilityModel make_speed_advantage_truth(double gain) {
  ModelSpec spec;
  spec.kind = ModelKind::relative_symmetric;
  spec.n_agents = 2;
  spec.context_dim = 4;
  spec.hidden_layers = 0;
  ResponsibilityModel model = init_model(spec, 0);
  auto p = model.parameters();
  // affine base: W = (0, 0, -gain/2, 0), b = 0, so phi(r) - phi(-r) = -gain * rdot_lon
  std::fill(p.begin(), p.end(), 0.0);
  p[2] = -0.5 * gain;
  return model;
}

namespace {

// Joint state (lon, lat, vlon, vlat) for agent 1 then agent 2.
Vec weaving_start(double lane, double lon1, double v1, double lon2, double v2) {
  Vec x(kWeavingStateDim);
  x << lon1, lane, v1, 0.0, lon2, -lane, v2, 0.0;
  return x;
}

Vec draw_start(WeavingKind kind, const WeavingConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto jitter = [&] { return c.advantage_jitter * (2.0 * unit(rng) - 1.0); };
  const double v0 = c.speed_min + (c.speed_max - c.speed_min) * unit(rng);
  switch (kind) {
    case WeavingKind::single:
      return weaving_start(c.lane_center, -c.rear_gap, 0.5 * (c.speed_min + c.speed_max) + c.speed_advantage,
                           0.0, 0.5 * (c.speed_min + c.speed_max));
    case WeavingKind::rear_overtake:
      return weaving_start(c.lane_center, -(c.rear_gap + jitter()), v0 + c.speed_advantage + jitter(),
                           0.0, v0);
    case WeavingKind::side_by_side: {
      const double offset = jitter();
      return weaving_start(c.lane_center, offset, v0, -offset, v0);
    }
    case WeavingKind::mixed: {
      if (unit(rng) < 0.5) return draw_start(WeavingKind::side_by_side, c, rng);
      Vec x = draw_start(WeavingKind::rear_overtake, c, rng);
      if (unit(rng) < 0.5) {
        // lower car is the fast rear one
        std::swap(x[0], x[4]);
        std::swap(x[2], x[6]);
      }
      return x;
    }
  }
  throw std::invalid_argument("unknown weaving kind");
}

}  // namespace

std::vector<InteractionSample> generate_weaving_trajectories(WeavingKind kind, int count,
                                                             std::uint64_t seed,
                                                             const WeavingConfig& config,
                                                             const Scenario& scenario,
                                                             const ResponsibilityModel& truth) {
  config.validate();
  if (scenario.kind() != ScenarioKind::weaving)
    throw std::invalid_argument("weaving generator needs the weaving scenario");
  if (count <= 0) throw std::invalid_argument("trajectory count must be positive");
  if (truth.n_agents() != 2 || (truth.context_dim() != 0 && truth.context_dim() != 4))
    throw std::invalid_argument("weaving truth model must map a 4-d relative state to 2 agents");
  if (kind == WeavingKind::single) count = 1;

  const ControlAffineSystem joint = make_double_integrator_2d(2);
  const int steps = static_cast<int>(std::lround(config.duration / config.dt));
  const double noise_std = std::sqrt(config.noise_variance);

  std::vector<InteractionSample> out;
  out.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(steps));
  for (int traj = 0; traj < count; ++traj) {
    // Per-trajectory stream, so trajectories do not depend on each other.
    std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(traj)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, noise_std);

    Vec x = draw_start(kind, config, rng);
    for (int k = 0; k < steps; ++k) {
      InteractionSample s;
      s.trajectory_id = traj;
      s.t = k * config.dt;
      s.x = x;
      s.u_des = scenario.desired_controls(x);
      s.gamma = truth.gamma(scenario.context(x));
      s.u = solve_filter(scenario.problem(x, s.u_des, s.gamma)).controls;
      if (noise_std > 0.0)
        for (int j = 0; j < s.u.size(); ++j) s.u[j] += noise(rng);
      x = joint.euler_step(x, s.u, config.dt);
      out.push_back(std::move(s));
    }
  }
  return out;
}

WeavingKind classify_weaving_start(const InteractionSample& first, double speed_tolerance) {
  if (first.x.size() != kWeavingStateDim)
    throw std::invalid_argument(sample_label(first) + ": not a weaving state");
  const double dv = first.x[6] - first.x[2];
  return std::abs(dv) <= speed_tolerance ? WeavingKind::side_by_side : WeavingKind::rear_overtake;
}

std::vector<InteractionSample> select_trajectory(std::span<const InteractionSample> samples,
                                                 int trajectory_id) {
  std::vector<InteractionSample> out;
  for (const auto& s : samples)
    if (s.trajectory_id == trajectory_id) out.push_back(s);
  return out;
}

std::vector<InteractionSample> select_weaving_subset(std::span<const InteractionSample> samples,
                                                     WeavingKind kind) {
  if (kind == WeavingKind::mixed) return {samples.begin(), samples.end()};
  if (kind == WeavingKind::single)
    throw std::invalid_argument("select a single trajectory by id instead");
  std::vector<int> keep;
  std::vector<int> seen;
  for (const auto& s : samples) {
    if (std::find(seen.begin(), seen.end(), s.trajectory_id) != seen.end()) continue;
    seen.push_back(s.trajectory_id);
    if (classify_weaving_start(s) == kind) keep.push_back(s.trajectory_id);
  }
  std::vector<InteractionSample> out;
  for (const auto& s : samples)
    if (std::find(keep.begin(), keep.end(), s.trajectory_id) != keep.end()) out.push_back(s);
  return out;
}

std::string_view to_string(Augmentation kind) {
  return kind == Augmentation::mirror_lateral ? "A1" : "A2";
}

Augmentation augmentation_from_string(std::string_view name) {
  if (name == "A1" || name == "a1" || name == "mirror" || name == "mirror-lateral")
    return Augmentation::mirror_lateral;
  if (name == "A2" || name == "a2" || name == "swap" || name == "swap-agents")
    return Augmentation::swap_agents;
  throw std::invalid_argument("unknown augmentation '" + std::string(name) + "'");
}

InteractionSample transform_sample(const InteractionSample& sample, Augmentation kind) {
  if (!has_weaving_layout(sample))
    throw std::invalid_argument(sample_label(sample) +
                                ": augmentation needs two cars with (lon, lat, vlon, vlat) states "
                                "and (lon, lat) controls");
  InteractionSample s = sample;
  if (kind == Augmentation::mirror_lateral) {
    for (int i = 0; i < 2; ++i) {
      s.x[4 * i + 1] = -s.x[4 * i + 1];
      s.x[4 * i + 3] = -s.x[4 * i + 3];
      s.u[2 * i + 1] = -s.u[2 * i + 1];
      if (s.u_des.size()) s.u_des[2 * i + 1] = -s.u_des[2 * i + 1];
    }
  } else {
    const auto swap_blocks = [](Vec& v, int block) {
      for (int j = 0; j < block; ++j) std::swap(v[j], v[block + j]);
    };
    swap_blocks(s.x, 4);
    swap_blocks(s.u, 2);
    if (s.u_des.size()) swap_blocks(s.u_des, 2);
    if (s.gamma.size()) swap_blocks(s.gamma, 1);
  }
  return s;
}

std::vector<InteractionSample> augment(std::span<const InteractionSample> samples,
                                       Augmentation kind) {
  int max_id = -1;
  for (const auto& s : samples) max_id = std::max(max_id, s.trajectory_id);
  std::vector<InteractionSample> out(samples.begin(), samples.end());
  out.reserve(2 * samples.size());
  for (const auto& s : samples) {
    InteractionSample t = transform_sample(s, kind);
    t.trajectory_id = s.trajectory_id + max_id + 1;
    out.push_back(std::move(t));
  }
  return out;
}

double active_fraction(std::span<const InteractionSample> samples, const Scenario& scenario,
                       const std::optional<Vec>& gamma) {
  if (samples.empty()) return 0.0;
  int active = 0;
  for (const auto& s : samples) {
    const Vec& g = gamma ? *gamma : s.gamma;
    if (g.size() == 0) throw std::invalid_argument(sample_label(s) + ": no gamma available");
    if (solve_filter(scenario.problem(s.x, desired_controls(s, scenario), g)).cbf_binding()) ++active;
  }
  return static_cast<double>(active) / static_cast<double>(samples.size());
}

}  // namespace respalloc
