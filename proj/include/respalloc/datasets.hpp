#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "respalloc/models.hpp"
#include "respalloc/scenario.hpp"

namespace respalloc {

/// One observation: joint state, observed stacked controls and the desired
/// controls the agents were filtering. `gamma` holds the generating
/// allocation when known.
struct InteractionSample {
  int trajectory_id = 0;
  double t = 0.0;
  Vec x;
  Vec u;
  Vec u_des;
  Vec gamma;  // empty when unknown

  bool operator==(const InteractionSample&) const = default;
};

/// Throws std::invalid_argument naming the sample when its dimensions do not
/// match the scenario or a value is not finite.
void validate_sample(const InteractionSample& sample, const Scenario& scenario);

/// Stored desired controls, or the scenario policy's when none are stored.
Vec desired_controls(const InteractionSample& sample, const Scenario& scenario);

/// Ground-truth allocation for the k-th synthetic sample.
using GammaSchedule = std::function<Vec(int index)>;

GammaSchedule constant_schedule(Vec gamma);
/// Splits [0, n_samples) into equal consecutive windows, one per level.
GammaSchedule piecewise_schedule(std::vector<Vec> levels, int n_samples);

/// Synthetic (x, u^des) sampling box and noise. States and desired controls
/// are drawn uniformly from symmetric boxes around the origin:
///  synthetic_2agent  x_i in [-position_range, position_range]
///  synthetic_6agent  positions in [-position_range, position_range]^2,
///                    velocities in [-velocity_range, velocity_range]^2
/// The defaults straddle the barrier boundary, so roughly half the samples
/// activate the CBF row.
struct SyntheticConfig {
  int n_samples = 128;
  double noise_variance = 0.1;  // per control dimension
  std::uint64_t seed = 0;
  double position_range = 1.5;
  double velocity_range = 1.0;
  double desired_range = 2.0;
  void validate() const;
};

/// For each sampled (x, u^des): solve the filter under the scheduled gamma,
/// add Gaussian noise to u* and emit the sample. Synthetic scenarios only.
std::vector<InteractionSample> generate_synthetic(const SyntheticConfig& config,
                                                  const Scenario& scenario,
                                                  const GammaSchedule& gamma_truth);

enum class WeavingKind { single, side_by_side, rear_overtake, mixed };

std::string_view to_string(WeavingKind kind);
WeavingKind weaving_kind_from_string(std::string_view name);

/// Two-lane weaving geometry. Agent 1 starts in the upper lane
/// (+lane_center) and agent 2 in the lower lane; each targets the other's
/// lane center. The lead car starts at x_lon = 0.
struct WeavingConfig {
  double dt = 0.1;
  double duration = 15.0;
  double lane_center = 1.85;
  double speed_min = 8.0;
  double speed_max = 12.0;
  double speed_advantage = 2.0;   // rear_overtake: rear car is this much faster
  double rear_gap = 3.0;          // rear_overtake: longitudinal head start
  double advantage_jitter = 0.3;  // uniform +- jitter on advantage, gap and side-by-side offset
  double noise_variance = 0.05;   // per control dimension, added before integration
  double lateral_damping = 2.0;   // see DesiredPolicyParams::lateral_damping
  void validate() const;
};

/// Scenario for weaving rollouts: default filter settings with the lane
/// targets and lateral damping taken from `config`.
Scenario make_weaving_scenario(const WeavingConfig& config, ScenarioParams base = {});

/// gamma_1(r) = (1 + tanh(-gain * rdot_lon)) / 2 over r = x_2 - x_1: the
/// faster car is less responsible. Expressed as a RelativeSymmetricGamma
/// with an affine base network.
ResponsibilityModel make_speed_advantage_truth(double gain = 0.5);

/// Closed-loop rollouts of the handcrafted desired policies through the
/// filter with allocations from `truth` (context = relative state).
///  single         one trajectory: agent 1 starts rear_gap behind and
///                 speed_advantage faster, no jitter in the initial state
///  rear_overtake  as single with jittered speed, gap and advantage
///  side_by_side   equal speeds, near-equal longitudinal positions
///  mixed          each trajectory is side_by_side or rear_overtake, with
///                 either car as the faster one
/// Trajectory ids are 0..count-1; `single` always yields one trajectory.
std::vector<InteractionSample> generate_weaving_trajectories(WeavingKind kind, int count,
                                                             std::uint64_t seed,
                                                             const WeavingConfig& config,
                                                             const Scenario& scenario,
                                                             const ResponsibilityModel& truth);

/// Initial-condition label of one weaving trajectory (first sample).
WeavingKind classify_weaving_start(const InteractionSample& first, double speed_tolerance = 0.5);

/// Keeps whole trajectories whose start matches `kind`; `mixed` keeps all.
std::vector<InteractionSample> select_weaving_subset(std::span<const InteractionSample> samples,
                                                     WeavingKind kind);

/// Samples of one trajectory in stored order.
std::vector<InteractionSample> select_trajectory(std::span<const InteractionSample> samples,
                                                 int trajectory_id);

enum class Augmentation { mirror_lateral, swap_agents };

std::string_view to_string(Augmentation kind);
Augmentation augmentation_from_string(std::string_view name);

/// Transform of one weaving sample (joint state of two cars with blocks
/// (lon, lat, vlon, vlat) and controls (lon, lat) per car).
///  mirror_lateral  negates lateral position, velocity and controls
///  swap_agents     exchanges the agents, so r -> -r and gamma swaps
InteractionSample transform_sample(const InteractionSample& sample, Augmentation kind);

/// Input followed by transformed copies; copies get trajectory ids offset
/// past the largest input id. Throws std::invalid_argument on samples
/// without the weaving layout.
std::vector<InteractionSample> augment(std::span<const InteractionSample> samples,
                                       Augmentation kind);

/// Fraction of samples whose filter solution has a binding CBF row under
/// the stored gamma, or under `gamma` when given.
double active_fraction(std::span<const InteractionSample> samples, const Scenario& scenario,
                       const std::optional<Vec>& gamma = std::nullopt);

}  // namespace respalloc
