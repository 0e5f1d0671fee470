#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "respalloc/datasets.hpp"
#include "respalloc/filter_qp.hpp"
#include "respalloc/models.hpp"
#include "respalloc/optimizers.hpp"
#include "respalloc/scenario.hpp"

namespace respalloc {

enum class LossMetric { huber, l2, l1 };

std::string_view to_string(LossMetric metric);
LossMetric loss_metric_from_string(std::string_view name);

/// Summed over the entries of the residual r:
///  huber  r^2 / 2 for |r| <= delta, delta (|r| - delta / 2) beyond
///  l2     r^2
///  l1     |r|
double metric_value(LossMetric metric, const Vec& residual, double huber_delta);
Vec metric_gradient(LossMetric metric, const Vec& residual, double huber_delta);

struct TrainConfig {
  int epochs = 3000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  LossMetric metric = LossMetric::huber;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
  int threads = 1;  // per-sample solves within a batch
  SolverOptions solver;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults = {});

struct LossGradient {
  double loss = 0.0;
  Vec gradient;         // d loss / d theta, empty when not requested
  int n_active = 0;     // samples with a binding CBF row
  int n_degenerate = 0; // samples that needed the least-squares Jacobian fallback
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean over the batch of metric(u_data - u*(gamma(context))), where u*
/// solves the filter at the sample's state with the model's allocation.
/// Desired controls come from the sample or the scenario policy.
double loss(std::span<const InteractionSample> batch, const ResponsibilityModel& model,
            const Scenario& scenario, const TrainConfig& config);

/// Loss and its gradient with respect to the model parameters, chained
/// through the filter Jacobian and the allocation map. Per-sample terms are
/// combined by a fixed pairwise reduction, so results do not depend on
/// `config.threads`.
LossGradient loss_and_gradient(std::span<const InteractionSample> batch,
                               const ResponsibilityModel& model, const Scenario& scenario,
                               const TrainConfig& config);

/// One optimizer update on `batch`; returns the pre-update loss and gradient.
/// Throws TrainingError on a non-finite loss or gradient, leaving the model
/// untouched.
LossGradient gradient_step(ResponsibilityModel& model, std::span<const InteractionSample> batch,
                           const Scenario& scenario, const TrainConfig& config,
                           Optimizer& optimizer);

struct TrainReport {
  TrainConfig config;
  std::vector<double> loss;     // per epoch, mean over its samples
  std::vector<double> wall_ms;  // per epoch, mean time of one gradient step
  std::vector<Vec> gamma;       // per epoch, constant models only
  std::vector<Vec> probes;      // contexts of the snapshot grid
  std::vector<int> snapshot_epochs;
  std::vector<std::vector<Vec>> snapshots;  // gamma at each probe
  std::vector<double> final_parameters;
  int epochs_completed = 0;
  bool aborted = false;
  std::string abort_reason;

  nlohmann::json to_json() const;
  /// epoch, loss, wall_ms, then gamma_1..N for constant models.
  std::string loss_csv() const;
};

struct FitOptions {
  std::vector<Vec> probes;  // evaluated every `snapshot_every` epochs and after the last
  int snapshot_every = 0;
  std::function<void(int epoch, double loss)> on_epoch;
};

/// Seed-deterministic training with per-epoch shuffling; the last short
/// batch is kept. Stops early with `aborted` set when the epoch loss exceeds
/// the divergence threshold or a step produces non-finite values.
TrainReport fit(std::span<const InteractionSample> dataset, ResponsibilityModel& model,
                const Scenario& scenario, const TrainConfig& config, const FitOptions& options = {});

}  // namespace respalloc
