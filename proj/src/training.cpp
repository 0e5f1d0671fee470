#include "respalloc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace respalloc {

using nlohmann::json;

std::string_view to_string(LossMetric metric) {
  switch (metric) {
    case LossMetric::huber: return "huber";
    case LossMetric::l2: return "l2";
    case LossMetric::l1: return "l1";
  }
  return "unknown";
}

LossMetric loss_metric_from_string(std::string_view name) {
  if (name == "huber") return LossMetric::huber;
  if (name == "l2") return LossMetric::l2;
  if (name == "l1") return LossMetric::l1;
  throw std::invalid_argument("unknown loss metric '" + std::string(name) + "'");
}

double metric_value(LossMetric metric, const Vec& r, double delta) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double a = std::abs(r[k]);
    switch (metric) {
      case LossMetric::huber: total += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta); break;
      case LossMetric::l2: total += a * a; break;
      case LossMetric::l1: total += a; break;
    }
  }
  return total;
}

Vec metric_gradient(LossMetric metric, const Vec& r, double delta) {
  Vec g(r.size());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double sign = r[k] > 0.0 ? 1.0 : (r[k] < 0.0 ? -1.0 : 0.0);
    switch (metric) {
      case LossMetric::huber: g[k] = std::abs(r[k]) <= delta ? r[k] : delta * sign; break;
      case LossMetric::l2: g[k] = 2.0 * r[k]; break;
      case LossMetric::l1: g[k] = sign; break;
    }
  }
  return g;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(huber_delta > 0.0)) throw std::invalid_argument("Huber threshold must be positive");
  if (!(divergence_threshold > 0.0)) throw std::invalid_argument("divergence threshold must be positive");
}

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"optimizer", std::string(to_string(c.optimizer))},
              {"loss", std::string(to_string(c.metric))},
              {"huber_delta", c.huber_delta},
              {"seed", c.seed},
              {"divergence_threshold", c.divergence_threshold},
              {"threads", c.threads},
              {"solver_max_iterations", c.solver.max_iterations},
              {"solver_tolerance", c.solver.tolerance}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c) {
  auto read = [&doc](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("epochs", c.epochs);
  read("batch_size", c.batch_size);
  read("learning_rate", c.learning_rate);
  read("huber_delta", c.huber_delta);
  read("seed", c.seed);
  read("divergence_threshold", c.divergence_threshold);
  read("threads", c.threads);
  read("solver_max_iterations", c.solver.max_iterations);
  read("solver_tolerance", c.solver.tolerance);
  if (doc.contains("optimizer")) c.optimizer = optimizer_kind_from_string(doc.at("optimizer").get<std::string>());
  if (doc.contains("loss")) c.metric = loss_metric_from_string(doc.at("loss").get<std::string>());
  return c;
}

namespace {

struct SampleTerm {
  double loss = 0.0;
  Vec grad;
  bool active = false;
  bool degenerate = false;
};

SampleTerm evaluate_sample(const InteractionSample& s, const ResponsibilityModel& model,
                           const Scenario& scenario, const TrainConfig& config, bool with_grad) {
  const Vec context = scenario.context(s.x);
  const Vec gamma = model.gamma(context);
  const FilterProblem problem = scenario.problem(s.x, desired_controls(s, scenario), gamma);
  const FilterSolution sol = solve_filter(problem, config.solver);
  const Vec residual = s.u - sol.controls;

  SampleTerm term;
  term.loss = metric_value(config.metric, residual, config.huber_delta);
  term.active = sol.cbf_binding();
  if (!with_grad) return term;
  // d loss / d u* = -metric'(residual)
  const Vec dl_du = -metric_gradient(config.metric, residual, config.huber_delta);
  const FilterJacobians jac = differentiate_filter(problem, sol);
  term.degenerate = jac.degenerate;
  const Vec dl_dgamma = jac.du_dgamma.transpose() * dl_du;
  term.grad = model.gamma_vjp(context, dl_dgamma);
  return term;
}

// Fixed-shape pairwise reduction over [lo, hi).
template <class T, class Get>
T pairwise_sum(std::size_t lo, std::size_t hi, const Get& get) {
  if (hi - lo == 1) return get(lo);
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum<T>(lo, mid, get) + pairwise_sum<T>(mid, hi, get);
}

std::vector<SampleTerm> evaluate_batch(std::span<const InteractionSample> batch,
                                       const ResponsibilityModel& model, const Scenario& scenario,
                                       const TrainConfig& config, bool with_grad) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<SampleTerm> terms(batch.size());
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < batch.size(); k += stride)
      terms[k] = evaluate_sample(batch[k], model, scenario, config, with_grad);
  };
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(config.threads, 1)), batch.size());
  if (threads <= 1) {
    work(0, 1);
    return terms;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return terms;
}

}  // namespace

double loss(std::span<const InteractionSample> batch, const ResponsibilityModel& model,
            const Scenario& scenario, const TrainConfig& config) {
  const auto terms = evaluate_batch(batch, model, scenario, config, false);
  const double total = pairwise_sum<double>(0, terms.size(), [&](std::size_t k) { return terms[k].loss; });
  return total / static_cast<double>(terms.size());
}

LossGradient loss_and_gradient(std::span<const InteractionSample> batch,
                               const ResponsibilityModel& model, const Scenario& scenario,
                               const TrainConfig& config) {
  const auto terms = evaluate_batch(batch, model, scenario, config, true);
  const double n = static_cast<double>(terms.size());
  LossGradient out;
  out.loss = pairwise_sum<double>(0, terms.size(), [&](std::size_t k) { return terms[k].loss; }) / n;
  out.gradient = pairwise_sum<Vec>(0, terms.size(), [&](std::size_t k) { return terms[k].grad; }) / n;
  for (const auto& t : terms) {
    out.n_active += t.active;
    out.n_degenerate += t.degenerate;
  }
  return out;
}

LossGradient gradient_step(ResponsibilityModel& model, std::span<const InteractionSample> batch,
                           const Scenario& scenario, const TrainConfig& config,
                           Optimizer& optimizer) {
  LossGradient lg = loss_and_gradient(batch, model, scenario, config);
  if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite loss or gradient (loss = " << lg.loss << ", batch of " << batch.size()
        << " starting at trajectory " << batch.front().trajectory_id << ", t=" << batch.front().t << ")";
    throw TrainingError(msg.str());
  }
  optimizer.step(model.parameters(), {lg.gradient.data(), static_cast<std::size_t>(lg.gradient.size())});
  return lg;
}

json TrainReport::to_json() const {
  const auto vecs = [](const std::vector<Vec>& vs) {
    json out = json::array();
    for (const auto& v : vs) out.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return out;
  };
  json snaps = json::array();
  for (std::size_t k = 0; k < snapshots.size(); ++k)
    snaps.push_back({{"epoch", snapshot_epochs[k]}, {"gamma", vecs(snapshots[k])}});
  return json{{"config", respalloc::to_json(config)},
              {"epochs_completed", epochs_completed},
              {"aborted", aborted},
              {"abort_reason", abort_reason},
              {"loss", loss},
              {"wall_ms", wall_ms},
              {"gamma", vecs(gamma)},
              {"probes", vecs(probes)},
              {"snapshots", snaps},
              {"final_parameters", final_parameters}};
}

std::string TrainReport::loss_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,wall_ms";
  const std::size_t n_gamma = gamma.empty() ? 0 : static_cast<std::size_t>(gamma.front().size());
  for (std::size_t i = 1; i <= n_gamma; ++i) out << ",gamma_" << i;
  out << '\n';
  for (std::size_t e = 0; e < loss.size(); ++e) {
    out << e + 1 << ',' << loss[e] << ',' << wall_ms[e];
    if (e < gamma.size())
      for (Eigen::Index i = 0; i < gamma[e].size(); ++i) out << ',' << gamma[e][i];
    out << '\n';
  }
  return out.str();
}

TrainReport fit(std::span<const InteractionSample> dataset, ResponsibilityModel& model,
                const Scenario& scenario, const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
  for (const auto& s : dataset) validate_sample(s, scenario);
  if (model.n_agents() != scenario.n_agents())
    throw std::invalid_argument("model has " + std::to_string(model.n_agents()) +
                                " agents, scenario has " + std::to_string(scenario.n_agents()));
  if (model.context_dim() != 0 && model.context_dim() != scenario.context_dim())
    throw std::invalid_argument("model expects context of length " + std::to_string(model.context_dim()) +
                                ", scenario provides " + std::to_string(scenario.context_dim()));

  TrainReport report;
  report.config = config;
  report.probes = options.probes;
  const bool constant = model.kind() == ModelKind::constant;
  const Vec zero_context = Vec::Zero(std::max(scenario.context_dim(), 1));
  const auto snapshot = [&](int epoch) {
    if (options.probes.empty()) return;
    std::vector<Vec> g;
    g.reserve(options.probes.size());
    for (const auto& p : options.probes) g.push_back(model.gamma(p));
    report.snapshot_epochs.push_back(epoch);
    report.snapshots.push_back(std::move(g));
  };

  auto optimizer = make_optimizer(config.optimizer, config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<InteractionSample> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted_loss = 0.0;
    double step_ms = 0.0;
    int steps = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        batch.clear();
        for (std::size_t k = start; k < stop; ++k) batch.push_back(dataset[order[k]]);
        const auto t0 = std::chrono::steady_clock::now();
        const LossGradient lg = gradient_step(model, batch, scenario, config, *optimizer);
        step_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        weighted_loss += lg.loss * static_cast<double>(batch.size());
        ++steps;
      }
    } catch (const TrainingError& e) {
      report.aborted = true;
      report.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    const double epoch_loss = weighted_loss / static_cast<double>(dataset.size());
    report.loss.push_back(epoch_loss);
    report.wall_ms.push_back(step_ms / std::max(steps, 1));
    if (constant) report.gamma.push_back(model.gamma(zero_context));
    report.epochs_completed = epoch;
    if (options.snapshot_every > 0 && epoch % options.snapshot_every == 0) snapshot(epoch);
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss);
    if (!std::isfinite(epoch_loss) || epoch_loss > config.divergence_threshold) {
      report.aborted = true;
      std::ostringstream msg;
      msg << "epoch " << epoch << ": loss " << epoch_loss << " exceeds divergence threshold "
          << config.divergence_threshold;
      report.abort_reason = msg.str();
      break;
    }
  }
  if (report.snapshot_epochs.empty() || report.snapshot_epochs.back() != report.epochs_completed)
    snapshot(report.epochs_completed);
  const auto params = model.parameters();
  report.final_parameters.assign(params.begin(), params.end());
  return report;
}

}  // namespace respalloc
