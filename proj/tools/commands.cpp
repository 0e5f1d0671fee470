#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "respalloc/checkpoint.hpp"
#include "respalloc/trajectory_io.hpp"
#include "respalloc/training.hpp"

namespace respalloc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const GenerateOptions& o) {
  return {{"scenario", o.scenario}, {"n", o.n},         {"gamma", o.gamma},
          {"schedule", o.schedule}, {"noise", opt_json(o.noise)}, {"seed", o.seed},
          {"count", o.count},       {"duration", o.duration},     {"dt", o.dt},
          {"truth_gain", o.truth_gain}, {"augment", o.augment},   {"out", o.out},
          {"csv", o.csv},           {"truth_out", o.truth_out}};
}

json to_json(const TrainOptions& o) {
  return {{"data", o.data},
          {"model", o.model},
          {"hidden_width", o.hidden_width},
          {"hidden_layers", o.hidden_layers},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"lr", o.lr},
          {"optimizer", o.optimizer},
          {"metric", o.metric},
          {"huber_delta", o.huber_delta},
          {"seed", o.seed},
          {"threads", o.threads},
          {"divergence", o.divergence},
          {"beta1", opt_json(o.beta1)},
          {"beta2", opt_json(o.beta2)},
          {"augment", o.augment},
          {"standardize", o.standardize},
          {"snapshot_every", o.snapshot_every},
          {"checkpoint", o.checkpoint},
          {"report", o.report},
          {"loss_csv", o.loss_csv}};
}

json to_json(const LandscapeOptions& o) {
  return {{"checkpoint", o.checkpoint}, {"x_axis", o.x_axis},   {"y_axis", o.y_axis},
          {"x_range", o.x_range},       {"y_range", o.y_range}, {"resolution", o.resolution},
          {"fix", o.fix},               {"anchor", o.anchor},   {"desired", o.desired},
          {"negate", o.negate},         {"out", o.out}};
}

json to_json(const TraceOptions& o) {
  return {{"checkpoint", o.checkpoint}, {"data", o.data}, {"trajectory", o.trajectory}, {"out", o.out}};
}

json to_json(const BenchOptions& o) {
  return {{"scenario", o.scenario},   {"model", o.model},         {"min_batch", o.min_batch},
          {"max_batch", o.max_batch}, {"repeats", o.repeats},     {"threads", o.threads},
          {"seed", o.seed},           {"out", o.out}};
}

namespace {

// Shortest round-trip decimal form, so identical runs give identical files.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void require_output(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  const fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw UsageError("output directory does not exist: " + parent.string());
}

// Effective configuration next to a CSV artifact.
void write_sidecar(const std::string& path, const json& config) {
  write_file_atomic(path + ".json", config.dump(2) + "\n");
}

Scenario scenario_from_header(const TrajectoryHeader& header) {
  if (header.config.is_object() && header.config.contains("scenario"))
    return Scenario::from_json(header.config.at("scenario"));
  return Scenario(scenario_kind_from_string(header.scenario));
}

std::vector<InteractionSample> apply_augmentations(std::vector<InteractionSample> samples,
                                                   const std::vector<std::string>& names) {
  for (const auto& name : names) samples = augment(samples, augmentation_from_string(name));
  return samples;
}

struct Bundle {
  ResponsibilityModel model;
  Scenario scenario;
  json provenance;
};

Bundle load_bundle(const std::string& path) {
  require_input(path, "checkpoint");
  auto model = load_checkpoint(path);
  std::ifstream in(path);
  const json doc = json::parse(in);
  const json provenance = doc.value("provenance", json::object());
  if (!provenance.contains("scenario"))
    throw UsageError("checkpoint " + path + " does not record its scenario");
  return {std::move(model), Scenario::from_json(provenance.at("scenario")), provenance};
}

void check_model_fits(const ResponsibilityModel& model, const Scenario& sc) {
  if (model.n_agents() != sc.n_agents() ||
      (model.context_dim() != 0 && model.context_dim() != sc.context_dim()))
    throw UsageError("model (" + std::to_string(model.n_agents()) + " agents, context " +
                     std::to_string(model.context_dim()) + ") does not fit scenario " +
                     std::string(sc.name()) + " (" + std::to_string(sc.n_agents()) + " agents, context " +
                     std::to_string(sc.context_dim()) + ")");
}

std::string join_axes(const Scenario& sc) {
  std::string out;
  for (const auto& a : sc.context_axes()) out += (out.empty() ? "" : ", ") + a;
  return out;
}

int axis_index(const Scenario& sc, const std::string& name) {
  const auto idx = sc.context_axis(name);
  if (!idx) throw UsageError("axis '" + name + "' is not in the model context (" + join_axes(sc) + ")");
  return *idx;
}

Vec gamma_from_flags(const GenerateOptions& o, int n_agents, std::mt19937_64& rng) {
  if (o.gamma.empty()) {
    std::exponential_distribution<double> e(1.0);
    Vec g(n_agents);
    for (int i = 0; i < n_agents; ++i) g[i] = e(rng);
    return g / g.sum();
  }
  Vec g(n_agents);
  if (n_agents == 2 && o.gamma.size() == 1) {
    g << o.gamma[0], 1.0 - o.gamma[0];
  } else if (static_cast<int>(o.gamma.size()) == n_agents) {
    for (int i = 0; i < n_agents; ++i) g[i] = o.gamma[static_cast<std::size_t>(i)];
  } else {
    throw UsageError("--gamma needs " + std::to_string(n_agents) + " values" +
                     (n_agents == 2 ? " or a single gamma_1" : ""));
  }
  if (g.minCoeff() < 0.0 || std::abs(g.sum() - 1.0) > 1e-9)
    throw UsageError("--gamma must lie on the probability simplex");
  return g;
}

// Scale-only standardizer; a zero offset keeps negation symmetry intact.
Standardizer scale_only(std::span<const InteractionSample> samples, const Scenario& sc) {
  const int n = sc.context_dim();
  Vec mean = Vec::Zero(n), sq = Vec::Zero(n);
  for (const auto& s : samples) mean += sc.context(s.x);
  mean /= static_cast<double>(samples.size());
  for (const auto& s : samples) sq += (sc.context(s.x) - mean).cwiseAbs2();
  Standardizer st;
  st.offset = Vec::Zero(n);
  st.scale = (sq / static_cast<double>(samples.size())).cwiseSqrt();
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(st.scale[k] > 0.0)) st.scale[k] = 1.0;
  return st;
}

// 11 x 11 grid over the data range of the first two context axes, remaining
// axes at their data mean.
std::vector<Vec> default_probes(std::span<const InteractionSample> samples, const Scenario& sc) {
  const int n = sc.context_dim();
  Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec hi = -lo, mean = Vec::Zero(n);
  for (const auto& s : samples) {
    const Vec c = sc.context(s.x);
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
    mean += c;
  }
  mean /= static_cast<double>(samples.size());
  std::vector<Vec> probes;
  if (n < 2) return probes;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) {
      Vec c = mean;
      c[0] = lo[0] + (hi[0] - lo[0]) * i / 10.0;
      c[1] = lo[1] + (hi[1] - lo[1]) * j / 10.0;
      probes.push_back(c);
    }
  return probes;
}

}  // namespace

void run_generate(const GenerateOptions& o, std::ostream& log) {
  require_output(o.out, "output");
  if (!o.csv.empty()) require_output(o.csv, "CSV output");
  if (!o.truth_out.empty()) require_output(o.truth_out, "truth checkpoint");
  std::vector<InteractionSample> samples;
  json extra = json::object();
  std::optional<ResponsibilityModel> truth_model;

  const bool weaving = o.scenario.rfind("weaving", 0) == 0;
  std::optional<Scenario> scenario;
  if (weaving) {
    const WeavingKind kind =
        o.scenario == "weaving" ? WeavingKind::mixed : weaving_kind_from_string(o.scenario);
    WeavingConfig wc;
    wc.duration = o.duration;
    wc.dt = o.dt;
    if (o.noise) wc.noise_variance = *o.noise;
    scenario = make_weaving_scenario(wc);
    const auto truth = make_speed_advantage_truth(o.truth_gain);
    samples = generate_weaving_trajectories(kind, o.count, o.seed, wc, *scenario, truth);
    truth_model = truth;
    extra["weaving_kind"] = std::string(to_string(kind));
  } else {
    scenario.emplace(scenario_kind_from_string(o.scenario));
    if (scenario->kind() == ScenarioKind::weaving)
      throw UsageError("unknown scenario '" + o.scenario + "'");
    SyntheticConfig cfg;
    cfg.n_samples = o.n;
    cfg.seed = o.seed;
    if (o.noise) cfg.noise_variance = *o.noise;
    GammaSchedule schedule;
    if (!o.schedule.empty()) {
      if (scenario->n_agents() != 2) throw UsageError("--schedule needs a two-agent scenario");
      if (!o.gamma.empty()) throw UsageError("--gamma and --schedule are exclusive");
      std::vector<Vec> levels;
      for (double g : o.schedule) {
        if (g < 0.0 || g > 1.0) throw UsageError("--schedule levels must lie in [0, 1]");
        levels.push_back((Vec(2) << g, 1.0 - g).finished());
      }
      schedule = piecewise_schedule(levels, o.n);
      extra["schedule"] = o.schedule;
    } else {
      std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
      const Vec g = gamma_from_flags(o, scenario->n_agents(), rng);
      schedule = constant_schedule(g);
      ModelSpec spec;
      spec.n_agents = scenario->n_agents();
      truth_model = init_model(spec, 0);
      for (Eigen::Index i = 0; i < g.size(); ++i) truth_model->parameters()[i] = std::log(g[i]);
      extra["gamma"] = std::vector<double>(g.data(), g.data() + g.size());
    }
    samples = generate_synthetic(cfg, *scenario, schedule);
  }
  if (!o.truth_out.empty() && !truth_model)
    throw UsageError("--truth-out needs a constant --gamma or a weaving scenario");
  samples = apply_augmentations(std::move(samples), o.augment);

  json config{{"run", to_json(o)}, {"scenario", scenario->to_json()}, {"truth", extra}};
  const auto header = make_header(*scenario, config);
  save_trajectories(o.out, header, samples);
  if (!o.csv.empty()) save_trajectories_csv(o.csv, header, samples);
  if (!o.truth_out.empty()) save_checkpoint(*truth_model, o.truth_out, config);

  std::set<int> ids;
  for (const auto& s : samples) ids.insert(s.trajectory_id);
  log << "wrote " << samples.size() << " samples in " << ids.size() << " trajectories to " << o.out
      << "\nactive-constraint fraction " << active_fraction(samples, *scenario) << "\n";
}

void run_train(const TrainOptions& o, std::ostream& log) {
  require_input(o.data, "dataset");
  require_output(o.checkpoint, "checkpoint");
  if (!o.report.empty()) require_output(o.report, "report");
  if (!o.loss_csv.empty()) require_output(o.loss_csv, "loss CSV");

  const TrajectoryFile file = load_trajectories(o.data);
  if (file.samples.empty()) throw UsageError("dataset " + o.data + " holds no samples");
  Scenario scenario = scenario_from_header(file.header);
  if (o.beta1 || o.beta2) {
    ScenarioParams params = scenario.params();
    if (o.beta1) params.weights.beta1 = *o.beta1;
    if (o.beta2) params.weights.beta2 = *o.beta2;
    scenario = Scenario(scenario.kind(), params);
  }
  const auto samples = apply_augmentations(file.samples, o.augment);

  ModelSpec spec;
  spec.kind = model_kind_from_string(o.model);
  spec.n_agents = scenario.n_agents();
  spec.context_dim = scenario.context_dim();
  spec.hidden_width = o.hidden_width;
  spec.hidden_layers = o.hidden_layers;
  if (o.standardize && spec.kind != ModelKind::constant) spec.standardizer = scale_only(samples, scenario);
  auto model = init_model(spec, o.seed);

  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.lr;
  tc.optimizer = optimizer_kind_from_string(o.optimizer);
  tc.metric = loss_metric_from_string(o.metric);
  tc.huber_delta = o.huber_delta;
  tc.seed = o.seed;
  tc.threads = o.threads;
  tc.divergence_threshold = o.divergence;
  tc.validate();

  FitOptions fo;
  if (spec.kind != ModelKind::constant) {
    fo.probes = default_probes(samples, scenario);
    fo.snapshot_every = o.snapshot_every < 0 ? std::max(1, o.epochs / 10) : o.snapshot_every;
  }
  const TrainReport report = fit(samples, model, scenario, tc, fo);

  const json run{{"run", to_json(o)}, {"scenario", scenario.to_json()}, {"dataset", file.header.config}};
  if (!o.report.empty()) {
    json doc = report.to_json();
    doc["effective_config"] = run;
    write_file_atomic(o.report, doc.dump(2) + "\n");
  }
  if (!o.loss_csv.empty()) {
    write_file_atomic(o.loss_csv, report.loss_csv());
    write_sidecar(o.loss_csv, run);
  }
  if (report.aborted)
    throw RuntimeFailure("training aborted after " + std::to_string(report.epochs_completed) +
                         " epochs: " + report.abort_reason);
  save_checkpoint(model, o.checkpoint, run);

  log << "trained " << to_string(spec.kind) << " model for " << report.epochs_completed
      << " epochs on " << samples.size() << " samples; final loss " << report.loss.back() << "\n";
  if (spec.kind == ModelKind::constant) {
    const Vec g = model.gamma(Vec::Zero(1));
    log << "gamma";
    for (Eigen::Index i = 0; i < g.size(); ++i) log << " " << g[i];
    log << "\n";
  }
}

void run_landscape(const LandscapeOptions& o, std::ostream& log) {
  require_output(o.out, "output");
  const Bundle b = load_bundle(o.checkpoint);
  const Scenario& sc = b.scenario;
  check_model_fits(b.model, sc);
  if (sc.context_dim() < 2) throw UsageError("landscape needs a context with at least two axes");
  if (o.resolution < 2) throw UsageError("--resolution must be at least 2");
  if (o.x_range.size() != 2 || o.y_range.size() != 2 || !(o.x_range[0] < o.x_range[1]) ||
      !(o.y_range[0] < o.y_range[1]))
    throw UsageError("ranges take two increasing values");
  const std::string xname = o.x_axis.empty() ? sc.context_axes()[0] : o.x_axis;
  const std::string yname = o.y_axis.empty() ? sc.context_axes()[1] : o.y_axis;
  const int ix = axis_index(sc, xname), iy = axis_index(sc, yname);
  if (ix == iy) throw UsageError("landscape axes must differ");

  Vec base = Vec::Zero(sc.context_dim());
  for (const auto& f : o.fix) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw UsageError("--fix takes name=value, got '" + f + "'");
    const int idx = axis_index(sc, f.substr(0, eq));
    double v = 0.0;
    const auto text = f.substr(eq + 1);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
      throw UsageError("--fix value is not a number: '" + f + "'");
    base[idx] = v;
  }

  Vec anchor = Vec::Zero(sc.joint_state_dim());
  if (!o.anchor.empty()) {
    if (static_cast<int>(o.anchor.size()) != sc.joint_state_dim())
      throw UsageError("--anchor needs " + std::to_string(sc.joint_state_dim()) + " values");
    anchor = Eigen::Map<const Vec>(o.anchor.data(), static_cast<Eigen::Index>(o.anchor.size()));
  }
  std::optional<Vec> desired;
  if (!o.desired.empty()) {
    if (static_cast<int>(o.desired.size()) != sc.total_control_dim())
      throw UsageError("--desired needs " + std::to_string(sc.total_control_dim()) + " values");
    desired = Eigen::Map<const Vec>(o.desired.data(), static_cast<Eigen::Index>(o.desired.size()));
  }

  const double beta1 = sc.params().weights.beta1;
  std::ostringstream csv;
  csv << xname << "," << yname << ",gamma_1,filter_inactive\n";
  int inactive_cells = 0;
  for (int i = 0; i < o.resolution; ++i) {
    const double xv = o.x_range[0] + (o.x_range[1] - o.x_range[0]) * i / (o.resolution - 1);
    for (int j = 0; j < o.resolution; ++j) {
      const double yv = o.y_range[0] + (o.y_range[1] - o.y_range[0]) * j / (o.resolution - 1);
      Vec ctx = base;
      ctx[ix] = xv;
      ctx[iy] = yv;
      if (o.negate) ctx = -ctx;
      const Vec x = sc.state_with_context(anchor, ctx);
      const Vec gamma = b.model.gamma(ctx);
      const Vec des = desired ? *desired
                              : (sc.has_desired_policy() ? sc.desired_controls(x)
                                                         : Vec::Zero(sc.total_control_dim()));
      const auto sol = solve_filter(sc.problem(x, des, gamma));
      // inactive: no slack and the closed-form shrunk desired control
      Vec shrunk(des.size());
      for (int a = 0, k = 0; a < sc.n_agents(); ++a)
        for (int d = 0; d < sc.control_dim(); ++d, ++k) shrunk[k] = gamma[a] / (gamma[a] + beta1) * des[k];
      const bool inactive =
          sol.slack == 0.0 && (sol.controls - shrunk).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + shrunk.lpNorm<Eigen::Infinity>());
      inactive_cells += inactive;
      csv << num(xv) << "," << num(yv) << "," << num(gamma[0]) << "," << (inactive ? 1 : 0) << "\n";
    }
  }
  write_file_atomic(o.out, csv.str());
  write_sidecar(o.out, {{"run", to_json(o)}, {"checkpoint", b.provenance}});
  log << "wrote " << o.resolution * o.resolution << " cells to " << o.out << "; filter inactive in "
      << inactive_cells << "\n";
}

void run_trace(const TraceOptions& o, std::ostream& log) {
  require_input(o.data, "trajectory file");
  require_output(o.out, "output");
  const Bundle b = load_bundle(o.checkpoint);
  const TrajectoryFile file = load_trajectories(o.data);
  const Scenario sc = scenario_from_header(file.header);
  check_model_fits(b.model, sc);
  if (file.samples.empty()) throw UsageError("trajectory file " + o.data + " holds no samples");
  const int id = o.trajectory < 0 ? file.samples.front().trajectory_id : o.trajectory;
  const auto rows = select_trajectory(file.samples, id);
  if (rows.empty()) throw UsageError("trajectory " + std::to_string(id) + " not found in " + o.data);

  const int n = sc.n_agents(), d = sc.control_dim();
  std::ostringstream csv;
  csv << "t";
  for (int i = 1; i <= n; ++i) csv << ",gamma_" << i;
  for (const char* tag : {"_des", "", "_filt"})
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < d; ++k) csv << ",u" << i << tag << "_" << k;
  csv << ",barrier\n";
  for (const auto& s : rows) {
    const Vec gamma = b.model.gamma(sc.context(s.x));
    const Vec des = desired_controls(s, sc);
    const auto sol = solve_filter(sc.problem(s.x, des, gamma));
    csv << num(s.t);
    for (Eigen::Index i = 0; i < gamma.size(); ++i) csv << "," << num(gamma[i]);
    for (const Vec* v : {&des, &s.u, &sol.controls})
      for (Eigen::Index k = 0; k < v->size(); ++k) csv << "," << num((*v)[k]);
    csv << "," << num(sc.barrier_value(s.x)) << "\n";
  }
  write_file_atomic(o.out, csv.str());
  write_sidecar(o.out, {{"run", to_json(o)}, {"checkpoint", b.provenance}, {"dataset", file.header.config}});
  log << "wrote " << rows.size() << " steps of trajectory " << id << " to " << o.out << "\n";
}

void run_bench(const BenchOptions& o, std::ostream& log) {
  require_output(o.out, "output");
  if (o.min_batch < 1 || o.max_batch < o.min_batch) throw UsageError("need 1 <= min-batch <= max-batch");
  if (o.repeats < 1) throw UsageError("--repeats must be positive");

  std::vector<InteractionSample> data;
  std::optional<Scenario> scenario;
  if (o.scenario.rfind("weaving", 0) == 0) {
    const WeavingConfig wc;
    scenario = make_weaving_scenario(wc);
    const int per = static_cast<int>(std::lround(wc.duration / wc.dt));
    data = generate_weaving_trajectories(WeavingKind::rear_overtake, (o.max_batch + per - 1) / per, o.seed, wc,
                                         *scenario, make_speed_advantage_truth());
  } else {
    scenario.emplace(scenario_kind_from_string(o.scenario));
    SyntheticConfig cfg;
    cfg.n_samples = o.max_batch;
    cfg.seed = o.seed;
    data = generate_synthetic(cfg, *scenario,
                              constant_schedule(Vec::Constant(scenario->n_agents(), 1.0 / scenario->n_agents())));
  }
  ModelSpec spec;
  spec.kind = model_kind_from_string(o.model);
  spec.n_agents = scenario->n_agents();
  spec.context_dim = scenario->context_dim();
  const auto model = init_model(spec, o.seed);
  TrainConfig tc;
  tc.threads = o.threads;

  std::ostringstream csv;
  csv << "batch_size,loss_grad_ms,min_ms,max_ms\n";
  std::vector<double> sizes, medians;
  for (int batch = o.min_batch; batch <= o.max_batch; batch *= 2) {
    const std::span<const InteractionSample> slice(data.data(), static_cast<std::size_t>(batch));
    loss_and_gradient(slice, model, *scenario, tc);  // warm-up, untimed
    std::vector<double> ms;
    for (int r = 0; r < o.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto lg = loss_and_gradient(slice, model, *scenario, tc);
      const auto t1 = std::chrono::steady_clock::now();
      if (!std::isfinite(lg.loss)) throw RuntimeFailure("non-finite loss in benchmark");
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    csv << batch << "," << num(median) << "," << num(ms.front()) << "," << num(ms.back()) << "\n";
    sizes.push_back(batch);
    medians.push_back(median);
  }
  json summary{{"run", to_json(o)}, {"scenario", scenario->to_json()}};
  if (sizes.size() >= 2) {
    // least-squares slope in log-log space
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      mx += std::log(sizes[k]);
      my += std::log(medians[k]);
    }
    mx /= static_cast<double>(sizes.size());
    my /= static_cast<double>(sizes.size());
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      sxy += (std::log(sizes[k]) - mx) * (std::log(medians[k]) - my);
      sxx += (std::log(sizes[k]) - mx) * (std::log(sizes[k]) - mx);
    }
    summary["exponent"] = sxy / sxx;
    log << "fitted exponent " << sxy / sxx << "\n";
  }
  write_file_atomic(o.out, csv.str());
  write_sidecar(o.out, summary);
  log << "wrote " << sizes.size() << " rows to " << o.out << "\n";
}

}  // namespace respalloc::cli
