// respalloc: generate data, train allocation models, and export landscapes,
// traces and timings as plot-ready tables.
//
// Exit status: 0 success, 2 usage or validation error, 3 runtime failure.

#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"
#include "json_config.hpp"
#include "respalloc/checkpoint.hpp"
#include "respalloc/trajectory_io.hpp"
#include "respalloc/training.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace respalloc::cli;

  CLI::App app{"Responsibility allocation learning for multi-agent safety filters", "respalloc"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of per-subcommand defaults, e.g. {\"train\": {\"epochs\": 200}}");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic or weaving dataset");
  g->add_option("--scenario", gen.scenario,
                "synthetic-2agent, synthetic-6agent, weaving[-single|-side-by-side|-rear-overtake|-mixed]");
  g->add_option("--n", gen.n, "Synthetic sample count")->check(CLI::PositiveNumber);
  g->add_option("--gamma", gen.gamma, "Constant allocation: gamma_1 for two agents or all entries");
  g->add_option("--schedule", gen.schedule, "Two agents: gamma_1 levels of a piecewise-constant schedule");
  g->add_option("--noise", gen.noise, "Control noise variance")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed);
  g->add_option("--count", gen.count, "Weaving trajectory count")->check(CLI::PositiveNumber);
  g->add_option("--duration", gen.duration, "Weaving trajectory length [s]")->check(CLI::PositiveNumber);
  g->add_option("--dt", gen.dt, "Weaving time step [s]")->check(CLI::PositiveNumber);
  g->add_option("--truth-gain", gen.truth_gain, "Weaving ground truth: gamma_1 = (1 + tanh(-gain * rdot_lon)) / 2");
  g->add_option("--augment", gen.augment, "Augmentations to apply: A1 (mirror lateral), A2 (swap agents)");
  g->add_option("--out", gen.out, "Dataset file (NDJSON)")->required();
  g->add_option("--csv", gen.csv, "Also write a flat CSV copy");
  g->add_option("--truth-out", gen.truth_out, "Write the generating allocation as a checkpoint");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Fit an allocation model to a dataset");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--model", tr.model, "constant, mlp, symmetric, relative-symmetric");
  t->add_option("--hidden-width", tr.hidden_width)->check(CLI::PositiveNumber);
  t->add_option("--hidden-layers", tr.hidden_layers)->check(CLI::NonNegativeNumber);
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr, "Learning rate")->check(CLI::PositiveNumber);
  t->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"sgd", "adam"}));
  t->add_option("--metric", tr.metric)->check(CLI::IsMember({"huber", "l2", "l1"}));
  t->add_option("--huber-delta", tr.huber_delta)->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed);
  t->add_option("--threads", tr.threads)->check(CLI::PositiveNumber);
  t->add_option("--divergence", tr.divergence, "Abort when the epoch loss exceeds this");
  t->add_option("--beta1", tr.beta1, "Override the control regularization weight")->check(CLI::NonNegativeNumber);
  t->add_option("--beta2", tr.beta2, "Override the slack penalty")->check(CLI::PositiveNumber);
  t->add_option("--augment", tr.augment, "Augmentations applied before training: A1, A2");
  t->add_flag("--standardize", tr.standardize, "Scale network inputs by the data standard deviation");
  t->add_option("--snapshot-every", tr.snapshot_every, "Landscape snapshot period in epochs");
  t->add_option("--checkpoint", tr.checkpoint, "Model checkpoint to write")->required();
  t->add_option("--report", tr.report, "Training report (JSON)");
  t->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss table");

  LandscapeOptions la;
  auto* l = app.add_subcommand("landscape", "Evaluate gamma_1 on a grid over two context axes");
  l->add_option("--checkpoint", la.checkpoint)->required();
  l->add_option("--x-axis", la.x_axis);
  l->add_option("--y-axis", la.y_axis);
  l->add_option("--x-range", la.x_range)->expected(2);
  l->add_option("--y-range", la.y_range)->expected(2);
  l->add_option("--resolution", la.resolution, "Grid points per axis");
  l->add_option("--fix", la.fix, "name=value for other context axes (default 0)");
  l->add_option("--anchor", la.anchor, "Joint state supplying coordinates the context leaves open");
  l->add_option("--desired", la.desired, "Stacked desired controls (scenes without a policy)");
  l->add_flag("--negate", la.negate, "Evaluate at the negated context");
  l->add_option("--out", la.out, "CSV grid")->required();

  TraceOptions tc;
  auto* c = app.add_subcommand("trace", "Per-step gamma and controls along one trajectory");
  c->add_option("--checkpoint", tc.checkpoint)->required();
  c->add_option("--data", tc.data, "Trajectory file")->required();
  c->add_option("--trajectory", tc.trajectory, "Trajectory id (default: first in file)");
  c->add_option("--out", tc.out, "CSV trace")->required();

  BenchOptions be;
  auto* b = app.add_subcommand("bench", "Time loss and gradient evaluation over doubling batch sizes");
  b->add_option("--scenario", be.scenario);
  b->add_option("--model", be.model);
  b->add_option("--min-batch", be.min_batch);
  b->add_option("--max-batch", be.max_batch);
  b->add_option("--repeats", be.repeats);
  b->add_option("--threads", be.threads)->check(CLI::PositiveNumber);
  b->add_option("--seed", be.seed);
  b->add_option("--out", be.out, "CSV timings")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*g) run_generate(gen, std::cout);
    if (*t) run_train(tr, std::cout);
    if (*l) run_landscape(la, std::cout);
    if (*c) run_trace(tc, std::cout);
    if (*b) run_bench(be, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const respalloc::TrajectoryFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const respalloc::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const respalloc::FilterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == respalloc::FilterError::Kind::invalid ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
