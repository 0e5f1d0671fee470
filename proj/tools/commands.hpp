#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace respalloc::cli {

/// Bad flags, missing inputs, or inconsistent files. Exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric or training failure after inputs were accepted. Exit status 3.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  std::string scenario = "synthetic-2agent";
  int n = 128;
  std::vector<double> gamma;     // gamma_1 for two agents, or all entries; empty draws from the simplex
  std::vector<double> schedule;  // two agents: piecewise-constant gamma_1 levels over the samples
  std::optional<double> noise;   // variance; scenario default when unset
  std::uint64_t seed = 0;
  int count = 20;                // weaving trajectories
  double duration = 15.0;
  double dt = 0.1;
  double truth_gain = 0.5;
  std::vector<std::string> augment;
  std::string out;
  std::string csv;
  std::string truth_out;  // checkpoint of the generating allocation (constant gamma or weaving truth)
};

struct TrainOptions {
  std::string data;
  std::string model = "constant";
  int hidden_width = 16;
  int hidden_layers = 3;
  int epochs = 3000;
  int batch_size = 16;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string metric = "huber";
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;
  double divergence = 1e6;
  std::optional<double> beta1;
  std::optional<double> beta2;
  std::vector<std::string> augment;
  bool standardize = false;
  int snapshot_every = -1;  // negative: a tenth of the epochs for network models
  std::string checkpoint;
  std::string report;
  std::string loss_csv;
};

struct LandscapeOptions {
  std::string checkpoint;
  std::string x_axis;  // empty: first context axis
  std::string y_axis;  // empty: second context axis
  std::vector<double> x_range{-5.0, 5.0};
  std::vector<double> y_range{-5.0, 5.0};
  int resolution = 50;
  std::vector<std::string> fix;  // name=value for the remaining context axes
  std::vector<double> anchor;    // joint state supplying what the context leaves open
  std::vector<double> desired;   // stacked desired controls for scenes without a policy
  bool negate = false;           // evaluate at the negated context, rows keep grid labels
  std::string out;
};

struct TraceOptions {
  std::string checkpoint;
  std::string data;
  int trajectory = -1;  // negative: the first trajectory in the file
  std::string out;
};

struct BenchOptions {
  std::string scenario = "synthetic-6agent";
  std::string model = "constant";
  int min_batch = 8;
  int max_batch = 512;
  int repeats = 9;
  int threads = 1;
  std::uint64_t seed = 0;
  std::string out;
};

nlohmann::json to_json(const GenerateOptions& o);
nlohmann::json to_json(const TrainOptions& o);
nlohmann::json to_json(const LandscapeOptions& o);
nlohmann::json to_json(const TraceOptions& o);
nlohmann::json to_json(const BenchOptions& o);

void run_generate(const GenerateOptions& o, std::ostream& log);
void run_train(const TrainOptions& o, std::ostream& log);
void run_landscape(const LandscapeOptions& o, std::ostream& log);
void run_trace(const TraceOptions& o, std::ostream& log);
void run_bench(const BenchOptions& o, std::ostream& log);

}  // namespace respalloc::cli
