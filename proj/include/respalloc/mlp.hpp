#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "respalloc/dynamics.hpp"

namespace respalloc {

struct MlpShape {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_width = 16;
  int hidden_layers = 3;  // 0 gives an affine map

  std::size_t parameter_count() const;
  bool operator==(const MlpShape&) const = default;
};

/// Fully connected tanh network with a linear output head. Parameters are
/// stored flat, layer by layer, each as a row-major weight matrix followed
/// by its bias.
class Mlp {
 public:
  /// Activations kept by forward() for the backward pass.
  struct Tape {
    std::vector<Vec> activations;  // input followed by each hidden layer output
  };

  explicit Mlp(MlpShape shape);

  const MlpShape& shape() const { return shape_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(std::mt19937_64& rng);

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, Tape& tape) const;

  /// Reverse pass for the scalar seed^T output: adds its parameter gradient
  /// into `grad` and returns the input gradient.
  Vec backward(const Tape& tape, const Vec& seed, std::span<double> grad) const;

 private:
  struct Layer {
    int in;
    int out;
    std::size_t offset;  // start of the weight block
  };

  MlpShape shape_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

}  // namespace respalloc
