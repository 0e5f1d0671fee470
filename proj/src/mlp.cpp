#include "respalloc/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace respalloc {

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::size_t MlpShape::parameter_count() const {
  std::size_t count = 0;
  int in = input_dim;
  for (int l = 0; l < hidden_layers; ++l) {
    count += static_cast<std::size_t>(in) * hidden_width + hidden_width;
    in = hidden_width;
  }
  return count + static_cast<std::size_t>(in) * output_dim + output_dim;
}

Mlp::Mlp(MlpShape shape) : shape_(shape) {
  if (shape.input_dim < 1 || shape.output_dim < 1 || shape.hidden_layers < 0 ||
      (shape.hidden_layers > 0 && shape.hidden_width < 1))
    throw std::invalid_argument("invalid MLP shape");
  std::size_t offset = 0;
  int in = shape.input_dim;
  for (int l = 0; l <= shape.hidden_layers; ++l) {
    const int out = l == shape.hidden_layers ? shape.output_dim : shape.hidden_width;
    layers_.push_back({in, out, offset});
    offset += static_cast<std::size_t>(in) * out + out;
    in = out;
  }
  params_.assign(offset, 0.0);
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (const Layer& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(layer.in) * layer.out + layer.out;
    for (std::size_t k = 0; k < n; ++k) params_[layer.offset + k] = dist(rng);
  }
}

Vec Mlp::forward(const Vec& x) const {
  Tape tape;
  return forward(x, tape);
}

Vec Mlp::forward(const Vec& x, Tape& tape) const {
  if (x.size() != shape_.input_dim) throw std::invalid_argument("MLP input has wrong length");
  tape.activations.clear();
  tape.activations.push_back(x);
  Vec h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Eigen::Map<const RowMajorMat> w(params_.data() + layer.offset, layer.out, layer.in);
    Eigen::Map<const Vec> b(params_.data() + layer.offset + layer.in * layer.out, layer.out);
    Vec z = w * h + b;
    if (l + 1 < layers_.size()) {
      h = z.array().tanh().matrix();
      tape.activations.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Vec Mlp::backward(const Tape& tape, const Vec& seed, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size");
  if (seed.size() != shape_.output_dim) throw std::invalid_argument("seed has wrong length");
  Vec delta = seed;  // d/dz of the current layer's pre-activation
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Vec& input = tape.activations[l];
    Eigen::Map<const RowMajorMat> w(params_.data() + layer.offset, layer.out, layer.in);
    Eigen::Map<RowMajorMat> gw(grad.data() + layer.offset, layer.out, layer.in);
    Eigen::Map<Vec> gb(grad.data() + layer.offset + layer.in * layer.out, layer.out);
    gw.noalias() += delta * input.transpose();
    gb += delta;
    Vec back = w.transpose() * delta;
    if (l > 0) back.array() *= 1.0 - input.array().square();  // tanh'
    delta = std::move(back);
  }
  return delta;
}

}  // namespace respalloc
