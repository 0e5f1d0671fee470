#include "respalloc/optimizers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace respalloc {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

namespace {

void check_sizes(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size())
    throw std::invalid_argument("optimizer: gradient has " + std::to_string(grad.size()) +
                                " entries for " + std::to_string(params.size()) + " parameters");
}

}  // namespace

Sgd::Sgd(double learning_rate) : lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

void Sgd::step(std::span<double> params, std::span<const double> grad) {
  check_sizes(params, grad);
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr_ * grad[k];
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0))
    throw std::invalid_argument("invalid Adam hyperparameters");
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  check_sizes(params, grad);
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
    v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double learning_rate) {
  if (kind == OptimizerKind::sgd) return std::make_unique<Sgd>(learning_rate);
  return std::make_unique<Adam>(learning_rate);
}

}  // namespace respalloc
