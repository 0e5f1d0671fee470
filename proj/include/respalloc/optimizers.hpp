#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace respalloc {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

/// In-place first-order update of a flat parameter vector.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<double> params, std::span<const double> grad) = 0;
  virtual void reset() = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double learning_rate);
  void step(std::span<double> params, std::span<const double> grad) override;
  void reset() override {}

 private:
  double lr_;
};

/// Bias-corrected Adam.
class Adam final : public Optimizer {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad) override;
  void reset() override;

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double learning_rate);

}  // namespace respalloc
