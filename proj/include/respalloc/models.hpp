#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "respalloc/dynamics.hpp"
#include "respalloc/mlp.hpp"

namespace respalloc {

/// Largest agent count accepted by the permutation-sum construction, whose
/// cost grows as N * (N - 1)!.
inline constexpr int kMaxSymmetricAgents = 6;

enum class ModelKind { constant, mlp, symmetric, relative_symmetric };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// Affine input normalization (x - offset) / scale applied before a network.
/// Empty means identity.
struct Standardizer {
  Vec offset;
  Vec scale;

  bool empty() const { return offset.size() == 0; }
  Vec apply(const Vec& x) const;
};

Vec softmax(const Vec& logits);
/// J^T v for the softmax Jacobian at probabilities p.
Vec softmax_vjp(const Vec& p, const Vec& v);

/// gamma = softmax(logits); the context is ignored.
class ConstantGamma {
 public:
  explicit ConstantGamma(int n_agents);

  int n_agents() const { return static_cast<int>(logits_.size()); }
  std::span<const double> parameters() const { return {logits_.data(), logits_.size()}; }
  std::span<double> parameters() { return {logits_.data(), logits_.size()}; }

  Vec gamma(const Vec& context) const;
  Vec gamma_vjp(const Vec& context, const Vec& dgamma) const;

 private:
  std::vector<double> logits_;
};

/// gamma = softmax(h(x)) with h an MLP producing one logit per agent.
class MlpGamma {
 public:
  MlpGamma(int n_agents, int context_dim, int hidden_width = 16, int hidden_layers = 3);

  int n_agents() const { return net_.shape().output_dim; }
  int context_dim() const { return net_.shape().input_dim; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  Standardizer standardizer;

  Vec gamma(const Vec& context) const;
  Vec gamma_vjp(const Vec& context, const Vec& dgamma) const;

 private:
  Mlp net_;
};

/// Permutation-symmetric allocation for N agents over the joint state
/// x = (x_1, ..., x_N):
///   phi(x)    = sum over orderings of agents 2..N of base(permuted x)
///   gamma_i   = softmax_i( phi(x with agent i moved to slot 1) ).
/// gamma_i is invariant to relabeling the other agents, gamma_i(x) equals
/// gamma_j of x with i and j swapped, and the entries sum to one.
class SymmetricGammaN {
 public:
  SymmetricGammaN(int n_agents, int agent_dim, int hidden_width = 16, int hidden_layers = 3);

  int n_agents() const { return n_agents_; }
  int agent_dim() const { return agent_dim_; }
  int context_dim() const { return n_agents_ * agent_dim_; }
  const Mlp& base() const { return base_; }
  Mlp& base() { return base_; }
  Standardizer standardizer;

  Vec gamma(const Vec& context) const;
  Vec gamma_vjp(const Vec& context, const Vec& dgamma) const;

 private:
  Vec logits(const Vec& context) const;
  Vec permuted(const Vec& context, std::span<const int> order) const;

  int n_agents_;
  int agent_dim_;
  Mlp base_;
};

/// Two-agent allocation over a relative state r = x_2 - x_1:
///   gamma_1(r) = (1 + tanh(phi(r) - phi(-r))) / 2,  gamma_2 = gamma_1(-r).
class RelativeSymmetricGamma {
 public:
  explicit RelativeSymmetricGamma(int context_dim, int hidden_width = 16,
                                  int hidden_layers = 3);

  int n_agents() const { return 2; }
  int context_dim() const { return base_.shape().input_dim; }
  const Mlp& base() const { return base_; }
  Mlp& base() { return base_; }
  Standardizer standardizer;

  Vec gamma(const Vec& context) const;
  Vec gamma_vjp(const Vec& context, const Vec& dgamma) const;

 private:
  Mlp base_;
};

struct ModelSpec {
  ModelKind kind = ModelKind::constant;
  int n_agents = 2;
  int context_dim = 1;  // joint state length for symmetric models
  int hidden_width = 16;
  int hidden_layers = 3;
  Standardizer standardizer;
};

/// Value-semantic wrapper over the four parameterizations.
class ResponsibilityModel {
 public:
  using Impl = std::variant<ConstantGamma, MlpGamma, SymmetricGammaN, RelativeSymmetricGamma>;

  ResponsibilityModel(Impl impl, std::uint64_t seed);

  ModelKind kind() const;
  int n_agents() const;
  /// Expected context length; 0 for constant models, which ignore context.
  int context_dim() const;
  std::uint64_t seed() const { return seed_; }

  std::span<const double> parameters() const;
  std::span<double> parameters();
  std::size_t parameter_count() const { return parameters().size(); }

  const Standardizer* standardizer() const;
  /// Hidden-layer configuration of the network, if any.
  MlpShape network_shape() const;

  Vec gamma(const Vec& context) const;
  /// Gradient of dgamma^T gamma(context) with respect to the flat parameters.
  Vec gamma_vjp(const Vec& context, const Vec& dgamma) const;
  /// Full Jacobian d gamma / d theta, shape n_agents x parameter_count.
  Mat gamma_jacobian(const Vec& context) const;

  const Impl& impl() const { return impl_; }
  Impl& impl() { return impl_; }

 private:
  Impl impl_;
  std::uint64_t seed_;
};

/// Seed-reproducible construction. Constant models start at uniform gamma;
/// networks use the 1/sqrt(fan_in) uniform initialization.
ResponsibilityModel init_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace respalloc
