#include "respalloc/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace respalloc {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::constant: return "constant";
    case ModelKind::mlp: return "mlp";
    case ModelKind::symmetric: return "symmetric";
    case ModelKind::relative_symmetric: return "relative_symmetric";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "constant") return ModelKind::constant;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "symmetric") return ModelKind::symmetric;
  if (name == "relative_symmetric" || name == "relative-symmetric")
    return ModelKind::relative_symmetric;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

Vec Standardizer::apply(const Vec& x) const {
  if (empty()) return x;
  if (offset.size() != x.size() || scale.size() != x.size())
    throw std::invalid_argument("standardizer length differs from context");
  return ((x - offset).array() / scale.array()).matrix();
}

Vec softmax(const Vec& logits) {
  const double top = logits.maxCoeff();
  Vec e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

Vec softmax_vjp(const Vec& p, const Vec& v) {
  return p.cwiseProduct((v.array() - p.dot(v)).matrix());
}

namespace {

void check_context(const Vec& context, int expected) {
  if (context.size() != expected)
    throw std::invalid_argument("context has length " + std::to_string(context.size()) +
                                ", model expects " + std::to_string(expected));
}

// orderings[n][i] lists every agent ordering of n agents whose first slot is i.
using OrderingTable = std::vector<std::vector<std::vector<int>>>;

const OrderingTable& orderings_for(int n) {
  static const std::array<OrderingTable, kMaxSymmetricAgents + 1> tables = [] {
    std::array<OrderingTable, kMaxSymmetricAgents + 1> all;
    for (int m = 1; m <= kMaxSymmetricAgents; ++m) {
      all[m].resize(m);
      for (int i = 0; i < m; ++i) {
        std::vector<int> rest;
        for (int j = 0; j < m; ++j)
          if (j != i) rest.push_back(j);
        do {
          std::vector<int> order{i};
          order.insert(order.end(), rest.begin(), rest.end());
          all[m][i].push_back(std::move(order));
        } while (std::next_permutation(rest.begin(), rest.end()));
      }
    }
    return all;
  }();
  return tables.at(n);
}

Mlp make_net(int in, int out, int width, int layers) {
  return Mlp(MlpShape{in, out, width, layers});
}

}  // namespace

// ---------------------------------------------------------------------------

ConstantGamma::ConstantGamma(int n_agents) : logits_(n_agents, 0.0) {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
}

Vec ConstantGamma::gamma(const Vec&) const {
  return softmax(Eigen::Map<const Vec>(logits_.data(), n_agents()));
}

Vec ConstantGamma::gamma_vjp(const Vec& context, const Vec& dgamma) const {
  return softmax_vjp(gamma(context), dgamma);
}

// ---------------------------------------------------------------------------

MlpGamma::MlpGamma(int n_agents, int context_dim, int hidden_width, int hidden_layers)
    : net_(make_net(context_dim, n_agents, hidden_width, hidden_layers)) {}

Vec MlpGamma::gamma(const Vec& context) const {
  check_context(context, context_dim());
  return softmax(net_.forward(standardizer.apply(context)));
}

Vec MlpGamma::gamma_vjp(const Vec& context, const Vec& dgamma) const {
  check_context(context, context_dim());
  Mlp::Tape tape;
  const Vec p = softmax(net_.forward(standardizer.apply(context), tape));
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(net_.parameters().size()));
  net_.backward(tape, softmax_vjp(p, dgamma), {grad.data(), static_cast<std::size_t>(grad.size())});
  return grad;
}

// ---------------------------------------------------------------------------

SymmetricGammaN::SymmetricGammaN(int n_agents, int agent_dim, int hidden_width,
                                 int hidden_layers)
    : n_agents_(n_agents),
      agent_dim_(agent_dim),
      base_(make_net(n_agents * agent_dim, 1, hidden_width, hidden_layers)) {
  if (n_agents < 2 || n_agents > kMaxSymmetricAgents)
    throw std::invalid_argument("symmetric construction supports 2.." +
                                std::to_string(kMaxSymmetricAgents) + " agents, got " +
                                std::to_string(n_agents));
  if (agent_dim < 1) throw std::invalid_argument("agent_dim must be >= 1");
}

Vec SymmetricGammaN::permuted(const Vec& context, std::span<const int> order) const {
  Vec out(context.size());
  for (int slot = 0; slot < n_agents_; ++slot)
    out.segment(slot * agent_dim_, agent_dim_) = context.segment(order[slot] * agent_dim_, agent_dim_);
  return standardizer.apply(out);
}

Vec SymmetricGammaN::logits(const Vec& context) const {
  const auto& table = orderings_for(n_agents_);
  Vec s = Vec::Zero(n_agents_);
  for (int i = 0; i < n_agents_; ++i)
    for (const auto& order : table[i]) s[i] += base_.forward(permuted(context, order))[0];
  return s;
}

Vec SymmetricGammaN::gamma(const Vec& context) const {
  check_context(context, context_dim());
  return softmax(logits(context));
}

Vec SymmetricGammaN::gamma_vjp(const Vec& context, const Vec& dgamma) const {
  check_context(context, context_dim());
  const Vec dlogits = softmax_vjp(gamma(context), dgamma);
  const auto& table = orderings_for(n_agents_);
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(base_.parameters().size()));
  std::span<double> g{grad.data(), static_cast<std::size_t>(grad.size())};
  Mlp::Tape tape;
  Vec seed(1);
  for (int i = 0; i < n_agents_; ++i) {
    seed[0] = dlogits[i];
    for (const auto& order : table[i]) {
      base_.forward(permuted(context, order), tape);
      base_.backward(tape, seed, g);
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------

RelativeSymmetricGamma::RelativeSymmetricGamma(int context_dim, int hidden_width,
                                               int hidden_layers)
    : base_(make_net(context_dim, 1, hidden_width, hidden_layers)) {}

Vec RelativeSymmetricGamma::gamma(const Vec& context) const {
  check_context(context, context_dim());
  const double d = base_.forward(standardizer.apply(context))[0] -
                   base_.forward(standardizer.apply(-context))[0];
  const double t = std::tanh(d);
  Vec g(2);
  g << 0.5 * (1.0 + t), 0.5 * (1.0 - t);
  return g;
}

Vec RelativeSymmetricGamma::gamma_vjp(const Vec& context, const Vec& dgamma) const {
  check_context(context, context_dim());
  Mlp::Tape plus, minus;
  const double d = base_.forward(standardizer.apply(context), plus)[0] -
                   base_.forward(standardizer.apply(-context), minus)[0];
  const double t = std::tanh(d);
  const double dd = 0.5 * (1.0 - t * t) * (dgamma[0] - dgamma[1]);
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(base_.parameters().size()));
  std::span<double> g{grad.data(), static_cast<std::size_t>(grad.size())};
  Vec seed(1);
  seed[0] = dd;
  base_.backward(plus, seed, g);
  seed[0] = -dd;
  base_.backward(minus, seed, g);
  return grad;
}

// ---------------------------------------------------------------------------

ResponsibilityModel::ResponsibilityModel(Impl impl, std::uint64_t seed)
    : impl_(std::move(impl)), seed_(seed) {}

ModelKind ResponsibilityModel::kind() const {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantGamma>) return ModelKind::constant;
        else if constexpr (std::is_same_v<T, MlpGamma>) return ModelKind::mlp;
        else if constexpr (std::is_same_v<T, SymmetricGammaN>) return ModelKind::symmetric;
        else return ModelKind::relative_symmetric;
      },
      impl_);
}

int ResponsibilityModel::n_agents() const {
  return std::visit([](const auto& m) { return m.n_agents(); }, impl_);
}

int ResponsibilityModel::context_dim() const {
  return std::visit(
      [](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ConstantGamma>) return 0;
        else return m.context_dim();
      },
      impl_);
}

std::span<const double> ResponsibilityModel::parameters() const {
  return std::visit(
      [](const auto& m) -> std::span<const double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantGamma>) return m.parameters();
        else if constexpr (std::is_same_v<T, MlpGamma>) return m.net().parameters();
        else return m.base().parameters();
      },
      impl_);
}

std::span<double> ResponsibilityModel::parameters() {
  return std::visit(
      [](auto& m) -> std::span<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantGamma>) return m.parameters();
        else if constexpr (std::is_same_v<T, MlpGamma>) return m.net().parameters();
        else return m.base().parameters();
      },
      impl_);
}

const Standardizer* ResponsibilityModel::standardizer() const {
  return std::visit(
      [](const auto& m) -> const Standardizer* {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ConstantGamma>) return nullptr;
        else return &m.standardizer;
      },
      impl_);
}

MlpShape ResponsibilityModel::network_shape() const {
  return std::visit(
      [](const auto& m) -> MlpShape {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantGamma>) return MlpShape{1, 1, 0, 0};
        else if constexpr (std::is_same_v<T, MlpGamma>) return m.net().shape();
        else return m.base().shape();
      },
      impl_);
}

Vec ResponsibilityModel::gamma(const Vec& context) const {
  return std::visit([&](const auto& m) { return m.gamma(context); }, impl_);
}

Vec ResponsibilityModel::gamma_vjp(const Vec& context, const Vec& dgamma) const {
  if (dgamma.size() != n_agents()) throw std::invalid_argument("dgamma has wrong length");
  return std::visit([&](const auto& m) { return m.gamma_vjp(context, dgamma); }, impl_);
}

Mat ResponsibilityModel::gamma_jacobian(const Vec& context) const {
  const int n = n_agents();
  Mat jac(n, static_cast<Eigen::Index>(parameter_count()));
  for (int i = 0; i < n; ++i) jac.row(i) = gamma_vjp(context, Vec::Unit(n, i)).transpose();
  return jac;
}

ResponsibilityModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (spec.kind) {
    case ModelKind::constant:
      return ResponsibilityModel(ConstantGamma(spec.n_agents), seed);
    case ModelKind::mlp: {
      MlpGamma m(spec.n_agents, spec.context_dim, spec.hidden_width, spec.hidden_layers);
      m.net().init_uniform(rng);
      m.standardizer = spec.standardizer;
      return ResponsibilityModel(std::move(m), seed);
    }
    case ModelKind::symmetric: {
      if (spec.n_agents < 2 || spec.context_dim % spec.n_agents != 0)
        throw std::invalid_argument("symmetric model: context_dim must be a multiple of n_agents");
      SymmetricGammaN m(spec.n_agents, spec.context_dim / spec.n_agents, spec.hidden_width,
                        spec.hidden_layers);
      m.base().init_uniform(rng);
      m.standardizer = spec.standardizer;
      return ResponsibilityModel(std::move(m), seed);
    }
    case ModelKind::relative_symmetric: {
      if (spec.n_agents != 2)
        throw std::invalid_argument("relative-symmetric model is defined for two agents");
      RelativeSymmetricGamma m(spec.context_dim, spec.hidden_width, spec.hidden_layers);
      m.base().init_uniform(rng);
      m.standardizer = spec.standardizer;
      return ResponsibilityModel(std::move(m), seed);
    }
  }
  throw std::invalid_argument("unknown model kind");
}

}  // namespace respalloc
