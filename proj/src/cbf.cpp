#include "respalloc/cbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace respalloc {

ClassKappaLinear::ClassKappaLinear(double k) : gain(k) {
  if (!(k > 0.0)) throw std::invalid_argument("class-K gain must be positive");
}

PositionLayout PositionLayout::single_integrator_1d(int n_agents) {
  return PositionLayout{n_agents, 1, 1, 0};
}

PositionLayout PositionLayout::double_integrator(int n_agents, int spatial_dim) {
  return PositionLayout{n_agents, spatial_dim, 2 * spatial_dim, 0};
}

namespace {

struct PairTerm {
  int i;
  int j;
};

std::vector<PairTerm> all_pairs(int n) {
  std::vector<PairTerm> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
  return pairs;
}

// Pair barrier ||p_i - p_j||^2 - m^2 with its gradient and (constant) Hessian.
double pair_value(const PositionLayout& l, const Vec& x, PairTerm p, double m2) {
  double s = 0.0;
  for (int d = 0; d < l.pos_dim; ++d) {
    const double diff = x[l.index(p.i, d)] - x[l.index(p.j, d)];
    s += diff * diff;
  }
  return s - m2;
}

Vec pair_gradient(const PositionLayout& l, const Vec& x, PairTerm p) {
  Vec g = Vec::Zero(x.size());
  for (int d = 0; d < l.pos_dim; ++d) {
    const double diff = x[l.index(p.i, d)] - x[l.index(p.j, d)];
    g[l.index(p.i, d)] = 2.0 * diff;
    g[l.index(p.j, d)] = -2.0 * diff;
  }
  return g;
}

Mat pair_hessian(const PositionLayout& l, Eigen::Index n, PairTerm p) {
  Mat h = Mat::Zero(n, n);
  for (int d = 0; d < l.pos_dim; ++d) {
    const int a = l.index(p.i, d);
    const int b = l.index(p.j, d);
    h(a, a) = 2.0;
    h(b, b) = 2.0;
    h(a, b) = -2.0;
    h(b, a) = -2.0;
  }
  return h;
}

void check_layout(const PositionLayout& l) {
  if (l.n_agents < 2) throw std::invalid_argument("pairwise barrier needs >= 2 agents");
  if (l.pos_dim < 1 || l.stride < l.pos_dim || l.offset < 0)
    throw std::invalid_argument("invalid position layout");
}

// Soft-min weights w_ij = softmax(-T b_ij), shifted for stability.
Vec softmin_weights(const Vec& values, double temperature) {
  const double lo = values.minCoeff();
  Vec w = (-temperature * (values.array() - lo)).exp().matrix();
  return w / w.sum();
}

}  // namespace

Barrier make_pairwise_distance_barrier(double margin, PositionLayout layout,
                                       double temperature) {
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  check_layout(layout);
  const double m2 = margin * margin;
  const auto pairs = all_pairs(layout.n_agents);

  auto values = [layout, pairs, m2](const Vec& x) {
    Vec v(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) v[k] = pair_value(layout, x, pairs[k], m2);
    return v;
  };

  Barrier b;
  b.name = "pairwise_distance";
  b.value = [values, temperature](const Vec& x) {
    const Vec v = values(x);
    if (v.size() == 1) return v[0];
    const double lo = v.minCoeff();
    return lo - std::log((-temperature * (v.array() - lo)).exp().sum()) / temperature;
  };
  b.gradient = [values, layout, pairs, temperature](const Vec& x) {
    const Vec w = softmin_weights(values(x), temperature);
    Vec g = Vec::Zero(x.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) g += w[k] * pair_gradient(layout, x, pairs[k]);
    return g;
  };
  b.hessian = [values, layout, pairs, temperature](const Vec& x) {
    const Vec w = softmin_weights(values(x), temperature);
    const auto n = x.size();
    Mat h = Mat::Zero(n, n);
    Vec mean_grad = Vec::Zero(n);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Vec gk = pair_gradient(layout, x, pairs[k]);
      h += w[k] * (pair_hessian(layout, n, pairs[k]) - temperature * gk * gk.transpose());
      mean_grad += w[k] * gk;
    }
    h += temperature * mean_grad * mean_grad.transpose();
    return h;
  };
  return b;
}

Barrier make_pairwise_distance_barrier_hardmin(double margin, PositionLayout layout) {
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  check_layout(layout);
  const double m2 = margin * margin;
  const auto pairs = all_pairs(layout.n_agents);

  auto closest = [layout, pairs, m2](const Vec& x) {
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double v = pair_value(layout, x, pairs[k], m2);
      if (v < best_v) {
        best_v = v;
        best = k;
      }
    }
    return std::pair{pairs[best], best_v};
  };

  Barrier b;
  b.name = "pairwise_distance_hardmin";
  b.value = [closest](const Vec& x) { return closest(x).second; };
  b.gradient = [closest, layout](const Vec& x) {
    return pair_gradient(layout, x, closest(x).first);
  };
  b.hessian = [closest, layout](const Vec& x) {
    return pair_hessian(layout, x.size(), closest(x).first);
  };
  return b;
}

Barrier make_ellipse_barrier(double a1, double a2, int state_dim) {
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw std::invalid_argument("ellipse axes must be positive");
  if (state_dim < 2) throw std::invalid_argument("ellipse barrier needs state_dim >= 2");
  const double w1 = 1.0 / (a1 * a1);
  const double w2 = 1.0 / (a2 * a2);
  Barrier b;
  b.name = "ellipse";
  b.value = [w1, w2](const Vec& r) { return w1 * r[0] * r[0] + w2 * r[1] * r[1] - 1.0; };
  b.gradient = [w1, w2, state_dim](const Vec& r) {
    Vec g = Vec::Zero(state_dim);
    g[0] = 2.0 * w1 * r[0];
    g[1] = 2.0 * w2 * r[1];
    return g;
  };
  b.hessian = [w1, w2, state_dim](const Vec&) {
    Mat h = Mat::Zero(state_dim, state_dim);
    h(0, 0) = 2.0 * w1;
    h(1, 1) = 2.0 * w2;
    return h;
  };
  return b;
}

namespace {

double rel_error(const Vec& a, const Vec& b) {
  const double scale = std::max({1.0, a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()});
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace

BarrierCheck check_barrier_derivatives(const Barrier& barrier, std::span<const Vec> probes,
                                       double step) {
  BarrierCheck out;
  for (const Vec& x : probes) {
    const auto n = x.size();
    Vec fd_grad(n);
    Mat fd_hess(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      Vec xp = x, xm = x;
      xp[k] += step;
      xm[k] -= step;
      fd_grad[k] = (barrier.value(xp) - barrier.value(xm)) / (2.0 * step);
      if (barrier.has_hessian())
        fd_hess.col(k) = (barrier.gradient(xp) - barrier.gradient(xm)) / (2.0 * step);
    }
    out.gradient_error = std::max(out.gradient_error, rel_error(barrier.gradient(x), fd_grad));
    if (barrier.has_hessian()) {
      const Mat h = barrier.hessian(x);
      const Eigen::Map<const Vec> hv(h.data(), h.size());
      const Eigen::Map<const Vec> fv(fd_hess.data(), fd_hess.size());
      out.hessian_error = std::max(out.hessian_error, rel_error(hv, fv));
    }
  }
  return out;
}

Barrier make_validated_barrier(std::string name, std::function<double(const Vec&)> value,
                               std::function<Vec(const Vec&)> gradient,
                               std::function<Mat(const Vec&)> hessian,
                               std::span<const Vec> probes, double rel_tol) {
  if (!value || !gradient) throw std::invalid_argument("barrier needs value and gradient");
  if (probes.empty()) throw std::invalid_argument("barrier validation needs probe states");
  Barrier b{std::move(name), std::move(value), std::move(gradient), std::move(hessian)};
  const BarrierCheck check = check_barrier_derivatives(b, probes);
  if (!(check.gradient_error <= rel_tol))
    throw BarrierValidationError(b.name + ": gradient disagrees with finite differences (rel " +
                                 std::to_string(check.gradient_error) + ")");
  if (b.has_hessian() && !(check.hessian_error <= rel_tol))
    throw BarrierValidationError(b.name + ": Hessian disagrees with finite differences (rel " +
                                 std::to_string(check.hessian_error) + ")");
  return b;
}

Vec CbfLinearConstraint::stacked() const {
  Eigen::Index n = 0;
  for (const auto& a : coefficients) n += a.size();
  Vec out(n);
  Eigen::Index at = 0;
  for (const auto& a : coefficients) {
    out.segment(at, a.size()) = a;
    at += a.size();
  }
  return out;
}

double CbfLinearConstraint::evaluate(const Vec& u) const {
  return stacked().dot(u) + offset;
}

CbfLinearConstraint assemble_constraint(const ControlAffineSystem& system,
                                        const Barrier& barrier, const AlphaChain& alpha,
                                        const Vec& x) {
  const int degree = system.relative_degree();
  if (static_cast<int>(alpha.size()) != degree)
    throw ConstraintAssemblyError("alpha chain needs " + std::to_string(degree) +
                                  " class-K function(s) for this system");
  const Vec f = system.drift(x);
  const double b = barrier.value(x);
  const Vec grad = barrier.gradient(x);

  CbfLinearConstraint out;
  out.coefficients.reserve(system.n_agents());

  if (degree == 1) {
    for (int i = 0; i < system.n_agents(); ++i)
      out.coefficients.push_back(system.actuation(x, i).transpose() * grad);
    out.offset = grad.dot(f) + alpha[0](b);
    return out;
  }

  if (!barrier.has_hessian())
    throw ConstraintAssemblyError(barrier.name + ": relative-degree-2 assembly needs a Hessian");
  const double k1 = alpha[0].gain;
  const double k2 = alpha[1].gain;
  const double lf_b = grad.dot(f);
  const Vec grad_lf_b = barrier.hessian(x) * f + system.drift_jacobian(x).transpose() * grad;
  for (int i = 0; i < system.n_agents(); ++i)
    out.coefficients.push_back(system.actuation(x, i).transpose() * grad_lf_b);
  out.offset = grad_lf_b.dot(f) + (k1 + k2) * lf_b + k1 * k2 * b;
  return out;
}

}  // namespace respalloc
