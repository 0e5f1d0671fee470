#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the active-set solver or the analytic derivatives it is
// meant to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Central differences of a vector-valued function, one column per input.
inline Mat jacobian_fd(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

inline Vec gradient_fd(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(|b|_inf, floor)
inline double rel_error(const Mat& a, const Mat& b, double floor = 1e-8) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Two scalar controls, one CBF row a1 u1 + a2 u2 + c >= -eps, box [lo, hi].
struct Scalar2Qp {
  double gamma1, gamma2, beta1, beta2;
  double d1, d2;  // desired
  double a1, a2, c;
  double lo, hi;

  // Slack eliminated in closed form: for fixed u the best eps is
  // max(0, -(a^T u + c)), which keeps the reduced objective convex.
  double reduced(double u1, double u2) const {
    const double eps = std::max(0.0, -(a1 * u1 + a2 * u2 + c));
    return gamma1 * (u1 - d1) * (u1 - d1) + beta1 * u1 * u1 + gamma2 * (u2 - d2) * (u2 - d2) +
           beta1 * u2 * u2 + beta2 * eps * eps;
  }
};

/// min over u2 in the box of qp.reduced(u1, u2). The reduced objective is a
/// convex piecewise quadratic in u2 with one kink, so its minimizer is among
/// the two piece stationary points, the kink, and the box ends.
inline double best_u2(const Scalar2Qp& qp, double u1) {
  const double k = qp.a1 * u1 + qp.c;
  std::vector<double> candidates{qp.lo, qp.hi};
  const double den_a = qp.gamma2 + qp.beta1;
  if (den_a > 0) candidates.push_back(qp.gamma2 * qp.d2 / den_a);
  const double den_b = qp.gamma2 + qp.beta1 + qp.beta2 * qp.a2 * qp.a2;
  if (den_b > 0) candidates.push_back((qp.gamma2 * qp.d2 - qp.beta2 * qp.a2 * k) / den_b);
  if (qp.a2 != 0) candidates.push_back(-k / qp.a2);
  double best = 0.0, best_value = std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    c = std::clamp(c, qp.lo, qp.hi);
    const double v = qp.reduced(u1, c);
    if (v < best_value) {
      best_value = v;
      best = c;
    }
  }
  return best;
}

/// Grid search over u1 on the profile min_{u2} reduced(u1, u2), refined
/// coarse-to-fine down to `resolution`. The profile of a jointly convex
/// function is convex, so the minimizer stays within one cell of the grid
/// argmin at every level.
inline double profile_search(const Scalar2Qp& qp, double resolution) {
  double lo = qp.lo, hi = qp.hi, best1 = 0.0;
  const int n = 200;
  for (;;) {
    const double h = (hi - lo) / n;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double u1 = lo + i * h;
      const double v = qp.reduced(u1, best_u2(qp, u1));
      if (v < best) {
        best = v;
        best1 = u1;
      }
    }
    if (h <= resolution) return best1;
    lo = std::max(qp.lo, best1 - 2 * h);
    hi = std::min(qp.hi, best1 + 2 * h);
  }
}

/// Each coordinate comes from a grid along its own axis, so both are
/// within `resolution` of the minimizer. Returns (u1, u2).
inline std::pair<double, double> grid_search(const Scalar2Qp& qp, double resolution = 1e-3) {
  const Scalar2Qp swapped{qp.gamma2, qp.gamma1, qp.beta1, qp.beta2, qp.d2, qp.d1,
                          qp.a2,     qp.a1,     qp.c,     qp.lo,    qp.hi};
  return {profile_search(qp, resolution), profile_search(swapped, resolution)};
}

/// Uniform point on the probability simplex (Dirichlet(1, ..., 1)).
inline Vec random_simplex(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Vec g(n);
  for (int i = 0; i < n; ++i) g[i] = e(rng);
  return g / g.sum();
}

inline Vec random_vec(int n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace oracle
