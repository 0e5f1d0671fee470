#include <doctest.h>

#include <cmath>
#include <random>

#include "respalloc/cbf.hpp"
#include "support/oracles.hpp"

using namespace respalloc;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

// Exact state of a double-integrator system after time t under constant u.
// Works for make_double_integrator(n, d) layouts: blocks (p, v) per agent.
Vec propagate_double_integrator(const Vec& x, const Vec& u, int n, int d, double t) {
  Vec out = x;
  for (int i = 0; i < n; ++i) {
    const int base = 2 * d * i;
    for (int k = 0; k < d; ++k) {
      const double p = x[base + k], v = x[base + d + k], a = u[d * i + k];
      out[base + k] = p + v * t + 0.5 * a * t * t;
      out[base + d + k] = v + a * t;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pairwise distance barrier values") {
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(2));
  CHECK(b.value(vec({0, 1.5})) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(b.value(vec({0, 1})) == doctest::Approx(0.0));
  CHECK(b.value(vec({0, 0.5})) == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK_THROWS_AS(make_pairwise_distance_barrier(0.0, PositionLayout::single_integrator_1d(2)),
                  std::invalid_argument);
}

TEST_CASE("ellipse barrier values") {
  const auto b = make_ellipse_barrier(9.22, 1.76);
  CHECK(b.value(vec({9.22, 0, 0, 0})) == doctest::Approx(0.0));
  CHECK(b.value(vec({0, 0, 3, -1})) == doctest::Approx(-1.0));
  CHECK(b.value(vec({9.22, 1.76, 0, 0})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(make_ellipse_barrier(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("soft-min barrier brackets the hard minimum") {
  const auto layout = PositionLayout::double_integrator(3, 2);
  const double T = 10.0;
  const auto soft = make_pairwise_distance_barrier(1.0, layout, T);
  const auto hard = make_pairwise_distance_barrier_hardmin(1.0, layout);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = oracle::random_vec(12, 2.0, rng);
    CHECK(soft.value(x) <= hard.value(x) + 1e-12);
    CHECK(soft.value(x) >= hard.value(x) - std::log(3.0) / T - 1e-12);
  }
  // exact for a single pair
  const auto pair = PositionLayout::double_integrator(2, 2);
  const auto soft2 = make_pairwise_distance_barrier(1.0, pair, T);
  const auto hard2 = make_pairwise_distance_barrier_hardmin(1.0, pair);
  const Vec x = oracle::random_vec(8, 2.0, rng);
  CHECK(soft2.value(x) == doctest::Approx(hard2.value(x)).epsilon(1e-12));
}

TEST_CASE("built-in barrier derivatives match finite differences") {
  std::mt19937_64 rng(7);
  const std::vector<std::pair<Barrier, int>> cases = {
      {make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(2)), 2},
      {make_pairwise_distance_barrier(1.0, PositionLayout::double_integrator(2, 1)), 4},
      {make_pairwise_distance_barrier(1.0, PositionLayout::double_integrator(4, 2)), 16},
      {make_pairwise_distance_barrier(0.7, PositionLayout::double_integrator(6, 2), 3.0), 24},
      {make_ellipse_barrier(9.22, 1.76), 4},
  };
  for (const auto& [b, n] : cases) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec x = oracle::random_vec(n, 3.0, rng);
      const Vec g_fd = oracle::gradient_fd(b.value, x);
      CHECK(oracle::rel_error(b.gradient(x), g_fd) <= 1e-5);
      REQUIRE(b.has_hessian());
      const Mat h_fd = oracle::jacobian_fd(b.gradient, x);
      CHECK(oracle::rel_error(b.hessian(x), h_fd) <= 1e-5);
    }
  }
}

TEST_CASE("validated barrier registration") {
  std::mt19937_64 rng(1);
  std::vector<Vec> probes;
  for (int k = 0; k < 10; ++k) probes.push_back(oracle::random_vec(2, 2.0, rng));
  auto value = [](const Vec& x) { return x.squaredNorm() - 1.0; };
  auto good = [](const Vec& x) -> Vec { return 2.0 * x; };
  auto bad = [](const Vec& x) -> Vec { return 3.0 * x; };
  auto hess = [](const Vec& x) -> Mat { return 2.0 * Mat::Identity(x.size(), x.size()); };
  CHECK_NOTHROW(make_validated_barrier("disk", value, good, hess, probes));
  CHECK_THROWS_AS(make_validated_barrier("disk", value, bad, hess, probes), BarrierValidationError);
  auto bad_hess = [](const Vec& x) -> Mat { return Mat::Identity(x.size(), x.size()); };
  CHECK_THROWS_AS(make_validated_barrier("disk", value, good, bad_hess, probes),
                  BarrierValidationError);
  CHECK_NOTHROW(make_validated_barrier("disk", value, good, nullptr, probes));
}

TEST_CASE("Example 1 constraint values") {
  const auto sys = make_single_integrator_1d(2);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(2));
  const auto row = assemble_constraint(sys, b, {ClassKappaLinear(1.0)}, vec({0, 1.5}));
  // hand derivation: grad b = (2(x1-x2), -2(x1-x2)) = (-3, 3), c = alpha(b) = 1.25
  CHECK(row.coefficients[0][0] == doctest::Approx(-3.0));
  CHECK(row.coefficients[1][0] == doctest::Approx(3.0));
  CHECK(row.offset == doctest::Approx(1.25));
  CHECK(row.evaluate(vec({1, -1})) == doctest::Approx(-4.75));
  CHECK(row.evaluate(vec({0, 0})) == doctest::Approx(1.25));
}

TEST_CASE("constraint is affine in u and recoverable from unit controls") {
  std::mt19937_64 rng(9);
  const auto sys = make_double_integrator_2d(3);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::double_integrator(3, 2));
  const AlphaChain alpha{ClassKappaLinear(1.0), ClassKappaLinear(2.0)};
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = oracle::random_vec(12, 2.0, rng);
    const auto row = assemble_constraint(sys, b, alpha, x);
    const Vec a = row.stacked();
    const double c0 = row.evaluate(Vec::Zero(6));
    CHECK(c0 == doctest::Approx(row.offset));
    for (int k = 0; k < 6; ++k)
      CHECK(row.evaluate(Vec::Unit(6, k)) - c0 == doctest::Approx(a[k]).epsilon(1e-12));
  }
}

TEST_CASE("degree-1 row reconstructs bdot + alpha(b)") {
  std::mt19937_64 rng(4);
  const auto sys = make_single_integrator_1d(3);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(3));
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = oracle::random_vec(3, 2.0, rng);
    const Vec u = oracle::random_vec(3, 2.0, rng);
    const auto row = assemble_constraint(sys, b, {ClassKappaLinear(0.5)}, x);
    const double direct = b.gradient(x).dot(sys.xdot(x, u)) + 0.5 * b.value(x);
    CHECK(std::abs(row.evaluate(u) - direct) <= 1e-9);
  }
}

TEST_CASE("degree-2 row matches bddot + 2 bdot + b along exact trajectories") {
  std::mt19937_64 rng(13);
  const AlphaChain alpha{ClassKappaLinear(1.0), ClassKappaLinear(1.0)};
  struct Case {
    int n, d;
  };
  for (const Case cs : {Case{2, 1}, Case{3, 2}}) {
    const auto sys = make_double_integrator(cs.n, cs.d);
    const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::double_integrator(cs.n, cs.d));
    for (int trial = 0; trial < 20; ++trial) {
      const Vec x = oracle::random_vec(2 * cs.n * cs.d, 2.0, rng);
      const Vec u = oracle::random_vec(cs.n * cs.d, 2.0, rng);
      const double h = 1e-4;
      const auto at = [&](double t) {
        return b.value(propagate_double_integrator(x, u, cs.n, cs.d, t));
      };
      const double b0 = at(0), bp = at(h), bm = at(-h);
      const double bdot = (bp - bm) / (2 * h);
      const double bddot = (bp - 2 * b0 + bm) / (h * h);
      const auto row = assemble_constraint(sys, b, alpha, x);
      CHECK(row.evaluate(u) == doctest::Approx(bddot + 2 * bdot + b0).epsilon(1e-5));
    }
  }
}

TEST_CASE("relative system ellipse row uses the relative actuation") {
  const auto sys = make_relative_double_integrator();
  const auto b = make_ellipse_barrier(9.22, 1.76);
  const Vec r = vec({3.0, 1.0, -1.0, 0.5});
  const auto row = assemble_constraint(sys, b, {ClassKappaLinear(1.0), ClassKappaLinear(1.0)}, r);
  // a_2 = grad_p b, a_1 = -grad_p b
  const Vec gp = b.gradient(r).head(2);
  CHECK((row.coefficients[1] - gp).norm() <= 1e-12);
  CHECK((row.coefficients[0] + gp).norm() <= 1e-12);
  // c = v^T H v + 2 bdot + b
  const Vec v = r.tail(2);
  const Mat H = b.hessian(r).topLeftCorner(2, 2);
  CHECK(row.offset == doctest::Approx(v.dot(H * v) + 2 * gp.dot(v) + b.value(r)));
}

TEST_CASE("at the boundary the row reduces to bdot") {
  const auto sys = make_single_integrator_1d(2);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(2));
  const Vec x = vec({0.2, 1.2});
  REQUIRE(b.value(x) == doctest::Approx(0.0));
  const auto row = assemble_constraint(sys, b, {ClassKappaLinear(3.0)}, x);
  const Vec u = vec({0.4, -0.7});
  CHECK(row.evaluate(u) == doctest::Approx(b.gradient(x).dot(u)));
}

TEST_CASE("forward invariance under constraint-satisfying controls") {
  std::mt19937_64 rng(21);
  const auto sys = make_single_integrator_1d(2);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::single_integrator_1d(2));
  const double dt = 0.01;
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = oracle::random_vec(2, 2.0, rng);
    const double floor = std::min(0.0, b.value(x));
    for (int k = 0; k < 500; ++k) {
      const auto row = assemble_constraint(sys, b, {ClassKappaLinear(1.0)}, x);
      Vec u = oracle::random_vec(2, 3.0, rng);
      const Vec a = row.stacked();
      const double slack = row.evaluate(u);
      if (slack < 0 && a.squaredNorm() > 0) u -= slack / a.squaredNorm() * a;  // project onto a^T u + c >= 0
      x = sys.euler_step(x, u, dt);
      CHECK(b.value(x) >= floor - 1e-9);
    }
  }
}

TEST_CASE("assembly errors") {
  const auto di = make_double_integrator(2, 1);
  const auto b = make_pairwise_distance_barrier(1.0, PositionLayout::double_integrator(2, 1));
  const Vec x = vec({0, 1, 2, 0});
  CHECK_THROWS_AS(assemble_constraint(di, b, {ClassKappaLinear(1.0)}, x), ConstraintAssemblyError);
  Barrier no_hessian = b;
  no_hessian.hessian = nullptr;
  CHECK_THROWS_AS(
      assemble_constraint(di, no_hessian, {ClassKappaLinear(1.0), ClassKappaLinear(1.0)}, x),
      ConstraintAssemblyError);
  CHECK_THROWS_AS(ClassKappaLinear(0.0), std::invalid_argument);
}
