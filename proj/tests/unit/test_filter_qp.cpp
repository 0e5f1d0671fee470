#include <doctest.h>

#include <cmath>
#include <random>

#include "respalloc/filter_qp.hpp"
#include "support/oracles.hpp"

using namespace respalloc;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

// Example 1 scene: x = (0, 1.5), b = (x1 - x2)^2 - 1, alpha(s) = s.
CbfLinearConstraint example1_row() {
  CbfLinearConstraint row;
  row.coefficients = {vec({-3.0}), vec({3.0})};
  row.offset = 1.25;
  return row;
}

FilterProblem scalar_problem(const CbfLinearConstraint& row, Vec desired, Vec gamma, double beta1,
                             double beta2, double limit = 10.0) {
  FilterProblem p;
  p.desired = std::move(desired);
  p.gamma = std::move(gamma);
  p.control_dims = std::vector<int>(static_cast<std::size_t>(row.n_agents()), 1);
  p.weights = {beta1, beta2};
  p.constraint = row;
  p.lower = Vec::Constant(row.n_agents(), -limit);
  p.upper = Vec::Constant(row.n_agents(), limit);
  return p;
}

oracle::Scalar2Qp to_oracle(const FilterProblem& p) {
  return {p.gamma[0], p.gamma[1], p.weights.beta1, p.weights.beta2, p.desired[0], p.desired[1],
          p.constraint.coefficients[0][0], p.constraint.coefficients[1][0], p.constraint.offset,
          p.lower[0], p.upper[0]};
}

// Random problem over N agents with control_dim d; `active` picks whether
// the CBF row must bind at the shrunk desired control.
FilterProblem random_problem(int n, int d, bool active, std::mt19937_64& rng, double beta1 = 0.1) {
  for (;;) {
    FilterProblem p;
    p.control_dims.assign(static_cast<std::size_t>(n), d);
    p.desired = oracle::random_vec(n * d, 2.0, rng);
    p.gamma = oracle::random_simplex(n, rng);
    p.weights = {beta1, 600.0};
    p.lower = Vec::Constant(n * d, -10.0);
    p.upper = Vec::Constant(n * d, 10.0);
    for (int i = 0; i < n; ++i) p.constraint.coefficients.push_back(oracle::random_vec(d, 3.0, rng));
    p.constraint.offset = std::uniform_real_distribution<double>(-4.0, 4.0)(rng);
    const FilterSolution s = solve_filter(p);
    // Stay away from active-set boundaries so finite differences are valid.
    if (!s.active.lower.empty() || !s.active.upper.empty()) continue;
    const bool strictly_active = s.cbf_dual > 1e-3;
    const bool strictly_inactive = !s.active.cbf && p.constraint.evaluate(s.controls) > 1e-3;
    if (active ? strictly_active : strictly_inactive) return p;
  }
}

}  // namespace

TEST_CASE("feasible desired control passes through unchanged") {
  auto row = example1_row();
  auto p = scalar_problem(row, vec({-1, 1}), vec({0.5, 0.5}), 0.0, 600.0);
  const auto s = solve_filter(p);
  CHECK((s.controls - p.desired).norm() <= 1e-12);
  CHECK(s.slack == 0.0);
  CHECK_FALSE(s.cbf_binding());
}

TEST_CASE("Example 1 endpoints put the whole deviation on one agent") {
  // gamma_1 = 0 needs beta1 > 0 for uniqueness; a tiny beta1 and a large
  // beta2 approach the limiting projection.
  auto row = example1_row();
  const double beta1 = 1e-6, beta2 = 1e6;
  const auto s0 = solve_filter(scalar_problem(row, vec({1, -1}), vec({0, 1}), beta1, beta2));
  CHECK(s0.controls[1] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(s0.controls[0] == doctest::Approx(-7.0 / 12.0).epsilon(1e-4));

  const auto s1 = solve_filter(scalar_problem(row, vec({1, -1}), vec({1, 0}), beta1, beta2));
  CHECK(s1.controls[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(s1.controls[1] == doctest::Approx(7.0 / 12.0).epsilon(1e-4));

  CHECK_THROWS_AS(solve_filter(scalar_problem(row, vec({1, -1}), vec({0, 1}), 0.0, 600.0)),
                  FilterError);
}

TEST_CASE("gamma sweep shifts deviation monotonically and matches grid search") {
  auto row = example1_row();
  double prev1 = std::numeric_limits<double>::infinity(), prev2 = -1.0;
  for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto p = scalar_problem(row, vec({1, -1}), vec({g, 1 - g}), 1e-3, 600.0);
    const auto s = solve_filter(p);
    const double dev1 = std::abs(s.controls[0] - 1.0), dev2 = std::abs(s.controls[1] + 1.0);
    CHECK(dev1 <= prev1 + 1e-12);
    CHECK(dev2 >= prev2 - 1e-12);
    prev1 = dev1;
    prev2 = dev2;
    const auto [g1, g2] = oracle::grid_search(to_oracle(p));
    CHECK(std::abs(s.controls[0] - g1) <= 2e-3);
    CHECK(std::abs(s.controls[1] - g2) <= 2e-3);
  }
}

TEST_CASE("random 1D instances agree with grid search and satisfy KKT") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    CbfLinearConstraint row;
    row.coefficients = {vec({3 * u(rng)}), vec({3 * u(rng)})};
    row.offset = 4 * u(rng);
    const auto p = scalar_problem(row, oracle::random_vec(2, 4.0, rng), oracle::random_simplex(2, rng),
                                  0.1, 600.0, 5.0);
    const auto s = solve_filter(p);
    const auto [g1, g2] = oracle::grid_search(to_oracle(p));
    CHECK(std::abs(s.controls[0] - g1) <= 2e-3);
    CHECK(std::abs(s.controls[1] - g2) <= 2e-3);
    CHECK(kkt_residuals(p, s).max() <= 1e-7);
  }
}

TEST_CASE("box bounds bind and carry multipliers") {
  auto row = example1_row();
  row.offset = 100.0;  // far from the boundary: only the box constrains
  const auto p = scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.0, 600.0, 0.3);
  const auto s = solve_filter(p);
  CHECK(kkt_residuals(p, s).max() <= 1e-7);
  const auto [g1, g2] = oracle::grid_search(to_oracle(p));
  CHECK(std::abs(s.controls[0] - g1) <= 2e-3);
  CHECK(std::abs(s.controls[1] - g2) <= 2e-3);
  CHECK(s.active.lower.size() == 1);
  CHECK(s.active.upper.size() == 1);
  CHECK(s.controls[0] == doctest::Approx(0.3));
  CHECK(s.controls[1] == doctest::Approx(-0.3));
}

TEST_CASE("objective optimality under feasible perturbations") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(3, 2, trial % 2 == 0, rng);
    const auto s = solve_filter(p);
    const double best = filter_objective(p, s.controls, s.slack);
    for (int k = 0; k < 1000; ++k) {
      const Vec du = oracle::random_vec(6, 0.5, rng);
      const Vec u = (s.controls + du).cwiseMax(p.lower).cwiseMin(p.upper);
      const double eps = std::max(0.0, s.slack + std::uniform_real_distribution<double>(-0.2, 0.2)(rng));
      if (p.constraint.evaluate(u) < -eps) continue;
      CHECK(filter_objective(p, u, eps) >= best - 1e-8);
    }
  }
}

TEST_CASE("inactive row: closed-form shrinkage and its derivative") {
  CbfLinearConstraint row;
  row.coefficients = {vec({1.0}), vec({1.0})};
  row.offset = 100.0;
  const auto p = scalar_problem(row, vec({1.0, -2.0}), vec({0.5, 0.5}), 0.1, 600.0);
  const auto s = solve_filter(p);
  CHECK(s.controls[0] == doctest::Approx(0.5 / 0.6));
  const auto j = differentiate_filter(p, s);
  CHECK(j.du_dgamma(0, 0) == doctest::Approx(0.1 / 0.36).epsilon(1e-12));
  CHECK(j.du_dgamma(0, 0) == doctest::Approx(0.2778).epsilon(1e-4));
  CHECK(j.du_dgamma(0, 1) == 0.0);
  CHECK(j.du_ddesired(0, 0) == doctest::Approx(0.5 / 0.6));

  const auto p0 = scalar_problem(row, vec({1.0, -2.0}), vec({0.5, 0.5}), 0.0, 600.0);
  const auto j0 = differentiate_filter(p0, solve_filter(p0));
  CHECK(j0.du_dgamma.isZero());
}

namespace {

// Central differences along the simplex-preserving direction e_i - e_j.
Vec fd_gamma_direction(FilterProblem p, int i, int j, double h = 1e-5) {
  FilterProblem plus = p, minus = p;
  plus.gamma[i] += h;
  plus.gamma[j] -= h;
  minus.gamma[i] -= h;
  minus.gamma[j] += h;
  return (solve_filter(plus).controls - solve_filter(minus).controls) / (2 * h);
}

Mat fd_desired(const FilterProblem& p, double h = 1e-5) {
  return oracle::jacobian_fd(
      [&](const Vec& d) {
        FilterProblem q = p;
        q.desired = d;
        return solve_filter(q).controls;
      },
      p.desired, h);
}

void check_jacobians(const FilterProblem& p) {
  const auto s = solve_filter(p);
  const auto j = differentiate_filter(p, s);
  for (int a = 0; a < p.n_agents(); ++a)
    for (int b = a + 1; b < p.n_agents(); ++b) {
      const Vec analytic = j.du_dgamma.col(a) - j.du_dgamma.col(b);
      CHECK(oracle::rel_error(analytic, fd_gamma_direction(p, a, b)) <= 1e-4);
    }
  CHECK(oracle::rel_error(j.du_ddesired, fd_desired(p)) <= 1e-4);
}

}  // namespace

TEST_CASE("Jacobians match finite differences on active instances") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) check_jacobians(random_problem(2 + trial % 3, 1 + trial % 2, true, rng));
}

TEST_CASE("Jacobians match finite differences on inactive instances") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) check_jacobians(random_problem(2 + trial % 3, 1 + trial % 2, false, rng));
}

TEST_CASE("Example 1 active scene Jacobian") {
  auto row = example1_row();
  const auto p = scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.1, 600.0);
  REQUIRE(solve_filter(p).cbf_binding());
  check_jacobians(p);
}

TEST_CASE("slack vanishes as beta2 grows on feasible instances") {
  auto row = example1_row();
  double prev = std::numeric_limits<double>::infinity();
  for (double beta2 : {1.0, 10.0, 100.0, 1e4, 1e6}) {
    const auto s = solve_filter(scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.1, beta2));
    CHECK(s.slack <= prev + 1e-15);
    prev = s.slack;
  }
  CHECK(prev <= 1e-4);
}

TEST_CASE("problem validation") {
  auto row = example1_row();
  CHECK_THROWS_AS(solve_filter(scalar_problem(row, vec({1, -1}), vec({0.6, 0.6}), 0.1, 600.0)),
                  FilterError);
  CHECK_THROWS_AS(solve_filter(scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.1, 0.0)),
                  FilterError);
  auto p = scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.1, 600.0);
  p.lower[0] = 2.0;
  p.upper[0] = 1.0;
  try {
    solve_filter(p);
    FAIL("expected infeasible");
  } catch (const FilterError& e) {
    CHECK(e.kind() == FilterError::Kind::infeasible);
  }
  auto q = scalar_problem(row, vec({1, -1, 0}), vec({0.5, 0.5}), 0.1, 600.0);
  CHECK_THROWS_AS(solve_filter(q), FilterError);
}

TEST_CASE("iteration cap reports non-convergence") {
  auto row = example1_row();
  const auto p = scalar_problem(row, vec({1, -1}), vec({0.5, 0.5}), 0.1, 600.0, 0.3);
  REQUIRE(solve_filter(p).iterations > 0);
  try {
    solve_filter(p, SolverOptions{0, 1e-9});
    FAIL("expected no_convergence");
  } catch (const FilterError& e) {
    CHECK(e.kind() == FilterError::Kind::no_convergence);
  }
}

TEST_CASE("batch solving") {
  std::mt19937_64 rng(41);
  std::vector<FilterProblem> problems;
  for (int k = 0; k < 128; ++k) problems.push_back(random_problem(2, 1, k % 2 == 0, rng));

  const auto single = solve_filter_batch(std::span(problems).first(1));
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].ok());
  CHECK(single[0].solution->controls == solve_filter(problems[0]).controls);

  for (int threads : {1, 4}) {
    const auto batch = solve_filter_batch(problems, {}, threads);
    REQUIRE(batch.size() == problems.size());
    for (std::size_t k = 0; k < problems.size(); ++k) {
      REQUIRE(batch[k].ok());
      CHECK((batch[k].solution->controls - solve_filter(problems[k]).controls).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  problems[5].gamma[0] = 2.0;  // off the simplex
  const auto mixed = solve_filter_batch(problems, {}, 2);
  CHECK_FALSE(mixed[5].ok());
  CHECK_FALSE(mixed[5].error.empty());
  CHECK(mixed[4].ok());
  CHECK(mixed[6].ok());
}
