#include <doctest.h>

#include <random>

#include "respalloc/dynamics.hpp"
#include "support/oracles.hpp"

using namespace respalloc;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}
}  // namespace

TEST_CASE("single integrator follows its controls") {
  const auto sys = make_single_integrator_1d(2);
  CHECK(sys.relative_degree() == 1);
  CHECK(sys.xdot(vec({0, 1.5}), vec({1, -1})) == vec({1, -1}));
  CHECK(sys.xdot(vec({0, 1.5}), vec({0, 0})) == vec({0, 0}));
  CHECK(sys.drift(vec({0.3, -2})).isZero());

  const auto six = make_single_integrator_1d(6);
  CHECK(six.state_dim() == 6);
  CHECK(six.total_control_dim() == 6);
}

TEST_CASE("2D double integrator integrates velocity and control") {
  const auto one = make_double_integrator_2d(1);
  CHECK(one.relative_degree() == 2);
  CHECK(one.xdot(vec({0, 0, 1, 2}), vec({0, 0})) == vec({1, 2, 0, 0}));
  CHECK(one.xdot(vec({0, 0, 0, 0}), vec({3, -1})) == vec({0, 0, 3, -1}));

  const auto six = make_double_integrator_2d(6);
  CHECK(six.state_dim() == 24);
  CHECK(six.total_control_dim() == 12);
  CHECK(six.control_offset(5) == 10);
}

TEST_CASE("relative double integrator") {
  const auto rel = make_relative_double_integrator();
  CHECK(rel.n_agents() == 2);
  CHECK(rel.state_dim() == 4);
  CHECK(rel.xdot(vec({0, 0, 1, 0}), vec({0, 0, 0, 0})) == vec({1, 0, 0, 0}));
  CHECK(rel.xdot(vec({0, 0, 0, 0}), vec({1, 0, 1, 0})).tail(2).isZero());
  CHECK(rel.xdot(vec({0, 0, 0, 0}), vec({0, 0, 0, 1})).tail(2) == vec({0, 1}));

  Mat g1 = Mat::Zero(4, 2), g2 = Mat::Zero(4, 2);
  g1.bottomRows(2) = -Mat::Identity(2, 2);
  g2.bottomRows(2) = Mat::Identity(2, 2);
  CHECK(rel.actuation(Vec::Zero(4), 0) == g1);
  CHECK(rel.actuation(Vec::Zero(4), 1) == g2);
}

TEST_CASE("agent swap on the relative system negates rdot") {
  const auto rel = make_relative_double_integrator();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec r = oracle::random_vec(4, 5.0, rng);
    const Vec u = oracle::random_vec(4, 3.0, rng);
    Vec swapped(4);
    swapped << u.tail(2), u.head(2);
    CHECK((rel.xdot(-r, swapped) + rel.xdot(r, u)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("xdot is affine in u (superposition)") {
  std::mt19937_64 rng(11);
  for (const auto& sys : {make_single_integrator_1d(3), make_double_integrator_2d(3),
                          make_double_integrator(2, 1), make_relative_double_integrator()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = oracle::random_vec(sys.state_dim(), 4.0, rng);
      const Vec u = oracle::random_vec(sys.total_control_dim(), 4.0, rng);
      const Vec w = oracle::random_vec(sys.total_control_dim(), 4.0, rng);
      const Vec lhs = sys.xdot(x, u + w) + sys.drift(x);
      const Vec rhs = sys.xdot(x, u) + sys.xdot(x, w);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("drift Jacobian matches finite differences") {
  std::mt19937_64 rng(5);
  for (const auto& sys : {make_double_integrator_2d(2), make_relative_double_integrator()}) {
    const Vec x = oracle::random_vec(sys.state_dim(), 2.0, rng);
    const Mat fd = oracle::jacobian_fd([&](const Vec& z) { return sys.drift(z); }, x);
    CHECK(oracle::rel_error(sys.drift_jacobian(x), fd) <= 1e-8);
  }
}

TEST_CASE("control limits and validation") {
  const auto sys = make_single_integrator_1d(2);
  CHECK(sys.control_lower() == Vec::Constant(2, -kDefaultControlLimit));
  CHECK(sys.control_upper() == Vec::Constant(2, kDefaultControlLimit));
  const auto tight = sys.with_control_limits(-1, 2);
  CHECK(tight.control_upper() == Vec::Constant(2, 2.0));
  CHECK_THROWS_AS(sys.with_control_limits(1, -1), std::invalid_argument);
  CHECK_THROWS_AS(make_single_integrator_1d(0), std::invalid_argument);
  CHECK_THROWS_AS(sys.xdot(Vec::Zero(3), Vec::Zero(2)), std::invalid_argument);
  CHECK_THROWS_AS(AgentSpec::make(0, 1).validate(), std::invalid_argument);
}

TEST_CASE("explicit Euler step") {
  const auto sys = make_double_integrator_2d(1);
  const Vec next = sys.euler_step(vec({0, 0, 1, 0}), vec({0, 2}), 0.1);
  CHECK(next.isApprox(vec({0.1, 0, 1, 0.2})));
}
