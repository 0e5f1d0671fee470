#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "respalloc/dynamics.hpp"

namespace respalloc {

/// Scalar barrier b(x) with safe set {b >= 0}. The Hessian is only needed
/// for relative-degree-2 assembly and may be left empty otherwise.
struct Barrier {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;

  bool has_hessian() const { return static_cast<bool>(hessian); }
};

/// alpha(s) = gain * s.
struct ClassKappaLinear {
  double gain = 1.0;

  explicit ClassKappaLinear(double k = 1.0);
  double operator()(double s) const { return gain * s; }
};

/// One linear class-K function per relative degree, innermost first.
using AlphaChain = std::vector<ClassKappaLinear>;

/// Where agent positions live inside a state vector: coordinate d of agent i
/// sits at offset + i * stride + d.
struct PositionLayout {
  int n_agents = 2;
  int pos_dim = 1;
  int stride = 1;
  int offset = 0;

  int index(int agent, int d) const { return offset + agent * stride + d; }

  static PositionLayout single_integrator_1d(int n_agents);
  static PositionLayout double_integrator(int n_agents, int spatial_dim);
};

inline constexpr double kDefaultSoftminTemperature = 10.0;

/// b = ||p_i - p_j||^2 - margin^2 for the closest pair. With more than two
/// agents the pairwise barriers are combined by a soft-min
/// -(1/T) log sum exp(-T b_ij), which equals the pair barrier when N = 2.
Barrier make_pairwise_distance_barrier(double margin, PositionLayout layout,
                                       double temperature = kDefaultSoftminTemperature);

/// Hard-min variant for evaluation; gradients follow the minimizing pair.
Barrier make_pairwise_distance_barrier_hardmin(double margin, PositionLayout layout);

/// b(r) = r_lon^2 / a1^2 + r_lat^2 / a2^2 - 1 over the first two entries
/// of `state_dim`-long states.
Barrier make_ellipse_barrier(double a1, double a2, int state_dim = 4);

struct BarrierCheck {
  double gradient_error = 0.0;  // max relative error vs central differences
  double hessian_error = 0.0;
};

/// Compares analytic derivatives to central finite differences at each probe.
BarrierCheck check_barrier_derivatives(const Barrier& barrier, std::span<const Vec> probes,
                                       double step = 1e-6);

class BarrierValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Registers a user-supplied barrier. Throws BarrierValidationError unless
/// its gradient (and Hessian, if given) matches finite differences within
/// `rel_tol` on every probe.
Barrier make_validated_barrier(std::string name, std::function<double(const Vec&)> value,
                               std::function<Vec(const Vec&)> gradient,
                               std::function<Mat(const Vec&)> hessian,
                               std::span<const Vec> probes, double rel_tol = 1e-5);

/// The CBF row  sum_i a_i^T u_i + c >= -eps  at one state.
struct CbfLinearConstraint {
  std::vector<Vec> coefficients;  // a_i, one per agent
  double offset = 0.0;            // c

  int n_agents() const { return static_cast<int>(coefficients.size()); }
  Vec stacked() const;
  /// sum_i a_i^T u_i + c for stacked controls u.
  double evaluate(const Vec& u) const;
};

class ConstraintAssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linearizes the (high-order) CBF condition at x.
///
/// Degree 1:  a_i = g_i^T grad b,  c = grad b^T f + alpha(b).
/// Degree 2 with gains (k1, k2): with L_f b = grad b^T f and
/// grad L_f b = H f + J_f^T grad b,
///   a_i = g_i^T grad L_f b,  c = grad L_f b^T f + (k1 + k2) L_f b + k1 k2 b.
/// For double integrators c reduces to v^T H v + (k1 + k2) bdot + k1 k2 b.
CbfLinearConstraint assemble_constraint(const ControlAffineSystem& system,
                                        const Barrier& barrier, const AlphaChain& alpha,
                                        const Vec& x);

}  // namespace respalloc
