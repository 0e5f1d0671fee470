#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "respalloc/cbf.hpp"
#include "respalloc/dynamics.hpp"

namespace respalloc {

struct FilterWeights {
  double beta1 = 0.1;    // control-magnitude regularization
  double beta2 = 600.0;  // slack penalty
};

/// Responsibility-weighted safety filter
///
///   min_{u, eps}  sum_i gamma_i ||u_i - u_i^des||^2 + beta1 ||u_i||^2 + beta2 eps^2
///   s.t.          sum_i a_i^T u_i + c >= -eps,  lower <= u <= upper,  eps >= 0.
struct FilterProblem {
  Vec desired;                    // stacked u^des
  Vec gamma;                      // one weight per agent, on the simplex
  std::vector<int> control_dims;  // per agent
  FilterWeights weights;
  CbfLinearConstraint constraint;
  Vec lower;  // stacked box bounds; +-inf for unbounded
  Vec upper;

  int n_agents() const { return static_cast<int>(control_dims.size()); }
  int n_controls() const { return static_cast<int>(desired.size()); }

  /// Throws FilterError(invalid) on inconsistent sizes, gamma off the
  /// simplex, beta2 <= 0, gamma_i + beta1 == 0, and FilterError(infeasible)
  /// when some lower bound exceeds its upper bound.
  void validate() const;
};

FilterProblem make_filter_problem(const ControlAffineSystem& system,
                                  CbfLinearConstraint constraint, Vec desired, Vec gamma,
                                  FilterWeights weights);

class FilterError : public std::runtime_error {
 public:
  enum class Kind { invalid, infeasible, no_convergence };
  FilterError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct FilterActiveSet {
  bool cbf = false;
  bool slack = false;
  std::vector<int> lower;  // control coordinates held at their lower bound
  std::vector<int> upper;
};

struct FilterSolution {
  Vec controls;  // stacked u*
  double slack = 0.0;
  double cbf_dual = 0.0;
  double slack_dual = 0.0;
  Vec lower_dual;
  Vec upper_dual;
  FilterActiveSet active;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;

  /// True when the CBF row binds with a positive multiplier.
  bool cbf_binding() const { return cbf_dual > 0.0; }
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

struct FilterJacobians {
  Mat du_dgamma;    // n_controls x n_agents
  Mat du_ddesired;  // n_controls x n_controls
  Vec dslack_dgamma;
  Vec dslack_ddesired;
  bool degenerate = false;  // KKT matrix singular; least-squares fallback used
};

struct SolverOptions {
  int max_iterations = 100;    // active-set pivots
  double tolerance = 1e-9;     // KKT residual target
};

double filter_objective(const FilterProblem& problem, const Vec& controls, double slack);

KktResiduals kkt_residuals(const FilterProblem& problem, const FilterSolution& solution);

/// Global minimizer via a dense primal active-set method.
FilterSolution solve_filter(const FilterProblem& problem, const SolverOptions& options = {});

/// Implicit differentiation of the KKT system on the strictly active set.
/// Weakly active constraints (zero multiplier) are treated as inactive.
FilterJacobians differentiate_filter(const FilterProblem& problem,
                                     const FilterSolution& solution);

struct BatchEntry {
  std::optional<FilterSolution> solution;
  std::string error;

  bool ok() const { return solution.has_value(); }
};

/// Solves every problem independently; a failing element records its error
/// without affecting the others. Results keep input order. `threads` <= 0
/// uses the hardware concurrency.
std::vector<BatchEntry> solve_filter_batch(std::span<const FilterProblem> problems,
                                           const SolverOptions& options = {},
                                           int threads = 1);

}  // namespace respalloc
