#include "respalloc/filter_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace respalloc {

namespace {

constexpr double kSimplexTol = 1e-9;
constexpr double kWeakDual = 1e-12;

[[noreturn]] void invalid(const std::string& what) {
  throw FilterError(FilterError::Kind::invalid, "filter problem: " + what);
}

// Row types of the inequality system G z >= h, with z = (u, eps).
enum class RowKind { cbf, slack, lower, upper };

struct Row {
  RowKind kind;
  int coord;  // control coordinate for bound rows
};

// The QP in standard form. H is diagonal.
struct StandardQp {
  int n_u = 0;
  Vec h_diag;  // length n_u + 1
  Vec q;
  Vec a;       // CBF coefficients over u
  double c = 0.0;
  std::vector<Row> rows;
  Vec lower;
  Vec upper;

  int n() const { return n_u + 1; }

  double row_dot(const Row& r, const Vec& v) const {
    switch (r.kind) {
      case RowKind::cbf: return a.dot(v.head(n_u)) + v[n_u];
      case RowKind::slack: return v[n_u];
      case RowKind::lower: return v[r.coord];
      case RowKind::upper: return -v[r.coord];
    }
    return 0.0;
  }

  double rhs(const Row& r) const {
    switch (r.kind) {
      case RowKind::cbf: return -c;
      case RowKind::slack: return 0.0;
      case RowKind::lower: return lower[r.coord];
      case RowKind::upper: return -upper[r.coord];
    }
    return 0.0;
  }

  Vec row_vector(const Row& r) const {
    Vec g = Vec::Zero(n());
    switch (r.kind) {
      case RowKind::cbf:
        g.head(n_u) = a;
        g[n_u] = 1.0;
        break;
      case RowKind::slack: g[n_u] = 1.0; break;
      case RowKind::lower: g[r.coord] = 1.0; break;
      case RowKind::upper: g[r.coord] = -1.0; break;
    }
    return g;
  }

  Mat rows_matrix(const std::vector<int>& set) const {
    Mat g(static_cast<Eigen::Index>(set.size()), n());
    for (std::size_t k = 0; k < set.size(); ++k) g.row(k) = row_vector(rows[set[k]]).transpose();
    return g;
  }
};

StandardQp to_standard(const FilterProblem& p) {
  StandardQp qp;
  qp.n_u = p.n_controls();
  qp.h_diag.resize(qp.n());
  qp.q = Vec::Zero(qp.n());
  int at = 0;
  for (int i = 0; i < p.n_agents(); ++i) {
    for (int j = 0; j < p.control_dims[i]; ++j, ++at) {
      qp.h_diag[at] = 2.0 * (p.gamma[i] + p.weights.beta1);
      qp.q[at] = -2.0 * p.gamma[i] * p.desired[at];
    }
  }
  qp.h_diag[qp.n_u] = 2.0 * p.weights.beta2;
  qp.a = p.constraint.stacked();
  qp.c = p.constraint.offset;
  qp.lower = p.lower;
  qp.upper = p.upper;

  qp.rows.push_back({RowKind::cbf, -1});
  qp.rows.push_back({RowKind::slack, -1});
  for (int j = 0; j < qp.n_u; ++j) {
    if (std::isfinite(p.lower[j])) qp.rows.push_back({RowKind::lower, j});
    if (std::isfinite(p.upper[j])) qp.rows.push_back({RowKind::upper, j});
  }
  return qp;
}

Vec agent_gamma_per_coord(const FilterProblem& p) {
  Vec g(p.n_controls());
  int at = 0;
  for (int i = 0; i < p.n_agents(); ++i)
    for (int j = 0; j < p.control_dims[i]; ++j) g[at++] = p.gamma[i];
  return g;
}

// Solves S x = rhs for the symmetric PSD Schur complement, falling back to a
// minimum-norm least-squares solution when S is singular.
Mat solve_schur(const Mat& s, const Mat& rhs, bool& degenerate) {
  Eigen::FullPivLU<Mat> lu(s);
  lu.setThreshold(1e-12);
  if (lu.rank() == s.rows()) return lu.solve(rhs);
  degenerate = true;
  return Eigen::CompleteOrthogonalDecomposition<Mat>(s).solve(rhs);
}

}  // namespace

void FilterProblem::validate() const {
  const int n = n_agents();
  if (n < 1) invalid("no agents");
  int total = 0;
  for (int d : control_dims) {
    if (d <= 0) invalid("control dims must be positive");
    total += d;
  }
  if (desired.size() != total) invalid("desired control length mismatch");
  if (lower.size() != total || upper.size() != total) invalid("bound length mismatch");
  if (gamma.size() != n) invalid("gamma length differs from agent count");
  if (constraint.n_agents() != n) invalid("constraint agent count mismatch");
  for (int i = 0; i < n; ++i)
    if (constraint.coefficients[i].size() != control_dims[i])
      invalid("constraint coefficient length mismatch for agent " + std::to_string(i));
  if (!desired.allFinite() || !constraint.stacked().allFinite() ||
      !std::isfinite(constraint.offset))
    invalid("non-finite desired control or constraint");
  if (!gamma.allFinite()) invalid("non-finite gamma");
  if (std::abs(gamma.sum() - 1.0) > kSimplexTol) invalid("gamma must sum to 1");
  if ((gamma.array() < 0.0).any() || (gamma.array() > 1.0).any())
    invalid("gamma entries must lie in [0, 1]");
  if (!(weights.beta1 >= 0.0)) invalid("beta1 must be nonnegative");
  if (!(weights.beta2 > 0.0)) invalid("beta2 must be positive");
  for (int i = 0; i < n; ++i)
    if (!(gamma[i] + weights.beta1 > 0.0))
      invalid("gamma_" + std::to_string(i) + " = 0 requires beta1 > 0");
  for (int j = 0; j < total; ++j)
    if (lower[j] > upper[j] || std::isnan(lower[j]) || std::isnan(upper[j]))
      throw FilterError(FilterError::Kind::infeasible,
                        "filter problem: box bounds inconsistent at coordinate " +
                            std::to_string(j));
}

FilterProblem make_filter_problem(const ControlAffineSystem& system,
                                  CbfLinearConstraint constraint, Vec desired, Vec gamma,
                                  FilterWeights weights) {
  FilterProblem p;
  p.desired = std::move(desired);
  p.gamma = std::move(gamma);
  p.control_dims = system.control_dims();
  p.weights = weights;
  p.constraint = std::move(constraint);
  p.lower = system.control_lower();
  p.upper = system.control_upper();
  return p;
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

double filter_objective(const FilterProblem& p, const Vec& u, double eps) {
  double total = 0.0;
  int at = 0;
  for (int i = 0; i < p.n_agents(); ++i) {
    const int d = p.control_dims[i];
    const auto ui = u.segment(at, d);
    total += p.gamma[i] * (ui - p.desired.segment(at, d)).squaredNorm() +
             p.weights.beta1 * ui.squaredNorm();
    at += d;
  }
  return total + p.weights.beta2 * eps * eps;
}

KktResiduals kkt_residuals(const FilterProblem& p, const FilterSolution& s) {
  const StandardQp qp = to_standard(p);
  Vec z(qp.n());
  z << s.controls, s.slack;

  // Gradient of the objective minus G^T lambda.
  Vec r = qp.h_diag.cwiseProduct(z) + qp.q;
  r.head(qp.n_u) -= s.cbf_dual * qp.a;
  r[qp.n_u] -= s.cbf_dual + s.slack_dual;
  r.head(qp.n_u) -= s.lower_dual - s.upper_dual;

  KktResiduals out;
  out.stationarity = r.lpNorm<Eigen::Infinity>();

  auto primal = [&](double slackness) { out.primal = std::max(out.primal, -slackness); };
  auto dual = [&](double lambda) { out.dual = std::max(out.dual, -lambda); };
  auto comp = [&](double lambda, double slackness) {
    out.complementarity = std::max(out.complementarity, std::abs(lambda * slackness));
  };

  const double cbf_slack = qp.a.dot(s.controls) + s.slack + qp.c;
  primal(cbf_slack);
  dual(s.cbf_dual);
  comp(s.cbf_dual, cbf_slack);
  primal(s.slack);
  dual(s.slack_dual);
  comp(s.slack_dual, s.slack);
  for (int j = 0; j < qp.n_u; ++j) {
    const double lo_gap = s.controls[j] - p.lower[j];
    const double hi_gap = p.upper[j] - s.controls[j];
    if (std::isfinite(lo_gap)) {
      primal(lo_gap);
      comp(s.lower_dual[j], lo_gap);
    }
    if (std::isfinite(hi_gap)) {
      primal(hi_gap);
      comp(s.upper_dual[j], hi_gap);
    }
    dual(s.lower_dual[j]);
    dual(s.upper_dual[j]);
  }
  return out;
}

FilterSolution solve_filter(const FilterProblem& problem, const SolverOptions& options) {
  problem.validate();
  const StandardQp qp = to_standard(problem);
  const int n = qp.n();
  const int n_u = qp.n_u;
  const Vec h_inv = qp.h_diag.cwiseInverse();

  // Feasible start: shrunk desired control clipped to the box, slack covers
  // whatever CBF violation remains.
  Vec z(n);
  const Vec gamma_u = agent_gamma_per_coord(problem);
  for (int j = 0; j < n_u; ++j) {
    const double shrunk = gamma_u[j] / (gamma_u[j] + problem.weights.beta1) * problem.desired[j];
    z[j] = std::clamp(shrunk, problem.lower[j], problem.upper[j]);
  }
  z[n_u] = std::max(0.0, -qp.c - qp.a.dot(z.head(n_u)));

  std::vector<int> working;
  std::vector<char> in_working(qp.rows.size(), 0);
  Vec lambda;
  int pivots = 0;
  int steps = 0;
  bool converged = false;
  // After an unblocked step z minimizes over the working set; rounding may
  // leave a residual direction above step_tol that must not be chased.
  bool at_subspace_min = false;

  const double scale = 1.0 + problem.desired.lpNorm<Eigen::Infinity>() + std::abs(qp.c);
  const double step_tol = 1e-13 * scale;
  const double dual_tol = 1e-12 * scale;

  // Unblocked steps alternate with pivots, so 2 * cap + 1 bounds the loop.
  while (pivots <= options.max_iterations && steps <= 2 * options.max_iterations + 1) {
    ++steps;
    const Vec g = qp.h_diag.cwiseProduct(z) + qp.q;
    Vec p;
    if (working.empty()) {
      p = -h_inv.cwiseProduct(g);
      lambda.resize(0);
    } else {
      const Mat gw = qp.rows_matrix(working);
      const Mat s = gw * h_inv.asDiagonal() * gw.transpose();
      bool degenerate = false;
      lambda = solve_schur(s, gw * h_inv.cwiseProduct(g), degenerate);
      p = h_inv.cwiseProduct(gw.transpose() * lambda - g);
    }

    if (at_subspace_min || p.lpNorm<Eigen::Infinity>() <= step_tol) {
      at_subspace_min = false;
      if (working.empty()) {
        converged = true;
        break;
      }
      Eigen::Index worst = 0;
      const double min_lambda = lambda.minCoeff(&worst);
      if (min_lambda >= -dual_tol) {
        converged = true;
        break;
      }
      in_working[working[worst]] = 0;
      working.erase(working.begin() + worst);
      ++pivots;
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (std::size_t k = 0; k < qp.rows.size(); ++k) {
      if (in_working[k]) continue;
      const double gp = qp.row_dot(qp.rows[k], p);
      if (gp >= -1e-15) continue;
      const double gap = qp.row_dot(qp.rows[k], z) - qp.rhs(qp.rows[k]);
      const double ratio = std::max(0.0, gap) / -gp;
      if (ratio < alpha) {
        alpha = ratio;
        blocking = static_cast<int>(k);
      }
    }
    z += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[blocking] = 1;
      ++pivots;
    } else {
      at_subspace_min = true;
    }
  }
  if (!converged)
    throw FilterError(FilterError::Kind::no_convergence,
                      "filter QP: no convergence within " +
                          std::to_string(options.max_iterations) + " active-set pivots");

  FilterSolution sol;
  sol.controls = z.head(n_u);
  sol.slack = z[n_u];
  sol.lower_dual = Vec::Zero(n_u);
  sol.upper_dual = Vec::Zero(n_u);
  sol.iterations = pivots;
  for (std::size_t k = 0; k < working.size(); ++k) {
    const Row& r = qp.rows[working[k]];
    const double l = lambda[static_cast<Eigen::Index>(k)];
    switch (r.kind) {
      case RowKind::cbf:
        sol.cbf_dual = l;
        sol.active.cbf = true;
        break;
      case RowKind::slack:
        sol.slack_dual = l;
        sol.active.slack = true;
        break;
      case RowKind::lower:
        sol.lower_dual[r.coord] = l;
        sol.active.lower.push_back(r.coord);
        break;
      case RowKind::upper:
        sol.upper_dual[r.coord] = l;
        sol.active.upper.push_back(r.coord);
        break;
    }
  }
  std::sort(sol.active.lower.begin(), sol.active.lower.end());
  std::sort(sol.active.upper.begin(), sol.active.upper.end());
  sol.objective = filter_objective(problem, sol.controls, sol.slack);
  sol.kkt_residual = kkt_residuals(problem, sol).max();
  return sol;
}

FilterJacobians differentiate_filter(const FilterProblem& problem,
                                     const FilterSolution& solution) {
  problem.validate();
  const StandardQp qp = to_standard(problem);
  const int n = qp.n();
  const int n_u = qp.n_u;
  const int n_agents = problem.n_agents();
  const Vec h_inv = qp.h_diag.cwiseInverse();

  // Strictly active rows only.
  std::vector<int> active;
  for (std::size_t k = 0; k < qp.rows.size(); ++k) {
    const Row& r = qp.rows[k];
    double l = 0.0;
    switch (r.kind) {
      case RowKind::cbf: l = solution.active.cbf ? solution.cbf_dual : 0.0; break;
      case RowKind::slack: l = solution.active.slack ? solution.slack_dual : 0.0; break;
      case RowKind::lower: l = solution.lower_dual[r.coord]; break;
      case RowKind::upper: l = solution.upper_dual[r.coord]; break;
    }
    if (l > kWeakDual) active.push_back(static_cast<int>(k));
  }

  // Right-hand side: derivative of the objective gradient Hz + q with
  // respect to each parameter, columns (gamma_1..N, u^des_1..n_u).
  Mat rhs = Mat::Zero(n, n_agents + n_u);
  int at = 0;
  for (int i = 0; i < n_agents; ++i) {
    for (int j = 0; j < problem.control_dims[i]; ++j, ++at) {
      rhs(at, i) = 2.0 * (solution.controls[at] - problem.desired[at]);
      rhs(at, n_agents + at) = -2.0 * problem.gamma[i];
    }
  }

  FilterJacobians out;
  Mat dz = -(h_inv.asDiagonal() * rhs);
  if (!active.empty()) {
    const Mat ga = qp.rows_matrix(active);
    const Mat s = ga * h_inv.asDiagonal() * ga.transpose();
    const Mat dlambda = solve_schur(s, ga * (h_inv.asDiagonal() * rhs), out.degenerate);
    dz += h_inv.asDiagonal() * (ga.transpose() * dlambda);
  }
  out.du_dgamma = dz.topLeftCorner(n_u, n_agents);
  out.du_ddesired = dz.topRightCorner(n_u, n_u);
  out.dslack_dgamma = dz.row(n_u).head(n_agents).transpose();
  out.dslack_ddesired = dz.row(n_u).tail(n_u).transpose();
  return out;
}

std::vector<BatchEntry> solve_filter_batch(std::span<const FilterProblem> problems,
                                           const SolverOptions& options, int threads) {
  std::vector<BatchEntry> out(problems.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < problems.size(); k += stride) {
      try {
        out[k].solution = solve_filter(problems[k], options);
      } catch (const std::exception& e) {
        out[k].error = e.what();
      }
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(1, problems.size())));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, static_cast<std::size_t>(threads));
  pool.clear();  // joins
  return out;
}

}  // namespace respalloc
