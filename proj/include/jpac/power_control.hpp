#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jpac/channel.hpp"

namespace jpac {

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kFixedPointTol = 1e-12;
inline constexpr std::size_t kFixedPointMaxIter = 10000;

/// Outcome of the sampled fixed-point power control on a link subset.
/// Vectors are indexed in subset order.
struct FixedPointReport {
  Vector q_final;
  bool feasible = false;
  std::size_t iterations = 0;
  /// max over links in the subset of max(c_k - A_k q_final).
  double residual = 0.0;
  /// For each link, the sample row attaining its largest residual
  /// (smallest row on ties). When feasible these rows are binding.
  std::vector<std::size_t> binding;
};

/// Largest entry of v and the first row attaining it.
inline std::pair<double, std::size_t> max_with_index(const Vector& v) {
  Eigen::Index at = 0;
  const double m = v.maxCoeff(&at);  // Eigen returns the first maximizer
  return {m, static_cast<std::size_t>(at)};
}

/// Sampled fixed-point power control in normalized variables:
///
///   q_k <- min( max_n { c_k[n] + sum_{j != k} |A_k(n, j)| q_j }, 1 )
///
/// which is the budget-capped "scale by target over worst-sample SINR"
/// update. With one sample it is the classical distributed power control
/// iteration. Started from zero the iterates are nondecreasing.
inline FixedPointReport fixed_point(const NormalizedProblem& problem, std::span<const std::size_t> subset,
                                    const Vector& q0, double tol = kFixedPointTol,
                                    std::size_t max_iter = kFixedPointMaxIter, double tol_feas = kFeasibilityTol) {
  if (subset.empty()) throw std::invalid_argument("fixed_point: subset must be nonempty");
  if (static_cast<std::size_t>(q0.size()) != subset.size())
    throw std::invalid_argument("fixed_point: start vector length differs from subset size");
  if ((q0.array() < 0.0).any() || (q0.array() > 1.0).any())
    throw std::invalid_argument("fixed_point: start vector outside [0,1]");

  const NormalizedProblem sub = problem.restrict(subset);
  const std::size_t m = subset.size();
  FixedPointReport report;
  Vector q = q0;
  Vector next(static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < max_iter; ++t) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      // Unit diagonal: c - A q + q_k = c + (interference terms).
      const double worst = sub.residual(k, q).maxCoeff() + q(kk);
      next(kk) = std::min(worst, 1.0);
    }
    if (!next.allFinite()) throw std::runtime_error("fixed_point: non-finite iterate");
    const double step = (next - q).lpNorm<Eigen::Infinity>();
    q.swap(next);
    report.iterations = t + 1;
    if (step <= tol) break;
  }

  report.q_final = q;
  report.binding.resize(m);
  report.residual = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const auto [r, at] = max_with_index(sub.residual(k, q));
    report.binding[k] = at;
    report.residual = std::max(report.residual, r);
  }
  report.feasible = report.residual <= tol_feas;
  return report;
}

struct FeasibilityResult {
  bool feasible = false;
  /// Componentwise-minimal feasible normalized power, subset order.
  std::optional<Vector> q_min;
  /// sum over the subset of budget_k * q_min_k, watts.
  std::optional<double> total_power;
  std::optional<FixedPointReport> report;
};

/// Certifies whether the links in `subset` can be supported together.
/// The capped fixed point from zero is the least fixed point of a monotone
/// map, so it is feasible exactly when any feasible point exists.
inline FeasibilityResult check_feasibility(const NormalizedProblem& problem, std::span<const std::size_t> subset,
                                           double tol_feas = kFeasibilityTol) {
  FeasibilityResult out;
  if (subset.empty()) {
    out.feasible = true;
    out.q_min = Vector();
    out.total_power = 0.0;
    return out;
  }
  auto report = fixed_point(problem, subset, Vector::Zero(static_cast<Eigen::Index>(subset.size())),
                            kFixedPointTol, kFixedPointMaxIter, tol_feas);
  out.feasible = report.feasible;
  if (out.feasible) {
    double power = 0.0;
    for (std::size_t a = 0; a < subset.size(); ++a)
      power += problem.budget()(static_cast<Eigen::Index>(subset[a])) * report.q_final(static_cast<Eigen::Index>(a));
    out.q_min = report.q_final;
    out.total_power = power;
  }
  out.report = std::move(report);
  return out;
}

}  // namespace jpac
