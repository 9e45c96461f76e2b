#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jpac/channel.hpp"
#include "jpac/power_control.hpp"

namespace jpac {

/// Weight and solver settings for the mixed l2/l1 relaxation
///
///   min_{0 <= q <= e}  sum_k || max(c_k - A_k q, 0) ||_2  +  alpha * budget' q .
struct RelaxationParams {
  double alpha = 0.0;
  double alpha1 = 0.0;  ///< 1 / sum(budget); keeps the power term below one link
  double alpha2 = 0.0;  ///< min(c) / (K max(budget)); no over-removal below this
  double c1 = 0.999;
  double c2 = 0.999;
  double mu_start = 1.0;
  double mu_factor = 0.1;
  double mu_min = 1e-4;
  std::size_t max_iter_per_stage = 2000;
  double grad_tol = 1e-8;
  /// Links whose largest residual is at most this after continuation are
  /// candidates for the exact support polish (0 disables polishing).
  double polish_tol = 1e-3;

  void validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("RelaxationParams: alpha must be nonnegative");
    if (!(mu_min > 0.0 && mu_start > mu_min)) throw std::invalid_argument("RelaxationParams: need mu_start > mu_min > 0");
    if (!(mu_factor > 0.0 && mu_factor < 1.0)) throw std::invalid_argument("RelaxationParams: mu_factor must lie in (0,1)");
    if (max_iter_per_stage < 1) throw std::invalid_argument("RelaxationParams: max_iter_per_stage must be >= 1");
  }

  /// Smoothing levels mu_start, mu_start*factor, ... while >= mu_min
  /// (a relative slack of 1e-9 keeps 1e-4 from being lost to rounding).
  std::vector<double> schedule() const {
    std::vector<double> mus;
    for (double mu = mu_start; mu >= mu_min * (1.0 - 1e-9); mu *= mu_factor) mus.push_back(mu);
    return mus;
  }
};

inline RelaxationParams alpha_bounds(const NormalizedProblem& problem, double c1 = 0.999, double c2 = 0.999) {
  if (!(c1 > 0.0 && c1 < 1.0) || !(c2 > 0.0 && c2 < 1.0))
    throw std::invalid_argument("alpha_bounds: safety factors must lie in (0,1)");
  if (problem.links() == 0) throw std::invalid_argument("alpha_bounds: empty problem");
  RelaxationParams params;
  params.c1 = c1;
  params.c2 = c2;
  params.alpha1 = 1.0 / problem.budget().sum();
  double cmin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < problem.links(); ++k) cmin = std::min(cmin, problem.noise(k).minCoeff());
  params.alpha2 = cmin / (static_cast<double>(problem.links()) * problem.budget().maxCoeff());
  params.alpha = std::min(c1 * params.alpha1, c2 * params.alpha2);
  return params;
}

/// h_k(q) = || max(c_k - A_k q, 0) ||_2.
inline double group_violation(const NormalizedProblem& problem, std::size_t k, const Vector& q) {
  return problem.residual(k, q).cwiseMax(0.0).norm();
}

inline double objective(const NormalizedProblem& problem, const Vector& q, double alpha) {
  double value = alpha * problem.budget().dot(q);
  for (std::size_t k = 0; k < problem.links(); ++k) value += group_violation(problem, k, q);
  return value;
}

struct SmoothedEval {
  double value = 0.0;
  Vector gradient;
};

/// f_mu(q) = sum_k sqrt(h_k(q)^2 + mu^2) + alpha budget'q and its gradient.
inline SmoothedEval smoothed_objective_gradient(const NormalizedProblem& problem, const Vector& q, double alpha,
                                                double mu) {
  if (!(mu > 0.0)) throw std::domain_error("smoothed_objective_gradient: mu must be positive");
  SmoothedEval out;
  out.value = alpha * problem.budget().dot(q);
  out.gradient = alpha * problem.budget();
  for (std::size_t k = 0; k < problem.links(); ++k) {
    const Vector plus = problem.residual(k, q).cwiseMax(0.0);
    const double root = std::sqrt(plus.squaredNorm() + mu * mu);
    out.value += root;
    out.gradient.noalias() -= problem.block(k).transpose() * plus / root;
  }
  return out;
}

/// Subdifferential of h_k at q, in one of three regimes.
struct SubgradientElement {
  enum class Kind {
    differentiable,  ///< some residual > 0; `element` is the gradient
    kink,            ///< residual <= 0 with zeros; set {-A_k' s : s >= 0, |s| <= 1, supp s in zero_rows}
    flat,            ///< every residual < 0; gradient is zero
  };
  Kind kind = Kind::flat;
  Vector element;                     ///< gradient, or the canonical element (s = 0)
  std::vector<std::size_t> zero_rows;  ///< rows with residual exactly zero (kink only)
};

inline SubgradientElement subgradient_element(const NormalizedProblem& problem, std::size_t k, const Vector& q) {
  const Vector r = problem.residual(k, q);
  const Vector plus = r.cwiseMax(0.0);
  SubgradientElement out;
  const double norm = plus.norm();
  if (norm > 0.0) {
    out.kind = SubgradientElement::Kind::differentiable;
    out.element = -(problem.block(k).transpose() * plus) / norm;
    return out;
  }
  out.element = Vector::Zero(q.size());
  for (Eigen::Index n = 0; n < r.size(); ++n)
    if (r(n) == 0.0) out.zero_rows.push_back(static_cast<std::size_t>(n));
  out.kind = out.zero_rows.empty() ? SubgradientElement::Kind::flat : SubgradientElement::Kind::kink;
  return out;
}

inline constexpr std::size_t kNonmonotoneMemory = 10;

inline Vector project_box(const Vector& q) { return q.cwiseMax(0.0).cwiseMin(1.0); }

struct SolverOutput {
  Vector q;
  double objective = 0.0;
  std::vector<std::size_t> stages;         ///< iterations per smoothing level
  std::vector<double> stage_objectives;     ///< nonsmooth objective at each stage output
  std::size_t gradient_evals = 0;
  bool polished = false;
};

/// Exact refinement of the links that look supported at q.
///
/// Links with largest residual <= tol are moved to the least point that
/// satisfies their sampled constraints, holding every other link's power
/// fixed. Smoothing leaves supported links a residual of order mu * alpha;
/// this removes it. Returns the refined point only if the nonsmooth
/// objective does not increase.
inline std::optional<Vector> polish_support(const NormalizedProblem& problem, const Vector& q, double alpha,
                                            double tol) {
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < problem.links(); ++k)
    if (problem.residual(k, q).maxCoeff() <= tol) active.push_back(k);
  if (active.empty()) return std::nullopt;

  Vector x = q;
  for (auto k : active) x(static_cast<Eigen::Index>(k)) = 0.0;
  for (std::size_t t = 0; t < kFixedPointMaxIter; ++t) {
    double step = 0.0;
    Vector next = x;
    for (auto k : active) {
      const auto kk = static_cast<Eigen::Index>(k);
      next(kk) = std::min(problem.residual(k, x).maxCoeff() + x(kk), 1.0);
      step = std::max(step, std::abs(next(kk) - x(kk)));
    }
    x.swap(next);
    if (step <= kFixedPointTol) break;
  }
  for (auto k : active)
    if (problem.residual(k, x).maxCoeff() > kFeasibilityTol) return std::nullopt;
  if (objective(problem, x, alpha) > objective(problem, q, alpha)) return std::nullopt;
  return x;
}

/// Projected alternating Barzilai-Borwein on the smoothed objective, with
/// continuation in mu and a warm start at each level. Starts from q = e
/// unless `start` is given.
inline SolverOutput solve_pabb(const NormalizedProblem& problem, const RelaxationParams& params,
                               std::optional<Vector> start = std::nullopt) {
  params.validate();
  const auto K = static_cast<Eigen::Index>(problem.links());
  SolverOutput out;
  Vector x = start ? project_box(*start) : Vector::Ones(K);
  if (K == 0) {
    out.q = x;
    return out;
  }

  for (const double mu : params.schedule()) {
    SmoothedEval ev = smoothed_objective_gradient(problem, x, params.alpha, mu);
    ++out.gradient_evals;
    Vector best = x;
    double best_value = ev.value;

    const double gmax = ev.gradient.lpNorm<Eigen::Infinity>();
    double step = gmax > 0.0 ? 1.0 / gmax : 1.0;
    std::deque<double> recent{ev.value};
    std::size_t it = 0;
    for (; it < params.max_iter_per_stage; ++it) {
      const Vector d = project_box(x - step * ev.gradient) - x;
      if ((x - project_box(x - ev.gradient)).lpNorm<Eigen::Infinity>() <= params.grad_tol) break;

      // Nonmonotone acceptance against the worst of the recent values;
      // the full BB step is almost always taken.
      const double reference = *std::max_element(recent.begin(), recent.end());
      const double slope = ev.gradient.dot(d);
      double lambda = 1.0;
      Vector x_new = x + d;
      SmoothedEval ev_new = smoothed_objective_gradient(problem, x_new, params.alpha, mu);
      ++out.gradient_evals;
      while (ev_new.value > reference + 1e-4 * lambda * slope && lambda > 1e-10) {
        lambda *= 0.5;
        x_new = x + lambda * d;
        ev_new = smoothed_objective_gradient(problem, x_new, params.alpha, mu);
        ++out.gradient_evals;
      }

      const Vector s = x_new - x;
      Vector y = ev_new.gradient - ev.gradient;
      // Coordinates held at a bound did not move; their gradient change
      // would only shrink the short step.
      for (Eigen::Index i = 0; i < K; ++i)
        if (s(i) == 0.0 && (x_new(i) <= 0.0 || x_new(i) >= 1.0)) y(i) = 0.0;
      const double sty = s.dot(y);
      if (sty > 0.0) {
        // Even iterations take the long step s's/s'y, odd ones the short s'y/y'y.
        step = (it % 2 == 0) ? s.squaredNorm() / sty : sty / y.squaredNorm();
        step = std::clamp(step, 1e-12, 1e12);
      }
      x.swap(x_new);
      ev = std::move(ev_new);
      recent.push_back(ev.value);
      if (recent.size() > kNonmonotoneMemory) recent.pop_front();
      if (ev.value < best_value) {
        best_value = ev.value;
        best = x;
      }
    }
    x = best;
    out.stages.push_back(it);
    out.stage_objectives.push_back(objective(problem, x, params.alpha));
  }

  if (params.polish_tol > 0.0) {
    if (auto refined = polish_support(problem, x, params.alpha, params.polish_tol)) {
      x = *refined;
      out.polished = true;
    }
  }
  out.q = x;
  out.objective = objective(problem, x, params.alpha);
  return out;
}

/// Projected subgradient method on the nonsmooth objective with step
/// length step0 / sqrt(t) along the normalized canonical subgradient.
/// Keeps the best iterate. Starts from q = e.
inline SolverOutput solve_subgradient(const NormalizedProblem& problem, double alpha, double step0,
                                      std::size_t iters) {
  if (!(step0 > 0.0)) throw std::invalid_argument("solve_subgradient: step0 must be positive");
  const auto K = static_cast<Eigen::Index>(problem.links());
  SolverOutput out;
  Vector x = project_box(Vector::Ones(K));
  Vector best = x;
  double best_value = objective(problem, x, alpha);
  std::size_t t = 0;
  for (; t < iters; ++t) {
    Vector g = alpha * problem.budget();
    double value = alpha * problem.budget().dot(x);
    for (std::size_t k = 0; k < problem.links(); ++k) {
      const Vector plus = problem.residual(k, x).cwiseMax(0.0);
      const double norm = plus.norm();
      value += norm;
      if (norm > 0.0) g.noalias() -= problem.block(k).transpose() * plus / norm;
    }
    ++out.gradient_evals;
    if (value < best_value) {
      best_value = value;
      best = x;
    }
    // Components pushing against an active bound are dropped before
    // normalizing, so clipped coordinates do not shrink the useful step.
    for (Eigen::Index i = 0; i < K; ++i)
      if ((x(i) >= 1.0 && g(i) < 0.0) || (x(i) <= 0.0 && g(i) > 0.0)) g(i) = 0.0;
    const double gnorm = g.norm();
    if (gnorm == 0.0) break;  // zero tangent subgradient: x is optimal
    x = project_box(x - (step0 / std::sqrt(static_cast<double>(t + 1))) * g / gnorm);
  }
  const double last = objective(problem, x, alpha);
  if (last < best_value) {
    best_value = last;
    best = x;
  }
  out.stages.push_back(t);
  out.stage_objectives.push_back(best_value);
  out.q = best;
  out.objective = best_value;
  return out;
}

}  // namespace jpac
