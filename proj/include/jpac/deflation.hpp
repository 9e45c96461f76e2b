#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "jpac/channel.hpp"
#include "jpac/power_control.hpp"
#include "jpac/relaxation.hpp"

namespace jpac {

/// Column-sum test that every link set able to be supported must pass:
///   sum(mu_plus) - (mu_minus' c_max + sum of all c) >= 0,  mu = A' e.
struct NecessaryConditionReport {
  Vector mu;
  Vector mu_plus;
  Vector mu_minus;
  Vector c_max;
  double slack = 0.0;
  bool holds = false;
};

inline NecessaryConditionReport necessary_condition(const NormalizedProblem& problem) {
  if (problem.links() == 0) throw std::invalid_argument("necessary_condition: empty link set");
  const auto K = static_cast<Eigen::Index>(problem.links());
  NecessaryConditionReport r;
  r.mu = Vector::Zero(K);
  r.c_max.resize(K);
  double c_total = 0.0;
  for (std::size_t k = 0; k < problem.links(); ++k) {
    r.mu += problem.block(k).colwise().sum().transpose();
    r.c_max(static_cast<Eigen::Index>(k)) = problem.noise(k).maxCoeff();
    c_total += problem.noise(k).sum();
  }
  r.mu_plus = r.mu.cwiseMax(0.0);
  r.mu_minus = (-r.mu).cwiseMax(0.0);
  r.slack = r.mu_plus.sum() - (r.mu_minus.dot(r.c_max) + c_total);
  r.holds = r.slack >= 0.0;
  return r;
}

/// Index maximizing score; first index wins ties.
inline std::size_t argmax_first(const std::vector<double>& score) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < score.size(); ++k)
    if (score[k] > score[best]) best = k;
  return best;
}

/// Averaged-channel removal scores (SMART rule at full power):
/// caused plus received average cross coupling plus average noise.
inline std::vector<double> smart_scores(const NormalizedProblem& problem) {
  const std::size_t K = problem.links();
  const double N = static_cast<double>(problem.samples());
  Matrix abar(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  std::vector<double> cbar(K);
  for (std::size_t k = 0; k < K; ++k) {
    abar.row(static_cast<Eigen::Index>(k)) = problem.block(k).colwise().sum() / N;
    cbar[k] = problem.noise(k).sum() / N;
  }
  std::vector<double> score(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    double s = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      if (j == k) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      s += std::abs(abar(kk, jj)) + std::abs(abar(jj, kk));
    }
    score[k] = s + cbar[k];
  }
  return score;
}

inline std::size_t smart_removal(const NormalizedProblem& problem) {
  if (problem.links() < 2) throw std::invalid_argument("smart_removal: need at least two links");
  return argmax_first(smart_scores(problem));
}

enum class RemovalStrategy { footprint, excess, violation };

inline std::string_view to_string(RemovalStrategy s) {
  switch (s) {
    case RemovalStrategy::footprint: return "footprint";
    case RemovalStrategy::excess: return "excess";
    case RemovalStrategy::violation: return "violation";
  }
  return "?";
}

/// Per-link removal scores at a relaxation solution q.
///
/// Every score is evaluated at each link's worst sample row
/// (argmax of c_k - A_k q, first row on ties).
inline std::vector<double> removal_scores(const NormalizedProblem& problem, const Vector& q, RemovalStrategy strategy) {
  const std::size_t K = problem.links();
  std::vector<std::size_t> worst(K);
  std::vector<double> excess(K);
  std::vector<double> violation(K);
  bool any_violated = false;
  for (std::size_t k = 0; k < K; ++k) {
    const Vector r = problem.residual(k, q);
    const auto [m, at] = max_with_index(r);
    worst[k] = at;
    excess[k] = std::max(m, 0.0);
    violation[k] = r.cwiseMax(0.0).norm();
    any_violated = any_violated || m > 0.0;
  }
  if (!any_violated) throw std::invalid_argument("removal_select: every link is already satisfied");

  // |a^{n_k}_{k,j}| for the worst row n_k of link k.
  auto coupling = [&](std::size_t k, std::size_t j) {
    return std::abs(problem.block(k)(static_cast<Eigen::Index>(worst[k]), static_cast<Eigen::Index>(j)));
  };

  std::vector<double> score(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    switch (strategy) {
      case RemovalStrategy::footprint: {
        double s = problem.noise(k)(static_cast<Eigen::Index>(worst[k]));
        for (std::size_t j = 0; j < K; ++j) {
          if (j == k) continue;
          s += coupling(k, j) * q(static_cast<Eigen::Index>(j)) + coupling(j, k) * q(kk);
        }
        score[k] = s;
        break;
      }
      case RemovalStrategy::excess: {
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
          if (j == k) continue;
          s += coupling(k, j) * excess[j] + coupling(j, k) * excess[k];
        }
        score[k] = s;
        break;
      }
      case RemovalStrategy::violation: score[k] = violation[k]; break;
    }
  }
  return score;
}

inline std::size_t removal_select(const NormalizedProblem& problem, const Vector& q, RemovalStrategy strategy) {
  return argmax_first(removal_scores(problem, q, strategy));
}

enum class RelaxationSolver { pabb, subgradient };

struct DeflationConfig {
  RemovalStrategy strategy = RemovalStrategy::footprint;
  RelaxationSolver solver = RelaxationSolver::pabb;
  /// Schedule and safety factors; alpha itself is recomputed per subproblem.
  RelaxationParams params;
  double subgradient_step0 = 1.0;
  std::size_t subgradient_iters = 20000;
  /// Largest residual at which a relaxation solution counts as supporting
  /// every remaining link.
  double tol_feas = 1e-6;
};

enum class RemovalPhase { preprocess, admission };

inline std::string_view to_string(RemovalPhase p) {
  return p == RemovalPhase::preprocess ? "preprocess" : "admission";
}

struct Removal {
  std::size_t link = 0;
  RemovalPhase phase = RemovalPhase::preprocess;
  double score = 0.0;
};

struct DeflationResult {
  LinkSet supported;
  Vector q;  ///< normalized powers, aligned with `supported`
  double total_power = 0.0;
  std::vector<Removal> removals;
  LinkSet readmitted;
  std::vector<double> stage_objectives;
  double wall_time = 0.0;  ///< seconds

  /// Links removed and not readmitted.
  LinkSet removed() const {
    LinkSet out;
    for (const auto& r : removals)
      if (std::find(readmitted.begin(), readmitted.end(), r.link) == readmitted.end()) out.push_back(r.link);
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct PostprocessResult {
  LinkSet supported;
  LinkSet readmitted;
  LinkSet dropped;
};

/// Greedy re-admission: each round prices every remaining removed link by
/// the minimum total power needed to add it, permanently drops the ones
/// that cannot be added, and admits the cheapest.
inline PostprocessResult postprocess(const NormalizedProblem& problem, LinkSet supported, LinkSet removed) {
  PostprocessResult out;
  std::sort(supported.begin(), supported.end());
  std::sort(removed.begin(), removed.end());
  while (!removed.empty()) {
    std::vector<double> cost(removed.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < removed.size(); ++i) {
      LinkSet trial = supported;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), removed[i]), removed[i]);
      const auto f = check_feasibility(problem, trial);
      if (f.feasible) cost[i] = *f.total_power;
    }
    LinkSet keep;
    std::vector<double> keep_cost;
    for (std::size_t i = 0; i < removed.size(); ++i) {
      if (std::isinf(cost[i])) {
        out.dropped.push_back(removed[i]);
      } else {
        keep.push_back(removed[i]);
        keep_cost.push_back(cost[i]);
      }
    }
    removed = std::move(keep);
    if (removed.empty()) break;
    std::size_t best = 0;
    for (std::size_t i = 1; i < keep_cost.size(); ++i)
      if (keep_cost[i] < keep_cost[best]) best = i;
    const std::size_t j = removed[best];
    supported.insert(std::upper_bound(supported.begin(), supported.end(), j), j);
    out.readmitted.push_back(j);
    removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(best));
  }
  out.supported = std::move(supported);
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

/// Relaxation-guided deflation:
///  1. drop links that cannot meet their own worst sample at full budget;
///  2. while the column-sum condition fails, drop the SMART-rule link;
///  3. solve the relaxation; stop once it supports every remaining link;
///  4. otherwise drop the link picked by `config.strategy` and resolve;
///  5. try to re-admit removed links.
inline DeflationResult deflate(const NormalizedProblem& problem, const DeflationConfig& config = {}) {
  const auto started = std::chrono::steady_clock::now();
  DeflationResult result;
  LinkSet alive;
  for (std::size_t k = 0; k < problem.links(); ++k) {
    const double cmax = problem.noise(k).maxCoeff();
    if (cmax > 1.0)
      result.removals.push_back({k, RemovalPhase::preprocess, cmax});
    else
      alive.push_back(k);
  }

  auto drop = [&](std::size_t local, RemovalPhase phase, double score) {
    result.removals.push_back({alive[local], phase, score});
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(local));
  };

  while (!alive.empty()) {
    const NormalizedProblem sub = problem.restrict(alive);
    if (necessary_condition(sub).holds) break;
    if (alive.size() == 1) {
      drop(0, RemovalPhase::preprocess, 0.0);
      break;
    }
    const auto scores = smart_scores(sub);
    const std::size_t local = argmax_first(scores);
    drop(local, RemovalPhase::preprocess, scores[local]);
  }

  while (!alive.empty()) {
    const NormalizedProblem sub = problem.restrict(alive);
    RelaxationParams params = config.params;
    const RelaxationParams bounds = alpha_bounds(sub, params.c1, params.c2);
    params.alpha = bounds.alpha;
    params.alpha1 = bounds.alpha1;
    params.alpha2 = bounds.alpha2;

    SolverOutput solved;
    if (config.solver == RelaxationSolver::pabb) {
      solved = solve_pabb(sub, params);
    } else {
      solved = solve_subgradient(sub, params.alpha, config.subgradient_step0, config.subgradient_iters);
      if (params.polish_tol > 0.0)
        if (auto refined = polish_support(sub, solved.q, params.alpha, params.polish_tol)) {
          solved.q = *refined;
          solved.objective = objective(sub, solved.q, params.alpha);
          solved.polished = true;
        }
    }
    result.stage_objectives.push_back(solved.objective);

    LinkSet all_local(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i) all_local[i] = i;
    if (sub.max_residual(solved.q) <= config.tol_feas && check_feasibility(sub, all_local).feasible) break;

    const auto scores = removal_scores(sub, solved.q, config.strategy);
    const std::size_t local = argmax_first(scores);
    drop(local, RemovalPhase::admission, scores[local]);
  }

  LinkSet removed;
  for (const auto& r : result.removals) removed.push_back(r.link);
  auto post = postprocess(problem, alive, removed);
  result.supported = std::move(post.supported);
  result.readmitted = std::move(post.readmitted);

  const auto certified = check_feasibility(problem, result.supported);
  if (!certified.feasible) throw std::logic_error("deflate: supported set failed certification");
  result.q = *certified.q_min;
  result.total_power = *certified.total_power;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace jpac
