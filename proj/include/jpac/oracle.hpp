#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "jpac/channel.hpp"
#include "jpac/power_control.hpp"

namespace jpac {

struct OracleResult {
  std::size_t m_star = 0;
  std::vector<LinkSet> best_sets;  ///< every feasible set of size m_star, ascending bitmask order
  double min_power = 0.0;          ///< watts, minimum over best_sets
  std::map<LinkSet, double> power_per_set;
  Vector min_power_q;              ///< full-length normalized powers of the cheapest best set
  std::size_t subsets_checked = 0;
};

inline LinkSet links_of(std::uint32_t mask) {
  LinkSet out;
  for (std::size_t k = 0; mask != 0; ++k, mask >>= 1)
    if (mask & 1u) out.push_back(k);
  return out;
}

/// Exhaustive maximum admissible set. Sizes are scanned from K downwards;
/// the first size with a feasible subset is m_star, so every larger subset
/// has already been checked infeasible and no smaller one is visited.
inline OracleResult enumerate_optimal(const NormalizedProblem& problem, std::size_t max_k = 12) {
  const std::size_t K = problem.links();
  if (K > max_k) throw std::invalid_argument("enumerate_optimal: K exceeds the enumeration cap");
  if (K >= 32) throw std::invalid_argument("enumerate_optimal: K too large for bitmask enumeration");

  OracleResult out;
  out.min_power_q = Vector::Zero(static_cast<Eigen::Index>(K));
  const std::uint32_t full = K == 0 ? 0u : ((1u << K) - 1u);
  for (std::size_t size = K; size >= 1; --size) {
    double best_power = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask <= full && mask != 0; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
      const LinkSet set = links_of(mask);
      ++out.subsets_checked;
      const auto f = check_feasibility(problem, set);
      if (!f.feasible) continue;
      out.best_sets.push_back(set);
      out.power_per_set[set] = *f.total_power;
      if (*f.total_power < best_power) {
        best_power = *f.total_power;
        out.min_power_q.setZero();
        for (std::size_t a = 0; a < set.size(); ++a)
          out.min_power_q(static_cast<Eigen::Index>(set[a])) = (*f.q_min)(static_cast<Eigen::Index>(a));
      }
    }
    if (!out.best_sets.empty()) {
      out.m_star = size;
      out.min_power = best_power;
      return out;
    }
  }
  return out;
}

}  // namespace jpac
