#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "jpac/channel.hpp"
#include "jpac/deflation.hpp"
#include "jpac/power_control.hpp"

namespace jpac {

enum class Algorithm { pabb_d, subgrad_d, benchmark_nlpd };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::pabb_d: return "pabb-d";
    case Algorithm::subgrad_d: return "subgrad-d";
    case Algorithm::benchmark_nlpd: return "benchmark-nlpd";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "pabb-d" || s == "pabb") return Algorithm::pabb_d;
  if (s == "subgrad-d" || s == "subgrad") return Algorithm::subgrad_d;
  if (s == "benchmark-nlpd" || s == "benchmark") return Algorithm::benchmark_nlpd;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

struct BenchRecord {
  std::size_t K = 0;
  double spread = 0.0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  Algorithm algo = Algorithm::pabb_d;
  std::size_t supported = 0;
  double power_w = 0.0;
  double time_s = 0.0;
};

struct BenchConfig {
  std::vector<std::size_t> links{4};
  std::vector<double> spreads{0.0, 0.1, 0.2};
  std::size_t runs = 200;
  /// Sample count; when unset, required_sample_size(epsilon, delta, k_supported).
  std::optional<std::size_t> samples;
  double epsilon = 0.1;
  double delta = 0.05;
  std::size_t k_supported = 10;
  std::uint64_t master_seed = 1;
  /// Empty: benchmark at S = 0 and PABB-D elsewhere (one cell per (K, S)).
  std::vector<Algorithm> algorithms;
  Geometry geometry;
  double gamma_db = 2.0;
  double noise_dbm = -90.0;
  DeflationConfig deflation;
  unsigned jobs = 1;
  bool timings = false;
  /// Called once per record with the problem deflate saw and its result.
  /// Calls are serialized but arrive in completion order.
  std::function<void(const BenchRecord&, const NormalizedProblem&, const DeflationResult&)> observer;

  std::size_t sample_count() const { return samples ? *samples : required_sample_size(epsilon, delta, k_supported); }

  std::vector<Algorithm> algorithms_for(double spread) const {
    if (!algorithms.empty()) return algorithms;
    return {spread == 0.0 ? Algorithm::benchmark_nlpd : Algorithm::pabb_d};
  }

  void validate() const {
    if (runs < 1) throw std::invalid_argument("bench: runs must be >= 1");
    if (links.empty() || spreads.empty()) throw std::invalid_argument("bench: need at least one K and one S");
    for (auto k : links)
      if (k < 1) throw std::invalid_argument("bench: K must be >= 1");
    for (auto s : spreads)
      if (!(s >= 0.0 && s < 1.0)) throw std::invalid_argument("bench: spread S must satisfy 0 <= S < 1");
    if (samples && *samples < 1) throw std::invalid_argument("bench: N must be >= 1");
    if (jobs < 1) throw std::invalid_argument("bench: jobs must be >= 1");
  }
};

struct BenchCell {
  std::size_t K = 0;
  double spread = 0.0;
  Algorithm algo = Algorithm::pabb_d;
  std::size_t runs = 0;
  std::map<std::size_t, std::size_t> histogram;  ///< supported count -> occurrences
  std::string distribution;
  double mean_supported = 0.0;
  double mean_power = 0.0;
  double mean_time = 0.0;
};

struct BenchSummary {
  std::vector<BenchCell> cells;
};

/// Seeds of run `run` at link count K. The sample seed is shared by every
/// spread, so cells at different S perturb the same nominal network with
/// the same normalized draws.
inline std::uint64_t nominal_seed(std::uint64_t master, std::size_t K, std::size_t run) {
  return derive_seed(master, {K, run, 0});
}
inline std::uint64_t perturbation_seed(std::uint64_t master, std::size_t K, std::size_t run) {
  return derive_seed(master, {K, run, 1});
}

/// "total=v1*n1+v2*n2+..." over supported counts in ascending order.
inline std::string distribution_string(const std::map<std::size_t, std::size_t>& histogram) {
  std::size_t total = 0;
  for (const auto& [v, n] : histogram) total += v * n;
  std::ostringstream os;
  os << total << '=';
  bool first = true;
  for (const auto& [v, n] : histogram) {
    if (n == 0) continue;
    if (!first) os << '+';
    os << v << '*' << n;
    first = false;
  }
  return os.str();
}

inline BenchSummary summarize(const std::vector<BenchRecord>& records) {
  BenchSummary summary;
  for (const auto& r : records) {
    auto it = std::find_if(summary.cells.begin(), summary.cells.end(), [&](const BenchCell& c) {
      return c.K == r.K && c.spread == r.spread && c.algo == r.algo;
    });
    if (it == summary.cells.end()) {
      BenchCell cell;
      cell.K = r.K;
      cell.spread = r.spread;
      cell.algo = r.algo;
      summary.cells.push_back(std::move(cell));
      it = std::prev(summary.cells.end());
    }
    ++it->runs;
    ++it->histogram[r.supported];
    it->mean_supported += static_cast<double>(r.supported);
    it->mean_power += r.power_w;
    it->mean_time += r.time_s;
  }
  for (auto& c : summary.cells) {
    const double n = static_cast<double>(c.runs);
    c.mean_supported /= n;
    c.mean_power /= n;
    c.mean_time /= n;
    c.distribution = distribution_string(c.histogram);
  }
  return summary;
}

/// The problem an algorithm works on: the benchmark sees only the nominal
/// channel, the others the full sample set.
inline NormalizedProblem problem_for(Algorithm algo, const NominalChannel& nominal, const SampleSet& samples) {
  if (algo == Algorithm::benchmark_nlpd) return normalize(sample_perturbed(nominal, 1, 0.0, 0), nominal);
  return normalize(samples, nominal);
}

inline DeflationResult run_algorithm(Algorithm algo, const NormalizedProblem& problem, const DeflationConfig& base) {
  DeflationConfig cfg = base;
  cfg.solver = algo == Algorithm::subgrad_d ? RelaxationSolver::subgradient : RelaxationSolver::pabb;
  return deflate(problem, cfg);
}

/// Runs one algorithm on an already generated instance.
inline DeflationResult run_algorithm(Algorithm algo, const NominalChannel& nominal, const SampleSet& samples,
                                     const DeflationConfig& base) {
  return run_algorithm(algo, problem_for(algo, nominal, samples), base);
}

struct BenchOutput {
  std::vector<BenchRecord> records;
  BenchSummary summary;
};

/// Monte-Carlo harness. Work is split by (K, run); every task generates its
/// nominal network once and evaluates all (S, algorithm) cells on it.
/// Records come back ordered by (K, S, run, algorithm) whatever `jobs` is.
inline BenchOutput run_montecarlo(const BenchConfig& config) {
  config.validate();
  const std::size_t N = config.sample_count();

  struct Task {
    std::size_t K;
    std::size_t run;
  };
  std::vector<Task> tasks;
  for (auto K : config.links)
    for (std::size_t run = 0; run < config.runs; ++run) tasks.push_back({K, run});

  std::vector<std::vector<BenchRecord>> per_task(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::mutex observer_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const auto [K, run] = tasks[i];
        const std::uint64_t seed = nominal_seed(config.master_seed, K, run);
        const NominalChannel nominal =
            generate_nominal(K, seed, config.geometry, config.gamma_db, config.noise_dbm);
        for (double spread : config.spreads) {
          const SampleSet samples =
              sample_perturbed(nominal, N, spread, perturbation_seed(config.master_seed, K, run));
          for (Algorithm algo : config.algorithms_for(spread)) {
            const NormalizedProblem problem = problem_for(algo, nominal, samples);
            const DeflationResult res = run_algorithm(algo, problem, config.deflation);
            BenchRecord rec{K, spread, run, seed, algo, res.supported.size(), res.total_power, 0.0};
            if (config.timings) rec.time_s = res.wall_time;
            per_task[i].push_back(rec);
            if (config.observer) {
              std::lock_guard lock(observer_mutex);
              config.observer(rec, problem, res);
            }
          }
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    const unsigned n = std::min<unsigned>(config.jobs, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);

  BenchOutput out;
  for (std::size_t ki = 0; ki < config.links.size(); ++ki)
    for (double spread : config.spreads)
      for (std::size_t run = 0; run < config.runs; ++run)
        for (const auto& rec : per_task[ki * config.runs + run])
          if (rec.spread == spread) out.records.push_back(rec);
  out.summary = summarize(out.records);
  return out;
}

/// Empirical outage of each supported link on fresh perturbed channels.
///
/// Fresh channels come from the same generator as the training samples,
/// drawn in batches of `batch` perturbed slices so the per-entry
/// normalization matches the training set (batch = N - 1). A link is in
/// outage when its normalized shortfall c_k - (A_k q)_k exceeds the
/// certification tolerance, i.e. its SINR falls below target.
inline std::vector<double> estimate_outage(const NominalChannel& nominal, const LinkSet& supported, const Vector& q,
                                           double spread, std::size_t fresh_samples, std::uint64_t seed,
                                           std::size_t batch = 199) {
  if (fresh_samples < 1) throw std::invalid_argument("estimate_outage: fresh_samples must be >= 1");
  if (batch < 1) throw std::invalid_argument("estimate_outage: batch must be >= 1");
  if (static_cast<std::size_t>(q.size()) != supported.size())
    throw std::invalid_argument("estimate_outage: q must align with the supported set");

  const auto K = static_cast<Eigen::Index>(nominal.K);
  Vector p = Vector::Zero(K);
  for (std::size_t a = 0; a < supported.size(); ++a) {
    const auto k = static_cast<Eigen::Index>(supported[a]);
    p(k) = nominal.budget(k) * q(static_cast<Eigen::Index>(a));
  }

  std::vector<std::size_t> outages(supported.size(), 0);
  std::size_t drawn = 0;
  for (std::uint64_t b = 0; drawn < fresh_samples; ++b) {
    const SampleSet fresh = sample_perturbed(nominal, batch + 1, spread, derive_seed(seed, {b}));
    for (std::size_t n = 1; n <= batch && drawn < fresh_samples; ++n, ++drawn) {
      const Matrix& g = fresh.gains[n];
      for (std::size_t a = 0; a < supported.size(); ++a) {
        const auto k = static_cast<Eigen::Index>(supported[a]);
        const double interference = g.row(k).dot(p) - g(k, k) * p(k);
        const double needed = nominal.sinr_target(k) * (fresh.noise[n](k) + interference) / (g(k, k) * nominal.budget(k));
        if (needed - p(k) / nominal.budget(k) > kFeasibilityTol) ++outages[a];
      }
    }
  }
  std::vector<double> rate(supported.size());
  for (std::size_t a = 0; a < supported.size(); ++a)
    rate[a] = static_cast<double>(outages[a]) / static_cast<double>(fresh_samples);
  return rate;
}

}  // namespace jpac
