#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jpac/rng.hpp"

namespace jpac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered set of link indices (0-based, ascending, no duplicates).
using LinkSet = std::vector<std::size_t>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct LinkPosition {
  Point tx;
  Point rx;
};

/// Placement of links: transmitters uniform on a square, each receiver
/// uniform (by area) on an annulus around its own transmitter.
struct Geometry {
  double area_side_m = 2000.0;
  double rx_min_m = 10.0;
  double rx_max_m = 400.0;
};

/// Deterministic network. gains_hat(k, j) is the path gain from
/// transmitter j to receiver k. Noise and budget in watts, targets linear.
struct NominalChannel {
  std::size_t K = 0;
  Matrix gains_hat;
  Vector noise_hat;
  Vector sinr_target;
  Vector budget;
  std::vector<LinkPosition> positions;

  void validate() const {
    const auto k = static_cast<Eigen::Index>(K);
    if (gains_hat.rows() != k || gains_hat.cols() != k || noise_hat.size() != k ||
        sinr_target.size() != k || budget.size() != k || (!positions.empty() && positions.size() != K))
      throw std::invalid_argument("NominalChannel: inconsistent dimensions");
    if (K > 0 && (gains_hat.minCoeff() <= 0.0 || noise_hat.minCoeff() <= 0.0 ||
                  sinr_target.minCoeff() <= 0.0 || budget.minCoeff() <= 0.0))
      throw std::invalid_argument("NominalChannel: gains, noise, targets and budgets must be positive");
  }
};

/// N realizations of the channel. gains[n](k, j), noise[n](k).
struct SampleSet {
  std::size_t K = 0;
  std::size_t N = 0;
  std::vector<Matrix> gains;
  std::vector<Vector> noise;
  double spread = 0.0;

  void validate() const {
    if (gains.size() != N || noise.size() != N)
      throw std::invalid_argument("SampleSet: slice count differs from N");
    const auto k = static_cast<Eigen::Index>(K);
    for (std::size_t n = 0; n < N; ++n) {
      if (gains[n].rows() != k || gains[n].cols() != k || noise[n].size() != k)
        throw std::invalid_argument("SampleSet: slice has wrong shape");
      if (K > 0 && (gains[n].minCoeff() <= 0.0 || noise[n].minCoeff() <= 0.0))
        throw std::invalid_argument("SampleSet: entries must be strictly positive");
    }
  }
};

/// Stacked normalized constraints A_k q >= c_k, one N×K block per link.
///
/// Column k of block k is all ones and every other entry of block k is
/// nonpositive; every entry of c_k is positive. The constructor enforces
/// these, so any instance reaching a solver is well formed.
class NormalizedProblem {
 public:
  NormalizedProblem() = default;

  NormalizedProblem(std::vector<Matrix> blocks, std::vector<Vector> noise_blocks, Vector budget)
      : blocks_(std::move(blocks)), noise_(std::move(noise_blocks)), budget_(std::move(budget)) {
    const std::size_t K = blocks_.size();
    if (noise_.size() != K || static_cast<std::size_t>(budget_.size()) != K)
      throw std::invalid_argument("NormalizedProblem: block counts disagree");
    if (K == 0) return;
    N_ = static_cast<std::size_t>(blocks_[0].rows());
    if (N_ == 0) throw std::invalid_argument("NormalizedProblem: zero samples");
    for (std::size_t k = 0; k < K; ++k) {
      const Matrix& A = blocks_[k];
      if (static_cast<std::size_t>(A.rows()) != N_ || static_cast<std::size_t>(A.cols()) != K ||
          static_cast<std::size_t>(noise_[k].size()) != N_)
        throw std::invalid_argument("NormalizedProblem: block has wrong shape");
      for (Eigen::Index n = 0; n < A.rows(); ++n) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
          const double a = A(n, j);
          if (static_cast<std::size_t>(j) == k ? a != 1.0 : !(a <= 0.0))
            throw std::invalid_argument("NormalizedProblem: block " + std::to_string(k) +
                                        " violates the unit-diagonal / nonpositive structure");
        }
        if (!(noise_[k](n) > 0.0))
          throw std::invalid_argument("NormalizedProblem: noise entries must be positive");
      }
      if (!(budget_(static_cast<Eigen::Index>(k)) > 0.0))
        throw std::invalid_argument("NormalizedProblem: budgets must be positive");
    }
  }

  std::size_t links() const { return blocks_.size(); }
  std::size_t samples() const { return N_; }
  const Matrix& block(std::size_t k) const { return blocks_[k]; }
  const Vector& noise(std::size_t k) const { return noise_[k]; }
  const Vector& budget() const { return budget_; }

  /// c_k - A_k q.
  Vector residual(std::size_t k, const Vector& q) const { return noise_[k] - blocks_[k] * q; }

  /// Largest entry of c_k - A_k q over every link and sample.
  double max_residual(const Vector& q) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < links(); ++k) worst = std::max(worst, residual(k, q).maxCoeff());
    return worst;
  }

  /// Subproblem on `subset`: keeps those blocks and, inside each, only the
  /// columns of the kept links. Order follows `subset`.
  NormalizedProblem restrict(std::span<const std::size_t> subset) const {
    std::vector<Matrix> blocks;
    std::vector<Vector> noise;
    Vector budget(static_cast<Eigen::Index>(subset.size()));
    blocks.reserve(subset.size());
    noise.reserve(subset.size());
    for (std::size_t a = 0; a < subset.size(); ++a) {
      const std::size_t k = subset[a];
      if (k >= links()) throw std::out_of_range("NormalizedProblem::restrict: link index out of range");
      Matrix A(static_cast<Eigen::Index>(N_), static_cast<Eigen::Index>(subset.size()));
      for (std::size_t b = 0; b < subset.size(); ++b)
        A.col(static_cast<Eigen::Index>(b)) = blocks_[k].col(static_cast<Eigen::Index>(subset[b]));
      blocks.push_back(std::move(A));
      noise.push_back(noise_[k]);
      budget(static_cast<Eigen::Index>(a)) = budget_(static_cast<Eigen::Index>(k));
    }
    return NormalizedProblem(std::move(blocks), std::move(noise), std::move(budget));
  }

 private:
  std::vector<Matrix> blocks_;
  std::vector<Vector> noise_;
  Vector budget_;
  std::size_t N_ = 0;
};

/// Scenario sample count that makes the sampled constraints imply each
/// chance constraint with probability at least 1 - delta.
inline std::size_t required_sample_size(double epsilon, double delta, std::size_t k_supported) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("required_sample_size: epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("required_sample_size: delta must lie in (0,1)");
  if (k_supported < 1) throw std::domain_error("required_sample_size: k_supported must be >= 1");
  const double L = std::log(1.0 / delta);
  const double km1 = static_cast<double>(k_supported - 1);
  const double n = (km1 + L + std::sqrt(2.0 * km1 * L + L * L)) / epsilon;
  // Absorb rounding in log/sqrt so an exact integer bound is not bumped up.
  return static_cast<std::size_t>(std::ceil(n * (1.0 - 1e-12)));
}

inline NominalChannel generate_nominal(std::size_t K, std::uint64_t seed, const Geometry& geometry = {},
                                       double gamma_db = 2.0, double noise_dbm = -90.0) {
  if (K < 1) throw std::invalid_argument("generate_nominal: K must be >= 1");
  if (!(geometry.rx_min_m > 0.0) || !(geometry.rx_max_m > geometry.rx_min_m) || !(geometry.area_side_m > 0.0))
    throw std::invalid_argument("generate_nominal: need 0 < rx_min < rx_max and a positive area");

  Rng rng(seed);
  NominalChannel ch;
  ch.K = K;
  ch.positions.resize(K);
  const double r2lo = geometry.rx_min_m * geometry.rx_min_m;
  const double r2hi = geometry.rx_max_m * geometry.rx_max_m;
  for (auto& link : ch.positions) {
    link.tx = {rng.uniform(0.0, geometry.area_side_m), rng.uniform(0.0, geometry.area_side_m)};
    const double r = std::sqrt(rng.uniform(r2lo, r2hi));
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    link.rx = {link.tx.x + r * std::cos(theta), link.tx.y + r * std::sin(theta)};
  }

  const auto k = static_cast<Eigen::Index>(K);
  ch.gains_hat.resize(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index t = 0; t < k; ++t) {
      const double d = distance(ch.positions[static_cast<std::size_t>(t)].tx, ch.positions[static_cast<std::size_t>(r)].rx);
      ch.gains_hat(r, t) = 1.0 / (d * d * d * d);
    }
  ch.noise_hat = Vector::Constant(k, dbm_to_watts(noise_dbm));
  ch.sinr_target = Vector::Constant(k, db_to_linear(gamma_db));
  ch.budget.resize(k);
  for (Eigen::Index i = 0; i < k; ++i)
    ch.budget(i) = 2.0 * ch.sinr_target(i) * ch.noise_hat(i) / ch.gains_hat(i, i);
  return ch;
}

/// Slice 0 is the nominal channel; slices 1..N-1 scale each gain and noise
/// entry by 1 + S * xi / max|xi|, the maximum taken per entry over the
/// perturbed slices. The xi draws depend only on (K, N, seed), so runs that
/// differ only in S see the same normalized perturbations.
inline SampleSet sample_perturbed(const NominalChannel& nominal, std::size_t N, double spread, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("sample_perturbed: N must be >= 1");
  if (!(spread >= 0.0 && spread < 1.0)) throw std::domain_error("sample_perturbed: spread S must satisfy 0 <= S < 1");

  const std::size_t K = nominal.K;
  const auto k = static_cast<Eigen::Index>(K);
  SampleSet set;
  set.K = K;
  set.N = N;
  set.spread = spread;
  set.gains.assign(N, nominal.gains_hat);
  set.noise.assign(N, nominal.noise_hat);
  if (N == 1) return set;

  Rng rng(seed);
  std::vector<Matrix> xi(N - 1, Matrix(k, k));
  std::vector<Vector> zeta(N - 1, Vector(k));
  for (std::size_t n = 0; n + 1 < N; ++n) {
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c) xi[n](r, c) = rng.normal();
    for (Eigen::Index r = 0; r < k; ++r) zeta[n](r) = rng.normal();
  }
  Matrix xi_max = Matrix::Zero(k, k);
  Vector zeta_max = Vector::Zero(k);
  for (std::size_t n = 0; n + 1 < N; ++n) {
    xi_max = xi_max.cwiseMax(xi[n].cwiseAbs());
    zeta_max = zeta_max.cwiseMax(zeta[n].cwiseAbs());
  }
  auto factor = [spread](double x, double xmax) { return xmax > 0.0 ? 1.0 + spread * (x / xmax) : 1.0; };
  for (std::size_t n = 1; n < N; ++n) {
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c)
        set.gains[n](r, c) = nominal.gains_hat(r, c) * factor(xi[n - 1](r, c), xi_max(r, c));
      set.noise[n](r) = nominal.noise_hat(r) * factor(zeta[n - 1](r), zeta_max(r));
    }
  }
  return set;
}

/// SINR of link k in slice n under power vector p (watts).
inline double sampled_sinr(const SampleSet& samples, std::size_t n, std::size_t k, const Vector& p) {
  const Matrix& g = samples.gains[n];
  const auto kk = static_cast<Eigen::Index>(k);
  const double interference = g.row(kk).dot(p) - g(kk, kk) * p(kk);
  return g(kk, kk) * p(kk) / (samples.noise[n](kk) + interference);
}

inline NormalizedProblem normalize(const SampleSet& samples, const NominalChannel& nominal) {
  if (samples.K != nominal.K) throw std::invalid_argument("normalize: samples and nominal disagree on K");
  const std::size_t K = samples.K;
  const auto k = static_cast<Eigen::Index>(K);
  const auto N = static_cast<Eigen::Index>(samples.N);
  std::vector<Matrix> blocks(K, Matrix(N, k));
  std::vector<Vector> noise(K, Vector(N));
  for (Eigen::Index i = 0; i < k; ++i) {
    const double gamma = nominal.sinr_target(i);
    const double pi = nominal.budget(i);
    auto& A = blocks[static_cast<std::size_t>(i)];
    for (Eigen::Index n = 0; n < N; ++n) {
      const Matrix& g = samples.gains[static_cast<std::size_t>(n)];
      const double direct = g(i, i) * pi;
      noise[static_cast<std::size_t>(i)](n) = gamma * samples.noise[static_cast<std::size_t>(n)](i) / direct;
      for (Eigen::Index j = 0; j < k; ++j)
        A(n, j) = (j == i) ? 1.0 : -gamma * g(i, j) * nominal.budget(j) / direct;
    }
  }
  return NormalizedProblem(std::move(blocks), std::move(noise), nominal.budget);
}

}  // namespace jpac
