#include <gtest/gtest.h>

#include <cmath>

#include "jpac/power_control.hpp"
#include "test_support.hpp"

using namespace jpac;

namespace {

const LinkSet kBoth{0, 1};

}  // namespace

TEST(FixedPoint, TwoLinkExampleConvergesToFullPower) {
  const auto problem = fixtures::two_link_problem(0.5);
  const auto r = fixed_point(problem, kBoth, Vector::Zero(2));
  EXPECT_TRUE(r.feasible);
  EXPECT_NEAR(r.q_final(0), 1.0, 1e-9);
  EXPECT_NEAR(r.q_final(1), 1.0, 1e-9);
  // Second sample row binds for both links.
  ASSERT_EQ(r.binding.size(), 2u);
  EXPECT_EQ(r.binding[0], 1u);
  EXPECT_EQ(r.binding[1], 1u);
  EXPECT_LE(r.residual, kFeasibilityTol);
}

TEST(FixedPoint, SingleLinkOneStep) {
  const auto problem = fixtures::single_link_problem(0.3);
  const auto r = fixed_point(problem, LinkSet{0}, Vector::Zero(1));
  EXPECT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(r.q_final(0), 0.3);
  EXPECT_LE(r.iterations, 2u);
}

TEST(FixedPoint, CapSaturationIsInfeasible) {
  const auto problem = fixtures::two_link_problem(0.8);
  const auto r = fixed_point(problem, kBoth, Vector::Zero(2));
  EXPECT_FALSE(r.feasible);
  EXPECT_DOUBLE_EQ(r.q_final(0), 1.0);
  EXPECT_DOUBLE_EQ(r.q_final(1), 1.0);
  EXPECT_NEAR(r.residual, 0.3, 1e-12);
}

TEST(FixedPoint, Preconditions) {
  const auto problem = fixtures::two_link_problem();
  EXPECT_THROW(fixed_point(problem, LinkSet{}, Vector()), std::invalid_argument);
  EXPECT_THROW(fixed_point(problem, kBoth, Vector::Constant(2, 1.5)), std::invalid_argument);
  EXPECT_THROW(fixed_point(problem, kBoth, Vector::Zero(3)), std::invalid_argument);
}

TEST(FixedPoint, MonotoneFromZero) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto problem = fixtures::random_problem(rng, 5, 6);
    const auto all = fixtures::all_links(5);
    Vector q = Vector::Zero(5);
    for (int t = 0; t < 200; ++t) {
      const auto step = fixed_point(problem, all, q, 0.0, 1);
      EXPECT_TRUE((step.q_final.array() >= q.array() - 1e-15).all());
      q = step.q_final;
    }
  }
}

TEST(FixedPoint, SingleSampleMatchesClassicalUpdate) {
  // One sample: p_k <- min(gamma_k / SINR_k(p) * p_k, pbar_k) on raw gains.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ch = generate_nominal(4, seed);
    const auto samples = sample_perturbed(ch, 1, 0.0, 0);
    const auto problem = normalize(samples, ch);
    const auto all = fixtures::all_links(4);

    Vector p = Vector::Zero(4);
    Vector q = Vector::Zero(4);
    for (int t = 0; t < 50; ++t) {
      Vector next(4);
      for (Eigen::Index k = 0; k < 4; ++k) {
        const double interference = ch.gains_hat.row(k).dot(p) - ch.gains_hat(k, k) * p(k);
        next(k) = std::min(ch.sinr_target(k) * (ch.noise_hat(k) + interference) / ch.gains_hat(k, k), ch.budget(k));
      }
      p = next;
      q = fixed_point(problem, all, q, 0.0, 1).q_final;
      for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(q(k) * ch.budget(k), p(k), 1e-9 * ch.budget(k));
    }
  }
}

TEST(CheckFeasibility, TwoLinkExample) {
  const auto problem = fixtures::two_link_problem(0.5);
  const auto f = check_feasibility(problem, kBoth);
  ASSERT_TRUE(f.feasible);
  EXPECT_NEAR((*f.q_min)(0), 1.0, 1e-9);
  EXPECT_NEAR((*f.q_min)(1), 1.0, 1e-9);
  EXPECT_NEAR(*f.total_power, 2.0, 1e-9);
}

TEST(CheckFeasibility, EmptySubset) {
  const auto f = check_feasibility(fixtures::two_link_problem(), LinkSet{});
  EXPECT_TRUE(f.feasible);
  EXPECT_EQ(*f.total_power, 0.0);
}

TEST(CheckFeasibility, HighNoiseVariant) {
  const auto problem = fixtures::two_link_problem(0.8);
  EXPECT_FALSE(check_feasibility(problem, kBoth).feasible);
  EXPECT_FALSE(check_feasibility(problem, kBoth).q_min.has_value());
  const auto single = check_feasibility(problem, LinkSet{0});
  ASSERT_TRUE(single.feasible);
  EXPECT_NEAR((*single.q_min)(0), 0.8, 1e-12);
  EXPECT_NEAR(*single.total_power, 0.8, 1e-12);
}

TEST(CheckFeasibility, BalancingOnFeasibleSubsets) {
  Rng rng(17);
  int feasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = 2 + trial % 5;
    const auto problem = fixtures::random_problem(rng, K, 1 + trial % 8);
    const auto f = check_feasibility(problem, fixtures::all_links(K));
    if (!f.feasible) continue;
    ++feasible;
    for (std::size_t k = 0; k < K; ++k) {
      const Vector r = problem.residual(k, *f.q_min);
      EXPECT_LE(r.maxCoeff(), kFeasibilityTol);
      EXPECT_LE(std::abs(r(static_cast<Eigen::Index>(f.report->binding[k]))), kFeasibilityTol);
    }
  }
  EXPECT_GT(feasible, 50);
}

TEST(CheckFeasibility, LeastFeasiblePointOnLattice) {
  // No lattice point (step 0.01) componentwise below q_min, and different
  // from it in some coordinate by at least one step, is feasible.
  Rng rng(23);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 10; ++trial) {
    const auto problem = fixtures::random_problem(rng, 2, 3, 0.5, 0.1, 0.5);
    const auto f = check_feasibility(problem, kBoth);
    if (!f.feasible) continue;
    ++checked;
    const Vector qmin = *f.q_min;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        Vector q(2);
        q << 0.01 * i, 0.01 * j;
        if ((q.array() > qmin.array() + 1e-12).any()) continue;
        if ((qmin - q).maxCoeff() < 0.01 - 1e-12) continue;
        EXPECT_GT(problem.max_residual(q), 0.0) << "q = " << q.transpose();
      }
  }
  EXPECT_EQ(checked, 10);
}

TEST(CheckFeasibility, FeasibleSetsAreDownwardClosed) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto problem = fixtures::random_problem(rng, 4, 5);
    if (!check_feasibility(problem, fixtures::all_links(4)).feasible) continue;
    for (std::size_t drop = 0; drop < 4; ++drop) {
      LinkSet s;
      for (std::size_t k = 0; k < 4; ++k)
        if (k != drop) s.push_back(k);
      EXPECT_TRUE(check_feasibility(problem, s).feasible);
    }
  }
}
