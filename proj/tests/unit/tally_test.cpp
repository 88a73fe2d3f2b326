#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "fluid/stats.hpp"
#include "fluid/tally.hpp"
#include "oracles.hpp"

namespace fluid {
namespace {

using Weights = std::vector<std::uint64_t>;
using Probs = std::vector<double>;

TEST(WeightedTail, Examples) {
  EXPECT_NEAR(weighted_poisson_binomial_tail(Weights{1, 1, 1}, Probs{0.5, 0.5, 0.5}, 1.5), 0.5, 1e-15);
  EXPECT_NEAR(weighted_poisson_binomial_tail(Weights{3}, Probs{0.7}, 1.5), 0.7, 1e-15);
  EXPECT_EQ(weighted_poisson_binomial_tail(Weights{0, 0}, Probs{0.3, 0.9}, 1.0), 0.0);
}

TEST(WeightedTail, ThresholdEdges) {
  const Weights w{2, 1, 4};
  const Probs p{0.3, 0.6, 0.2};
  EXPECT_EQ(weighted_poisson_binomial_tail(w, p, 7.0), 0.0);
  EXPECT_EQ(weighted_poisson_binomial_tail(w, p, 100.0), 0.0);
  EXPECT_EQ(weighted_poisson_binomial_tail(w, p, -0.5), 1.0);
  // ties at the threshold count as losses
  EXPECT_NEAR(weighted_poisson_binomial_tail(Weights{1, 1}, Probs{0.5, 0.5}, 1.0), 0.25, 1e-15);
}

TEST(WeightedTail, RejectsBadInput) {
  EXPECT_THROW(weighted_poisson_binomial_tail(Weights{1}, Probs{0.1, 0.2}, 0.5), std::invalid_argument);
  EXPECT_THROW(weighted_poisson_binomial_tail(Weights{1}, Probs{1.2}, 0.5), std::invalid_argument);
  const std::uint64_t huge = std::numeric_limits<std::uint64_t>::max() / 2 + 1;
  EXPECT_THROW(weighted_poisson_binomial_tail(Weights{huge, huge}, Probs{0.5, 0.5}, 1.0),
               std::invalid_argument);
}

TEST(DirectTail, Examples) {
  EXPECT_NEAR(direct_tail(Probs{1, 1, 1}), 1.0, 1e-15);
  EXPECT_NEAR(direct_tail(Probs{0.5, 0.5, 0.5}), 0.5, 1e-15);
  EXPECT_NEAR(direct_tail(Probs{0.6, 0.6, 0.6}), 0.648, 1e-14);
  EXPECT_NEAR(direct_tail(Probs(25, 0.55)), oracle::binomial_upper(25, 0.55, 13), 1e-13);
  EXPECT_NEAR(direct_tail(Probs(24, 0.5)), oracle::binomial_upper(24, 0.5, 13), 1e-13);
}

TEST(BruteForceTail, Examples) {
  EXPECT_NEAR(brute_force_tail(Weights{1}, Probs{0.3}, 0.5), 0.3, 1e-15);
  EXPECT_NEAR(brute_force_tail(Weights{2, 1}, Probs{0.5, 0.5}, 1.5), 0.5, 1e-15);
  EXPECT_THROW(brute_force_tail(Weights(21, 1), Probs(21, 0.5), 10.0), std::invalid_argument);
}

TEST(WeightedTail, MatchesBruteForceAndEnumeration) {
  RandomStream rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Weights w(n);
    Probs p(n);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = rng.below(4);
      p[i] = rng.uniform();
      total += w[i];
    }
    const double threshold = (rng.uniform() * 1.2 - 0.1) * static_cast<double>(total);
    const double dp = weighted_poisson_binomial_tail(w, p, threshold);
    ASSERT_NEAR(dp, brute_force_tail(w, p, threshold), 1e-12);
    ASSERT_NEAR(dp, oracle::enumerate_tail(w, p, threshold), 1e-12);
  }
}

TEST(WeightedTail, MonotoneInCompetence) {
  RandomStream rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    Weights w(n);
    Probs p(n);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = rng.below(5);
      p[i] = rng.uniform();
      total += w[i];
    }
    const double threshold = static_cast<double>(total) / 2.0;
    const double before_f = weighted_poisson_binomial_tail(w, p, threshold);
    const double before_d = direct_tail(p);
    const std::size_t k = rng.below(n);
    p[k] = p[k] + (1.0 - p[k]) * rng.uniform();
    ASSERT_GE(weighted_poisson_binomial_tail(w, p, threshold), before_f - 1e-14);
    ASSERT_GE(direct_tail(p), before_d - 1e-14);
  }
}

TEST(WeightedTail, LargeElectorateIsNormalised) {
  Probs p(20000, 0.5);
  // symmetric binomial with even n: P[X > n/2] = (1 - P[X = n/2]) / 2
  const double center = std::exp(std::lgamma(20001.0) - 2.0 * std::lgamma(10001.0) - 20000.0 * std::log(2.0));
  EXPECT_NEAR(direct_tail(p), (1.0 - center) / 2.0, 1e-12);
}

TEST(ExactGain, NoEdgesMeansNoGain) {
  RandomStream rng(23);
  Probs p(101);
  for (auto& x : p) x = rng.uniform();
  const auto r = exact_gain(p, DelegationGraph(101));
  EXPECT_EQ(r.gain, 0.0);
  EXPECT_EQ(r.method, TallyMethod::exact);
  EXPECT_FALSE(r.ci_halfwidth.has_value());
}

TEST(ExactGain, CycleLosesEverything) {
  const auto r = exact_gain(Probs{1.0, 1.0}, DelegationGraph(std::vector<std::int64_t>{1, 0}));
  EXPECT_EQ(r.p_fluid, 0.0);
  EXPECT_EQ(r.p_direct, 1.0);
  EXPECT_EQ(r.gain, -1.0);
}

TEST(ExactGain, StarIntoExpert) {
  const Probs p{0.1, 0.1, 0.9};
  const auto r = exact_gain(p, DelegationGraph(std::vector<std::int64_t>{2, 2, -1}));
  const double direct = oracle::enumerate_tail(Weights{1, 1, 1}, p, 1.5);
  EXPECT_NEAR(direct, 0.172, 1e-12);
  EXPECT_NEAR(r.p_fluid, 0.9, 1e-15);
  EXPECT_NEAR(r.p_direct, direct, 1e-15);
  EXPECT_NEAR(r.gain, 0.9 - direct, 1e-15);
}

TEST(ExactGain, CapIsEnforced) {
  EXPECT_THROW(exact_gain(Probs(30, 0.5), DelegationGraph(30), 20), std::invalid_argument);
}

TEST(MonteCarloGain, NoEdgesWithinInterval) {
  RandomStream rng(24);
  Probs p(51);
  for (auto& x : p) x = rng.uniform();
  const auto r = monte_carlo_gain(p, DelegationGraph(51), 100000, 0.01, RandomStream(5));
  ASSERT_TRUE(r.ci_halfwidth.has_value());
  EXPECT_LE(std::abs(r.gain), 2.0 * *r.ci_halfwidth);
  EXPECT_EQ(r.gain, 0.0);  // both tallies see the same votes when nobody delegates
}

TEST(MonteCarloGain, StarWithinIntervalOfExact) {
  const Probs p{0.1, 0.1, 0.9};
  const DelegationGraph g(std::vector<std::int64_t>{2, 2, -1});
  const auto mc = monte_carlo_gain(p, g, 1000000, 0.01, RandomStream(6));
  const auto ex = exact_gain(p, g);
  EXPECT_LE(std::abs(mc.p_direct - ex.p_direct), *mc.ci_halfwidth);
  EXPECT_LE(std::abs(mc.p_fluid - ex.p_fluid), *mc.ci_halfwidth);
  EXPECT_LE(std::abs(mc.gain - ex.gain), 2.0 * *mc.ci_halfwidth);
  EXPECT_EQ(mc.reps, 1000000u);
}

TEST(MonteCarloGain, SingleRepHalfwidth) {
  const auto r = monte_carlo_gain(Probs{0.5}, DelegationGraph(1), 1, 0.05, RandomStream(1));
  EXPECT_DOUBLE_EQ(*r.ci_halfwidth, std::sqrt(std::log(2.0 / 0.05) / 2.0));
}

TEST(MonteCarloGain, IndependentOfThreadCount) {
  RandomStream rng(25);
  Probs p(200);
  for (auto& x : p) x = rng.uniform();
  const auto g = sample_graph(MechanismSpec::upward(0.5), p, rng);
  const auto a = monte_carlo_gain(p, g, 5000, 0.01, RandomStream(9), 1);
  const auto b = monte_carlo_gain(p, g, 5000, 0.01, RandomStream(9), 4);
  EXPECT_EQ(a.p_direct, b.p_direct);
  EXPECT_EQ(a.p_fluid, b.p_fluid);
}

TEST(MonteCarloGain, IntervalCoverage) {
  RandomStream rng(26);
  Probs p(9);
  for (auto& x : p) x = 0.3 + 0.4 * rng.uniform();
  const DelegationGraph g(std::vector<std::int64_t>{3, 3, -1, -1, 3, 2, -1, 8, -1});
  const auto exact = exact_gain(p, g);
  int covered_direct = 0, covered_fluid = 0;
  constexpr int kTrials = 500;
  for (int t = 0; t < kTrials; ++t) {
    const auto r = monte_carlo_gain(p, g, 400, 0.01, RandomStream(1000 + t));
    covered_direct += std::abs(r.p_direct - exact.p_direct) <= *r.ci_halfwidth;
    covered_fluid += std::abs(r.p_fluid - exact.p_fluid) <= *r.ci_halfwidth;
  }
  EXPECT_GE(covered_direct, 0.98 * kTrials);
  EXPECT_GE(covered_fluid, 0.98 * kTrials);
}

TEST(GainReport, JsonFields) {
  GainReport r{0.25, 0.75, 0.5, TallyMethod::monte_carlo, 0.01, 1000};
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["p_direct"], 0.25);
  EXPECT_EQ(j["p_fluid"], 0.75);
  EXPECT_EQ(j["gain"], 0.5);
  EXPECT_EQ(j["method"], "monte_carlo");
  EXPECT_EQ(j["ci_halfwidth"], 0.01);
  EXPECT_EQ(j["reps"], 1000);
  const auto e = nlohmann::json::parse(to_json(GainReport{0.1, 0.2, 0.1, TallyMethod::exact, {}, {}}));
  EXPECT_TRUE(e["ci_halfwidth"].is_null());
  EXPECT_TRUE(e["reps"].is_null());
  EXPECT_EQ(e["method"], "exact");
}

}  // namespace
}  // namespace fluid
