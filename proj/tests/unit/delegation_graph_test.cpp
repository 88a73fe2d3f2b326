#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fluid/delegation_graph.hpp"
#include "fluid/stats.hpp"
#include "oracles.hpp"

namespace fluid {
namespace {

DelegationGraph random_functional_graph(std::size_t n, RandomStream& rng) {
  std::vector<std::int64_t> out(n, DelegationGraph::kVotesDirectly);
  const double direct_share = rng.uniform() * 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    if (n == 1 || rng.uniform() < direct_share) continue;
    auto j = rng.below(n - 1);
    if (j >= i) ++j;
    out[i] = static_cast<std::int64_t>(j);
  }
  return DelegationGraph(out);
}

std::vector<MechanismSpec> sample_mechanisms() {
  std::vector<double> table;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) table.push_back(1.0 + 0.3 * i * j + j);
  return {MechanismSpec::upward(0.5),
          MechanismSpec::confidence_based(DelegationProbabilityFn::linear(0.8, 0.8)),
          MechanismSpec::confidence_based(DelegationProbabilityFn::constant(1.0)),
          MechanismSpec::general_continuous(0.3, PairWeightFn::exp_in_y(1.0)),
          MechanismSpec::general_continuous(0.6, PairWeightFn::affine_in_y(1.0, 2.0)),
          MechanismSpec::general_continuous(0.5, PairWeightFn::tabulated(4, table))};
}

TEST(DelegationGraph, RejectsSelfLoopsAndBadTargets) {
  EXPECT_THROW(DelegationGraph(std::vector<std::int64_t>{0}), std::invalid_argument);
  EXPECT_THROW(DelegationGraph(std::vector<std::int64_t>{1, 5}), std::invalid_argument);
  EXPECT_THROW(DelegationGraph(std::vector<std::int64_t>{-2, 0}), std::invalid_argument);
  DelegationGraph g(3);
  EXPECT_THROW(g.set_target(1, 1), std::invalid_argument);
}

TEST(ComputeWeights, NoEdges) {
  const auto w = compute_weights(DelegationGraph(5));
  EXPECT_EQ(w.weight, (std::vector<std::uint64_t>{1, 1, 1, 1, 1}));
  EXPECT_EQ(w.total_weight, 5u);
  EXPECT_EQ(w.max_weight, 1u);
}

TEST(ComputeWeights, Chain) {
  const auto w = compute_weights(DelegationGraph(std::vector<std::int64_t>{1, 2, -1}));
  EXPECT_EQ(w.dels[2], 2u);
  EXPECT_EQ(w.weight, (std::vector<std::uint64_t>{0, 0, 3}));
  EXPECT_EQ(w.total_weight, 3u);
}

TEST(ComputeWeights, CycleNullifiesFeeders) {
  const auto w = compute_weights(DelegationGraph(std::vector<std::int64_t>{1, 0, 0}));
  EXPECT_EQ(w.nullified, (std::vector<VoterId>{0, 1, 2}));
  EXPECT_EQ(w.total_weight, 0u);
  EXPECT_EQ(w.max_weight, 0u);
}

TEST(Stats, Examples) {
  EXPECT_EQ(stats(compute_weights(DelegationGraph(4))), (WeightStats{1, 4, 0}));
  EXPECT_EQ(stats(compute_weights(DelegationGraph(std::vector<std::int64_t>{-1, 0, 0, 0}))),
            (WeightStats{4, 4, 0}));
  EXPECT_EQ(stats(compute_weights(DelegationGraph(std::vector<std::int64_t>{1, 0}))), (WeightStats{0, 0, 2}));
}

TEST(ComputeWeights, MatchesWalkOracleOnRandomGraphs) {
  RandomStream rng(77);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const auto g = random_functional_graph(n, rng);
    const auto w = compute_weights(g);
    const auto null = oracle::nullified_by_walk(g.edges());
    const auto anc = oracle::ancestors_by_walk(g.edges());
    const auto weight = oracle::weights_by_walk(g.edges());
    std::uint64_t nullified = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(w.is_nullified[i] != 0, null[i]) << "trial " << trial << " voter " << i;
      ASSERT_EQ(w.weight[i], weight[i]) << "trial " << trial << " voter " << i;
      if (!null[i]) ASSERT_EQ(w.dels[i], anc[i]);
      else ASSERT_EQ(w.dels[i], 0u);
      if (w.weight[i] > 0) ASSERT_FALSE(g.delegates(i));
      nullified += null[i];
    }
    ASSERT_EQ(w.nullified.size(), nullified);
    ASSERT_TRUE(std::is_sorted(w.nullified.begin(), w.nullified.end()));
    ASSERT_EQ(w.total_weight + w.nullified.size(), n);
  }
}

TEST(AncestorCount, MatchesWalkOracle) {
  RandomStream rng(78);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    const auto g = random_functional_graph(n, rng);
    const auto anc = oracle::ancestors_by_walk(g.edges());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(ancestor_count(g, i), anc[i]);
  }
}

TEST(SampleGraph, NoDelegationWhenQIsZero) {
  RandomStream rng(1);
  const auto m = MechanismSpec::confidence_based(DelegationProbabilityFn::constant(0.0));
  const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 500, rng);
  EXPECT_EQ(sample_graph(m, p, rng).edge_count(), 0u);
}

TEST(SampleGraph, TopVoterNeverDelegatesUnderUpward) {
  RandomStream rng(2);
  const auto m = MechanismSpec::upward(0.9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 50, rng);
    const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    const auto g = sample_graph(m, p, rng);
    ASSERT_FALSE(g.delegates(top));
    const auto gr = sample_graph_reference(m, p, rng);
    ASSERT_FALSE(gr.delegates(top));
  }
}

TEST(SampleGraph, UpwardEdgesIncreaseCompetence) {
  RandomStream rng(3);
  const auto m = MechanismSpec::upward(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 1000, rng);
    const auto g = sample_graph(m, p, rng);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (const auto t = g.target(i)) ASSERT_GT(p[*t], p[i]);
    ASSERT_TRUE(compute_weights(g).nullified.empty());
  }
}

TEST(SampleGraph, UniformTargetsWhenAlwaysDelegating) {
  RandomStream rng(4);
  const auto m = MechanismSpec::confidence_based(DelegationProbabilityFn::constant(1.0));
  const std::vector<double> p{0.2, 0.5, 0.9};
  constexpr int kSamples = 100000;
  std::array<std::array<int, 3>, 3> hits{};
  for (int s = 0; s < kSamples; ++s) {
    const auto g = sample_graph(m, p, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_TRUE(g.delegates(i));
      ++hits[i][*g.target(i)];
    }
  }
  const double sigma = std::sqrt(kSamples * 0.25);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) EXPECT_NEAR(hits[i][j], kSamples / 2.0, 3 * sigma);
}

TEST(SampleGraph, EmptyElectorateRejected) {
  RandomStream rng(5);
  EXPECT_THROW(sample_graph(MechanismSpec::upward(0.5), std::vector<double>{}, rng), std::invalid_argument);
}

TEST(SampleGraph, WeightsAccountForEveryVoter) {
  RandomStream rng(6);
  for (const auto& m : sample_mechanisms())
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 300, rng);
      const auto w = compute_weights(sample_graph(m, p, rng));
      ASSERT_EQ(w.total_weight + w.nullified.size(), 300u) << m.describe();
    }
}

// Per-delegator target law of the fast sampler against exact probabilities
// and against the O(n^2) reference sampler.
TEST(SampleGraph, FastAndReferenceSamplersAgree) {
  const std::vector<double> p{0.15, 0.3, 0.45, 0.62, 0.8, 0.93};
  const std::size_t n = p.size();
  constexpr int kSamples = 20000;
  for (const auto& m : sample_mechanisms()) {
    RandomStream fast_rng(10), ref_rng(11);
    std::vector<std::vector<std::uint64_t>> fast(n, std::vector<std::uint64_t>(n + 1, 0)), ref = fast;
    for (int s = 0; s < kSamples; ++s) {
      const auto a = sample_graph(m, p, fast_rng);
      const auto b = sample_graph_reference(m, p, ref_rng);
      for (std::size_t i = 0; i < n; ++i) {
        ++fast[i][a.target(i) ? *a.target(i) : n];
        ++ref[i][b.target(i) ? *b.target(i) : n];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> probs(n + 1, 0.0);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) total += pair_weight(m, p[i], p[j]);
      const double q = total > 0.0 ? delegation_probability(m, p[i]) : 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && total > 0.0) probs[j] = q * pair_weight(m, p[i], p[j]) / total;
      probs[n] = 1.0 - q;
      std::vector<std::uint64_t> obs_fast, obs_ref;
      std::vector<double> support;
      for (std::size_t j = 0; j <= n; ++j)
        if (probs[j] > 0.0) {
          obs_fast.push_back(fast[i][j]);
          obs_ref.push_back(ref[i][j]);
          support.push_back(probs[j]);
        } else {
          ASSERT_EQ(fast[i][j], 0u) << m.describe();
          ASSERT_EQ(ref[i][j], 0u) << m.describe();
        }
      if (support.size() < 2) continue;
      EXPECT_GT(chi_square_goodness_of_fit(obs_fast, support).p_value, 1e-4) << m.describe() << " voter " << i;
      EXPECT_GT(chi_square_goodness_of_fit(obs_ref, support).p_value, 1e-4) << m.describe() << " voter " << i;
    }
  }
}

TEST(SampleUpwardSequential, ComponentLawMatchesDirectSampler) {
  RandomStream rng(12);
  const auto m = MechanismSpec::upward(0.5);
  std::vector<std::uint64_t> direct, sequential;
  for (int rep = 0; rep < 3000; ++rep) {
    const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 100, rng);
    direct.push_back(oracle::component_sizes(sample_graph(m, p, rng).edges()).front());
    sequential.push_back(oracle::component_sizes(sample_upward_sequential(0.5, p, rng).edges()).front());
  }
  EXPECT_GT(chi_square_two_sample(direct, sequential).p_value, 0.001);
}

TEST(SampleUpwardSequential, EdgesPointAtFoundersAndIncreaseCompetence) {
  RandomStream rng(13);
  const auto p = sample_competencies(DistributionSpec::uniform(0, 1), 500, rng);
  const auto g = sample_upward_sequential(0.7, p, rng);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (const auto t = g.target(i)) {
      EXPECT_GT(p[*t], p[i]);
      EXPECT_FALSE(g.delegates(*t));
    }
}

TEST(TargetSampler, TotalsAndDegenerateCase) {
  const std::vector<double> p{0.1, 0.5, 0.9};
  const auto phi = PairWeightFn::affine_in_y(1.0, 2.0);
  const detail::TargetSampler all(phi, p, {0, 1, 2});
  EXPECT_DOUBLE_EQ(all.total_weight(0), phi(0.1, 0.5) + phi(0.1, 0.9));
  const detail::TargetSampler self_only(phi, p, {1});
  RandomStream rng(1);
  EXPECT_EQ(self_only.total_weight(1), 0.0);
  EXPECT_FALSE(self_only.draw(1, rng).has_value());
  EXPECT_EQ(self_only.draw(0, rng), VoterId{1});
}

TEST(EdgeList, CsvFormat) {
  std::ostringstream os;
  write_edge_list_csv(os, DelegationGraph(std::vector<std::int64_t>{2, -1, -1}));
  EXPECT_EQ(os.str(), "voter,target\n0,2\n1,\n2,\n");
}

}  // namespace
}  // namespace fluid
