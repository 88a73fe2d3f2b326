#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fluid/mechanisms.hpp"
#include "fluid/random.hpp"

namespace fluid {

using VoterId = std::uint32_t;

/// Functional digraph on n voters: every voter has at most one out-edge.
class DelegationGraph {
 public:
  static constexpr std::int64_t kVotesDirectly = -1;

  DelegationGraph() = default;
  explicit DelegationGraph(std::size_t n) : out_(n, kVotesDirectly) {}
  /// Throws std::invalid_argument on a self loop or an out-of-range target.
  explicit DelegationGraph(std::vector<std::int64_t> out);

  [[nodiscard]] std::size_t size() const { return out_.size(); }
  [[nodiscard]] std::optional<VoterId> target(std::size_t voter) const {
    const auto t = out_[voter];
    if (t < 0) return std::nullopt;
    return static_cast<VoterId>(t);
  }
  [[nodiscard]] bool delegates(std::size_t voter) const { return out_[voter] >= 0; }
  [[nodiscard]] std::span<const std::int64_t> edges() const { return out_; }
  [[nodiscard]] std::size_t edge_count() const;

  void set_target(std::size_t voter, std::optional<VoterId> to);

  friend bool operator==(const DelegationGraph&, const DelegationGraph&) = default;

 private:
  std::vector<std::int64_t> out_;
};

struct WeightProfile {
  std::vector<std::uint64_t> dels;     // ancestors of each non-nullified voter, 0 if nullified
  std::vector<std::uint64_t> weight;   // 1 + dels for non-delegating survivors, else 0
  std::vector<std::uint8_t> is_nullified;
  std::vector<VoterId> nullified;      // sorted
  std::uint64_t max_weight = 0;
  std::uint64_t total_weight = 0;
};

struct WeightStats {
  std::uint64_t max_weight = 0;
  std::uint64_t total_weight = 0;
  std::uint64_t nullified_count = 0;
  friend bool operator==(const WeightStats&, const WeightStats&) = default;
};

/// Samples one delegation graph under the mechanism for fixed competencies.
/// Uses closed-form target samplers where the mechanism allows (sorted
/// ranks for Upward, uniform choice for ConfidenceBased, one cumulative
/// weight table for y-separable phi). Throws on an empty electorate.
DelegationGraph sample_graph(const MechanismSpec& mech, std::span<const double> competencies,
                             RandomStream& rng);

/// Direct O(n^2) sampler: per delegator, scan every candidate's weight and
/// invert the cumulative sum. Reference for sample_graph.
DelegationGraph sample_graph_reference(const MechanismSpec& mech,
                                       std::span<const double> competencies, RandomStream& rng);

/// Sequential sampler for Upward(p): voters join in decreasing competence;
/// voter t joins an existing component C with probability p |C| / (t - 1),
/// otherwise founds a new one. Joining voters point at the component's
/// founder, so component sizes (not tree shapes) match sample_graph.
DelegationGraph sample_upward_sequential(double p, std::span<const double> competencies,
                                         RandomStream& rng);

/// Cycle nullification, transitive delegations and weights in O(n).
WeightProfile compute_weights(const DelegationGraph& g);

WeightStats stats(const WeightProfile& w);

/// Number of voters whose forward walk passes through `voter` (graph-theoretic
/// ancestors, regardless of nullification).
std::uint64_t ancestor_count(const DelegationGraph& g, std::size_t voter);

/// Writes "voter,target" rows, empty target for direct voters.
void write_edge_list_csv(std::ostream& os, const DelegationGraph& g);

/// Samples i.i.d. competencies.
std::vector<double> sample_competencies(const DistributionSpec& dist, std::size_t n,
                                        RandomStream& rng);

namespace detail {

/// Samples a delegation target for voter `from` restricted to `candidates`
/// (excluding `from`) proportional to phi. Candidate weights for y-separable
/// phi are tabulated once; otherwise each draw scans the candidate list.
class TargetSampler {
 public:
  TargetSampler(const PairWeightFn& phi, std::span<const double> competencies,
                std::vector<VoterId> candidates);

  /// Sum of phi(p_from, p_c) over candidates c != from.
  [[nodiscard]] double total_weight(VoterId from) const;
  /// Returns nullopt when the total weight is zero.
  std::optional<VoterId> draw(VoterId from, RandomStream& rng) const;

 private:
  const PairWeightFn& phi_;
  std::span<const double> p_;
  std::vector<VoterId> candidates_;
  bool separable_;
  std::vector<double> cumulative_;  // separable: prefix sums of candidate weights
  std::vector<std::int64_t> position_;  // separable: voter -> index in candidates or -1
};

}  // namespace detail

}  // namespace fluid
