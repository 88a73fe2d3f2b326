#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fluid/delegation_graph.hpp"
#include "fluid/distributions.hpp"
#include "fluid/mechanisms.hpp"
#include "fluid/random.hpp"

namespace fluid {

/// Simon's process for n steps: step t >= 2 joins existing component C
/// with probability p |C| / (t - 1), else founds a new one. Sizes are
/// returned in order of birth and sum to n.
std::vector<std::uint64_t> simulate_simon_components(std::size_t n, double p, RandomStream& rng);

/// Size at time n of a component born at time k: W_k = 1 and step t
/// increments with probability p W_{t-1} / (t - 1).
std::uint64_t simulate_w_process(std::size_t n, std::size_t k, double p, RandomStream& rng);

/// E[W_n^(k)] = prod_{i=k}^{n-1} (1 + p / i) = G(n+p) G(k) / (G(k+p) G(n)).
double expected_w(std::size_t n, std::size_t k, double p);

/// Two-colour Polya urn started from (1, start_other); returns the first
/// colour's count after n draws.
std::uint64_t simulate_v_process(std::size_t n, std::uint64_t start_other, RandomStream& rng);

/// Exploration with Bin(neutral, p'/n) offspring per live vertex; returns
/// the number of dead vertices when no live ones remain.
std::uint64_t simulate_graph_branching(std::size_t n, double p_prime, RandomStream& rng);

/// Live/dead/neutral exploration of the voters that reach `root`. A neutral
/// voter joins when it delegates to the vertex being processed, conditioned
/// on not delegating to any vertex processed before. Returns the dead count,
/// which has the law of 1 + ancestor_count(sample_graph(...), root).
std::uint64_t simulate_delegation_branching(const MechanismSpec& mech,
                                            std::span<const double> competencies, VoterId root,
                                            RandomStream& rng);

/// Bucketization of a normalized phi with its expected-children matrix.
/// Tables are row-major B x B.
struct BucketModel {
  std::size_t B = 0;
  std::vector<double> boundaries;  // B + 1 points, 0 .. 1
  std::vector<double> pi;
  std::vector<double> phi_prime;
  std::vector<double> phi_tilde;
  double eps = 0.0;
  double p = 0.0;
  /// M[tau][tau'] = expected children of type tau for a parent of type tau'.
  std::vector<double> M;
  double spectral_radius = 0.0;
  std::size_t power_iterations = 0;

  [[nodiscard]] double at(const std::vector<double>& table, std::size_t r, std::size_t c) const {
    return table[r * B + c];
  }
  [[nodiscard]] std::size_t bucket_of(double x) const;
  /// p (1 + eps)^3 / (1 - 2 eps).
  [[nodiscard]] double growth_factor() const;
};

/// p (1 + eps)^3 / (1 - 2 eps); the model is sub-critical iff this is < 1.
double bucket_growth_factor(double p, double eps);

inline constexpr std::size_t kMaxBuckets = 1024;

/// Chooses B by doubling until phi varies by at most L * eps over every
/// bucket square (L = min phi), then fills pi, phi', phi~ and M.
/// Throws std::invalid_argument when eps <= 0, p outside (0, 1), the growth
/// factor is >= 1, phi is not normalized, or no B <= kMaxBuckets suffices.
BucketModel build_bucket_model(const PairWeightFn& phi, const DistributionSpec& dist, double p,
                               double eps);

std::string to_json(const BucketModel& model);

struct MultitypeSize {
  std::uint64_t size = 0;
  bool capped = false;
};

/// Total progeny (root included) of the multitype Poisson process started
/// from one individual of `start_type`, stopped at `cap`.
MultitypeSize simulate_multitype_poisson(const BucketModel& model, std::size_t start_type,
                                         std::uint64_t cap, RandomStream& rng);

/// Poisson variate; inversion for mean < 10.
std::uint64_t sample_poisson(double mean, RandomStream& rng);

}  // namespace fluid
