#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fluid/delegation_graph.hpp"
#include "fluid/random.hpp"

namespace fluid {

enum class TallyMethod { exact, brute_force, monte_carlo };

std::string_view to_string(TallyMethod m);

struct GainReport {
  double p_direct = 0.0;
  double p_fluid = 0.0;
  double gain = 0.0;
  TallyMethod method = TallyMethod::exact;
  std::optional<double> ci_halfwidth;  // monte_carlo only; per estimated probability
  std::optional<std::uint64_t> reps;   // monte_carlo only
};

/// JSON object with keys p_direct, p_fluid, gain, method, ci_halfwidth, reps
/// (the last two null unless method is monte_carlo).
std::string to_json(const GainReport& r);

inline constexpr std::size_t kDefaultExactCap = 20000;

/// P[sum_i w_i V_i > threshold] for independent V_i ~ Bernoulli(p_i).
/// Dynamic program over achievable totals in long double; voters with zero
/// weight are skipped. Throws std::invalid_argument on mismatched lengths,
/// probabilities outside [0, 1] or a weight total that overflows.
double weighted_poisson_binomial_tail(std::span<const std::uint64_t> weights,
                                      std::span<const double> probs, double threshold);

/// P[X^D > n/2].
double direct_tail(std::span<const double> probs);

/// Same tail by summing all 2^n outcomes. n <= 20.
double brute_force_tail(std::span<const std::uint64_t> weights, std::span<const double> probs,
                        double threshold);

/// Exact gain for the instance. Throws std::invalid_argument above `cap`
/// voters (use monte_carlo_gain there).
GainReport exact_gain(std::span<const double> competencies, const DelegationGraph& g,
                      std::size_t cap = kDefaultExactCap);

/// Estimates both tails from `reps` sampled vote vectors. Replication r
/// draws from rng.split(r), so the estimate does not depend on `threads`.
GainReport monte_carlo_gain(std::span<const double> competencies, const DelegationGraph& g,
                            std::uint64_t reps, double delta, const RandomStream& rng,
                            unsigned threads = 1);

}  // namespace fluid
