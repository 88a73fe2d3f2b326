#include "fluid/tally.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <vector>

#include "fluid/parallel.hpp"
#include "fluid/stats.hpp"

namespace fluid {

std::string_view to_string(TallyMethod m) {
  switch (m) {
    case TallyMethod::exact:
      return "exact";
    case TallyMethod::brute_force:
      return "brute_force";
    case TallyMethod::monte_carlo:
      return "monte_carlo";
  }
  return "unknown";
}

std::string to_json(const GainReport& r) {
  nlohmann::ordered_json j;
  j["p_direct"] = r.p_direct;
  j["p_fluid"] = r.p_fluid;
  j["gain"] = r.gain;
  j["method"] = to_string(r.method);
  j["ci_halfwidth"] = r.ci_halfwidth ? nlohmann::ordered_json(*r.ci_halfwidth) : nlohmann::ordered_json(nullptr);
  j["reps"] = r.reps ? nlohmann::ordered_json(*r.reps) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

namespace {

void check_inputs(std::span<const std::uint64_t> weights, std::span<const double> probs) {
  if (weights.size() != probs.size())
    throw std::invalid_argument("tail: weights and probs differ in length");
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("tail: probability outside [0, 1]");
}

std::uint64_t checked_total(std::span<const std::uint64_t> weights) {
  std::uint64_t total = 0;
  for (auto w : weights) {
    if (w > std::numeric_limits<std::uint64_t>::max() - total)
      throw std::invalid_argument("tail: total weight overflows");
    total += w;
  }
  return total;
}

// Smallest total that exceeds the threshold; 0 when every total does.
std::uint64_t first_winning_total(double threshold, std::uint64_t total) {
  if (threshold < 0.0) return 0;
  const double f = std::floor(threshold) + 1.0;
  if (f > static_cast<double>(total)) return total + 1;
  return static_cast<std::uint64_t>(f);
}

}  // namespace

double weighted_poisson_binomial_tail(std::span<const std::uint64_t> weights,
                                      std::span<const double> probs, double threshold) {
  check_inputs(weights, probs);
  const std::uint64_t total = checked_total(weights);
  if (std::isnan(threshold)) throw std::invalid_argument("tail: threshold is NaN");
  const std::uint64_t first = first_winning_total(threshold, total);
  if (first == 0) return 1.0;
  if (first > total) return 0.0;
  if (total > (std::uint64_t{1} << 32))
    throw std::invalid_argument("tail: total weight too large for the dynamic program");

  std::vector<long double> dist(total + 1, 0.0L);
  dist[0] = 1.0L;
  std::uint64_t reach = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::uint64_t w = weights[i];
    if (w == 0) continue;
    const long double p = probs[i];
    const long double q = 1.0L - p;
    reach += w;
    for (std::uint64_t t = reach; t >= w; --t) dist[t] = dist[t] * q + dist[t - w] * p;
    for (std::uint64_t t = 0; t < w; ++t) dist[t] *= q;
  }

  long double upper = 0.0L, carry = 0.0L;
  for (std::uint64_t t = first; t <= total; ++t) {
    const long double y = dist[t] - carry;
    const long double s = upper + y;
    carry = (s - upper) - y;
    upper = s;
  }
  return static_cast<double>(std::clamp(upper, 0.0L, 1.0L));
}

double direct_tail(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("direct_tail: need at least one voter");
  const std::vector<std::uint64_t> ones(probs.size(), 1);
  return weighted_poisson_binomial_tail(ones, probs, static_cast<double>(probs.size()) / 2.0);
}

double brute_force_tail(std::span<const std::uint64_t> weights, std::span<const double> probs,
                        double threshold) {
  check_inputs(weights, probs);
  if (weights.size() > 20) throw std::invalid_argument("brute_force_tail: n must be at most 20");
  checked_total(weights);
  const std::size_t n = weights.size();
  long double tail = 0.0L;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    long double prob = 1.0L;
    long double x = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1U) {
        prob *= probs[i];
        x += static_cast<long double>(weights[i]);
      } else {
        prob *= 1.0L - probs[i];
      }
    }
    if (x > threshold) tail += prob;
  }
  return static_cast<double>(tail);
}

namespace {

void check_instance(std::span<const double> competencies, const DelegationGraph& g) {
  if (competencies.size() != g.size())
    throw std::invalid_argument("gain: competencies and graph differ in size");
  if (competencies.empty()) throw std::invalid_argument("gain: need at least one voter");
}

}  // namespace

GainReport exact_gain(std::span<const double> competencies, const DelegationGraph& g,
                      std::size_t cap) {
  check_instance(competencies, g);
  if (competencies.size() > cap)
    throw std::invalid_argument("exact_gain: n = " + std::to_string(competencies.size()) +
                                " exceeds the exact cap of " + std::to_string(cap) +
                                "; use monte_carlo_gain");
  const WeightProfile w = compute_weights(g);
  GainReport r;
  r.method = TallyMethod::exact;
  r.p_direct = direct_tail(competencies);
  r.p_fluid = weighted_poisson_binomial_tail(w.weight, competencies,
                                             static_cast<double>(competencies.size()) / 2.0);
  r.gain = r.p_fluid - r.p_direct;
  return r;
}

GainReport monte_carlo_gain(std::span<const double> competencies, const DelegationGraph& g,
                            std::uint64_t reps, double delta, const RandomStream& rng,
                            unsigned threads) {
  check_instance(competencies, g);
  if (reps == 0) throw std::invalid_argument("monte_carlo_gain: reps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("monte_carlo_gain: delta in (0, 1)");
  const WeightProfile w = compute_weights(g);
  const std::size_t n = competencies.size();
  const double half = static_cast<double>(n) / 2.0;

  std::vector<std::uint8_t> direct_win(reps), fluid_win(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    RandomStream stream = rng.split(r);
    std::uint64_t direct = 0, fluid = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (stream.uniform() < competencies[i]) {
        ++direct;
        fluid += w.weight[i];
      }
    }
    direct_win[r] = static_cast<double>(direct) > half;
    fluid_win[r] = static_cast<double>(fluid) > half;
  });

  std::uint64_t direct_hits = 0, fluid_hits = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    direct_hits += direct_win[r];
    fluid_hits += fluid_win[r];
  }
  GainReport out;
  out.method = TallyMethod::monte_carlo;
  out.p_direct = static_cast<double>(direct_hits) / static_cast<double>(reps);
  out.p_fluid = static_cast<double>(fluid_hits) / static_cast<double>(reps);
  out.gain = out.p_fluid - out.p_direct;
  out.ci_halfwidth = hoeffding_halfwidth(reps, delta);
  out.reps = reps;
  return out;
}

}  // namespace fluid
