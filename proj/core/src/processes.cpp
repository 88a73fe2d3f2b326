#include "fluid/processes.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fluid {

namespace {

void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(std::string(what) + ": p must lie in (0, 1)");
}

}  // namespace

std::vector<std::uint64_t> simulate_simon_components(std::size_t n, double p, RandomStream& rng) {
  require_probability(p, "simulate_simon_components");
  if (n == 0) throw std::invalid_argument("simulate_simon_components: n must be positive");
  std::vector<std::uint64_t> sizes{1};
  std::vector<std::uint32_t> owner{0};
  owner.reserve(n);
  for (std::size_t t = 2; t <= n; ++t) {
    std::uint32_t c;
    if (rng.bernoulli(p)) {
      // An earlier step chosen uniformly belongs to C with probability |C| / (t - 1).
      c = owner[rng.below(t - 1)];
      ++sizes[c];
    } else {
      c = static_cast<std::uint32_t>(sizes.size());
      sizes.push_back(1);
    }
    owner.push_back(c);
  }
  return sizes;
}

std::uint64_t simulate_w_process(std::size_t n, std::size_t k, double p, RandomStream& rng) {
  if (k < 1 || k > n) throw std::invalid_argument("simulate_w_process: need 1 <= k <= n");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("simulate_w_process: p in [0, 1]");
  std::uint64_t w = 1;
  for (std::size_t t = k + 1; t <= n; ++t)
    if (rng.uniform() * static_cast<double>(t - 1) < p * static_cast<double>(w)) ++w;
  return w;
}

double expected_w(std::size_t n, std::size_t k, double p) {
  if (k < 1 || k > n) throw std::invalid_argument("expected_w: need 1 <= k <= n");
  if (!(p >= 0.0)) throw std::invalid_argument("expected_w: p must be nonnegative");
  if (k == n || p == 0.0) return 1.0;
  // tgamma_delta_ratio(a, d) = G(a) / G(a + d)
  return boost::math::tgamma_delta_ratio(static_cast<double>(k), p) /
         boost::math::tgamma_delta_ratio(static_cast<double>(n), p);
}

std::uint64_t simulate_v_process(std::size_t n, std::uint64_t start_other, RandomStream& rng) {
  if (start_other < 1) throw std::invalid_argument("simulate_v_process: start_other must be >= 1");
  std::uint64_t v = 1;
  std::uint64_t total = 1 + start_other;
  for (std::size_t step = 0; step < n; ++step, ++total)
    if (rng.below(total) < v) ++v;
  return v;
}

std::uint64_t simulate_graph_branching(std::size_t n, double p_prime, RandomStream& rng) {
  require_probability(p_prime, "simulate_graph_branching");
  if (n == 0) throw std::invalid_argument("simulate_graph_branching: n must be positive");
  const double edge = p_prime / static_cast<double>(n);
  std::uint64_t live = 1, dead = 0, neutral = n - 1;
  while (live > 0) {
    std::binomial_distribution<std::uint64_t> offspring(neutral, edge);
    const std::uint64_t z = neutral > 0 ? offspring(rng) : 0;
    neutral -= z;
    live += z;
    --live;
    ++dead;
  }
  return dead;
}

std::uint64_t simulate_delegation_branching(const MechanismSpec& mech,
                                            std::span<const double> competencies, VoterId root,
                                            RandomStream& rng) {
  const std::size_t n = competencies.size();
  if (root >= n) throw std::invalid_argument("simulate_delegation_branching: root out of range");
  const PairWeightFn phi = mechanism_phi(mech);

  // S_j: voter j's total weight over everyone else.
  std::vector<double> total(n);
  if (mech.is_upward()) {
    std::vector<double> sorted(competencies.begin(), competencies.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < n; ++j)
      total[j] = static_cast<double>(sorted.end() -
                                     std::upper_bound(sorted.begin(), sorted.end(), competencies[j]));
  } else {
    std::vector<VoterId> everyone(n);
    std::iota(everyone.begin(), everyone.end(), VoterId{0});
    const detail::TargetSampler sampler(phi, competencies, std::move(everyone));
    for (std::size_t j = 0; j < n; ++j) total[j] = sampler.total_weight(static_cast<VoterId>(j));
  }

  std::vector<double> q(n), on_dead(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) q[j] = delegation_probability(mech, competencies[j]);

  std::vector<VoterId> neutral, still_neutral, live{root};
  neutral.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    if (j != root) neutral.push_back(static_cast<VoterId>(j));

  std::uint64_t dead = 0;
  while (!live.empty()) {
    const VoterId k = live.back();
    live.pop_back();
    const double pk = competencies[k];
    still_neutral.clear();
    for (VoterId j : neutral) {
      const double w = phi(competencies[j], pk);
      const double room = total[j] - q[j] * on_dead[j];
      const double chance = room > 0.0 ? q[j] * w / room : 0.0;
      if (w > 0.0 && rng.uniform() < chance) {
        live.push_back(j);
      } else {
        on_dead[j] += w;
        still_neutral.push_back(j);
      }
    }
    neutral.swap(still_neutral);
    ++dead;
  }
  return dead;
}

double bucket_growth_factor(double p, double eps) {
  return p * (1.0 + eps) * (1.0 + eps) * (1.0 + eps) / (1.0 - 2.0 * eps);
}

double BucketModel::growth_factor() const { return bucket_growth_factor(p, eps); }

std::size_t BucketModel::bucket_of(double x) const {
  if (x <= boundaries.front()) return 0;
  const auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end(), x);
  return std::min<std::size_t>(static_cast<std::size_t>(it - boundaries.begin()) - 1, B - 1);
}

namespace {

constexpr int kContinuityGrid = 33;
constexpr int kSupGrid = 32;

// Largest spread of phi over [x0, x1] x [y0, y1], using monotonicity in y.
double square_spread(const PairWeightFn& phi, double x0, double x1, double y0, double y1) {
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kContinuityGrid; ++s) {
    const double x = x0 + (x1 - x0) * s / (kContinuityGrid - 1);
    hi = std::max(hi, phi(x, y1));
    lo = std::min(lo, phi(x, y0));
  }
  return hi - lo;
}

double power_iteration(const std::vector<double>& m, std::size_t b, std::size_t& iterations) {
  std::vector<double> v(b, 1.0 / static_cast<double>(b)), next(b);
  double estimate = 0.0;
  for (iterations = 1; iterations <= 100000; ++iterations) {
    for (std::size_t r = 0; r < b; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < b; ++c) s += m[r * b + c] * v[c];
      next[r] = s;
    }
    const double norm = std::accumulate(next.begin(), next.end(), 0.0);
    const double previous = estimate;
    estimate = norm / std::accumulate(v.begin(), v.end(), 0.0);
    if (!(norm > 0.0)) return 0.0;
    for (std::size_t r = 0; r < b; ++r) v[r] = next[r] / norm;
    if (iterations > 1 && std::abs(estimate - previous) <= 1e-12 * std::max(1.0, estimate)) break;
  }
  return estimate;
}

}  // namespace

BucketModel build_bucket_model(const PairWeightFn& phi, const DistributionSpec& dist, double p,
                               double eps) {
  require_probability(p, "build_bucket_model");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("build_bucket_model: eps must lie in (0, 0.5)");
  if (bucket_growth_factor(p, eps) >= 1.0)
    throw std::invalid_argument("build_bucket_model: p(1+eps)^3/(1-2eps) >= 1, the process is not sub-critical");
  if (!phi.is_normalized()) throw std::invalid_argument("build_bucket_model: phi must be normalized");
  const double floor = phi_bounds(phi).first;

  std::size_t b = 1;
  for (;; b *= 2) {
    if (b > kMaxBuckets)
      throw std::invalid_argument("build_bucket_model: phi needs more than " +
                                  std::to_string(kMaxBuckets) + " buckets at this eps");
    const double side = 1.0 / static_cast<double>(b);
    double spread = 0.0;
    for (std::size_t i = 0; i < b && spread <= floor * eps; ++i)
      for (std::size_t j = 0; j < b; ++j)
        spread = std::max(spread, square_spread(phi, i * side, (i + 1) * side, j * side, (j + 1) * side));
    if (spread <= floor * eps) break;
  }

  BucketModel m;
  m.B = b;
  m.eps = eps;
  m.p = p;
  m.boundaries.resize(b + 1);
  for (std::size_t i = 0; i <= b; ++i) m.boundaries[i] = static_cast<double>(i) / static_cast<double>(b);
  m.pi.resize(b);
  for (std::size_t i = 0; i < b; ++i) m.pi[i] = interval_mass(dist, m.boundaries[i], m.boundaries[i + 1]);

  m.phi_prime.assign(b * b, 0.0);
  for (std::size_t t = 0; t < b; ++t) {
    const double x0 = m.boundaries[t], x1 = m.boundaries[t + 1];
    for (std::size_t u = 0; u < b; ++u) {
      const double y = m.boundaries[u + 1];
      double sup = std::max(phi(x0, y), phi(x1, y));
      for (int s = 1; s < kSupGrid; ++s) sup = std::max(sup, phi(x0 + (x1 - x0) * s / kSupGrid, y));
      m.phi_prime[t * b + u] = sup;
    }
  }

  m.phi_tilde.resize(b * b);
  for (std::size_t t = 0; t < b; ++t) {
    double row = 0.0;
    for (std::size_t u = 0; u < b; ++u) row += m.phi_prime[t * b + u] * m.pi[u];
    for (std::size_t u = 0; u < b; ++u) m.phi_tilde[t * b + u] = m.phi_prime[t * b + u] * (1.0 + eps) / row;
  }

  const double scale = p * (1.0 + eps) * (1.0 + eps) / (1.0 - 2.0 * eps);
  m.M.resize(b * b);
  for (std::size_t t = 0; t < b; ++t)
    for (std::size_t u = 0; u < b; ++u) m.M[t * b + u] = scale * m.pi[t] * m.phi_tilde[t * b + u];

  m.spectral_radius = power_iteration(m.M, b, m.power_iterations);
  return m;
}

std::string to_json(const BucketModel& model) {
  nlohmann::ordered_json j;
  auto table = [&](const std::vector<double>& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < model.B; ++r)
      rows.push_back(std::vector<double>(t.begin() + static_cast<std::ptrdiff_t>(r * model.B),
                                         t.begin() + static_cast<std::ptrdiff_t>((r + 1) * model.B)));
    return rows;
  };
  j["B"] = model.B;
  j["eps"] = model.eps;
  j["p"] = model.p;
  j["growth_factor"] = model.growth_factor();
  j["spectral_radius"] = model.spectral_radius;
  j["power_iterations"] = model.power_iterations;
  j["boundaries"] = model.boundaries;
  j["pi"] = model.pi;
  j["phi_prime"] = table(model.phi_prime);
  j["phi_tilde"] = table(model.phi_tilde);
  j["M"] = table(model.M);
  return j.dump(2);
}

std::uint64_t sample_poisson(double mean, RandomStream& rng) {
  if (!(mean >= 0.0)) throw std::invalid_argument("sample_poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double u = rng.uniform();
    double term = std::exp(-mean);
    double cdf = term;
    std::uint64_t k = 0;
    while (u >= cdf) {
      ++k;
      term *= mean / static_cast<double>(k);
      const double before = cdf;
      cdf += term;
      if (cdf == before) break;  // u sits in the rounding gap above the last representable CDF value
    }
    return k;
  }
  std::poisson_distribution<std::uint64_t> d(mean);
  return d(rng);
}

MultitypeSize simulate_multitype_poisson(const BucketModel& model, std::size_t start_type,
                                         std::uint64_t cap, RandomStream& rng) {
  if (start_type >= model.B) throw std::invalid_argument("simulate_multitype_poisson: start type out of range");
  if (cap < 1) throw std::invalid_argument("simulate_multitype_poisson: cap must be >= 1");
  std::vector<std::uint64_t> pending(model.B, 0);
  pending[start_type] = 1;
  std::uint64_t waiting = 1, size = 1;
  if (size >= cap) return {cap, true};
  std::size_t type = start_type;
  while (waiting > 0) {
    while (pending[type] == 0) type = (type + 1) % model.B;
    --pending[type];
    --waiting;
    for (std::size_t child = 0; child < model.B; ++child) {
      const std::uint64_t k = sample_poisson(model.M[child * model.B + type], rng);
      if (k == 0) continue;
      pending[child] += k;
      waiting += k;
      size += k;
      if (size >= cap) return {cap, true};
    }
  }
  return {size, false};
}

}  // namespace fluid
