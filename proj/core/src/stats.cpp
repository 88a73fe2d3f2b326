#include "fluid/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace fluid {

double hoeffding_halfwidth(std::uint64_t reps, double delta) {
  if (reps == 0) throw std::invalid_argument("hoeffding_halfwidth: reps must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("hoeffding_halfwidth: delta must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(reps)));
}

std::uint64_t hoeffding_reps(double halfwidth, double delta) {
  if (!(halfwidth > 0.0)) throw std::invalid_argument("hoeffding_reps: halfwidth must be > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("hoeffding_reps: delta must lie in (0, 1)");
  return static_cast<std::uint64_t>(
      std::ceil(std::log(2.0 / delta) / (2.0 * halfwidth * halfwidth)));
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

double chi_square_sf(double statistic, int df) {
  if (df <= 0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace

ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b, double min_expected) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chi_square_two_sample: empty sample");
  const std::uint64_t top = std::max(*std::max_element(a.begin(), a.end()),
                                     *std::max_element(b.begin(), b.end()));
  std::vector<double> ca(top + 1, 0.0), cb(top + 1, 0.0);
  for (auto v : a) ca[v] += 1.0;
  for (auto v : b) cb[v] += 1.0;

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double smaller = std::min(na, nb) / (na + nb);

  std::vector<std::pair<double, double>> bins;
  double acc_a = 0.0, acc_b = 0.0;
  for (std::uint64_t v = 0; v <= top; ++v) {
    acc_a += ca[v];
    acc_b += cb[v];
    if ((acc_a + acc_b) * smaller >= min_expected) {
      bins.emplace_back(acc_a, acc_b);
      acc_a = acc_b = 0.0;
    }
  }
  if (acc_a + acc_b > 0.0) {
    if (bins.empty()) {
      bins.emplace_back(acc_a, acc_b);
    } else {
      bins.back().first += acc_a;
      bins.back().second += acc_b;
    }
  }

  ChiSquareResult result;
  for (const auto& [oa, ob] : bins) {
    const double pooled = (oa + ob) / (na + nb);
    const double ea = pooled * na;
    const double eb = pooled * nb;
    result.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  result.degrees_of_freedom = static_cast<int>(bins.size()) - 1;
  result.p_value = chi_square_sf(result.statistic, result.degrees_of_freedom);
  return result;
}

ChiSquareResult chi_square_goodness_of_fit(std::span<const std::uint64_t> observed,
                                           std::span<const double> probabilities) {
  if (observed.size() != probabilities.size() || observed.empty())
    throw std::invalid_argument("chi_square_goodness_of_fit: size mismatch");
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  ChiSquareResult result;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probabilities[i] * total;
    if (e <= 0.0) continue;
    const double d = static_cast<double>(observed[i]) - e;
    result.statistic += d * d / e;
  }
  result.degrees_of_freedom = static_cast<int>(observed.size()) - 1;
  result.p_value = chi_square_sf(result.statistic, result.degrees_of_freedom);
  return result;
}

}  // namespace fluid
