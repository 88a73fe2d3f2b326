#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fluid {

/// Two-sided Hoeffding half-width for the mean of `reps` variables in [0, 1]
/// at confidence 1 - delta: sqrt(ln(2/delta) / (2 reps)).
double hoeffding_halfwidth(std::uint64_t reps, double delta);

/// Smallest rep count whose Hoeffding half-width is at most `halfwidth`.
std::uint64_t hoeffding_reps(double halfwidth, double delta);

/// Pairwise summation in index order (result independent of scheduling).
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

/// Linear-interpolation quantile (Hyndman-Fan type 7). q in [0, 1].
double quantile(std::vector<double> values, double q);

struct ChiSquareResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test on integer-valued observations.
/// Adjacent values are merged (from the low end, with the tail pooled) until
/// every bin's pooled expected count is at least `min_expected`.
ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b,
                                      double min_expected = 5.0);

/// Chi-square goodness of fit of observed counts against expected probabilities.
ChiSquareResult chi_square_goodness_of_fit(std::span<const std::uint64_t> observed,
                                           std::span<const double> probabilities);

}  // namespace fluid
