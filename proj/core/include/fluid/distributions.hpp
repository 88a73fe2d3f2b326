#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fluid/random.hpp"

namespace fluid {

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

/// Beta(a, b) restricted to [0, 1] (the full support of the Beta law).
struct TruncatedBeta {
  double a = 1.0;
  double b = 1.0;
};

struct DensityKnot {
  double x = 0.0;
  double density = 0.0;
};

/// Density linear between knots and zero outside [first knot, last knot].
/// Densities are rescaled at construction to integrate to one.
struct PiecewiseLinearDensity {
  std::vector<DensityKnot> knots;
  std::vector<double> cumulative;  // CDF value at each knot
};

/// A continuous competence distribution with support in [0, 1].
/// Instances are immutable once built; construct through the factories.
class DistributionSpec {
 public:
  using Variant = std::variant<Uniform, TruncatedBeta, PiecewiseLinearDensity>;

  static DistributionSpec uniform(double lo, double hi);
  static DistributionSpec truncated_beta(double a, double b);
  static DistributionSpec piecewise_linear(std::vector<DensityKnot> knots);
  /// The PG witness family U[0, 1 - 2 eta].
  static DistributionSpec uniform_eta(double eta) { return uniform(0.0, 1.0 - 2.0 * eta); }

  [[nodiscard]] const Variant& variant() const { return variant_; }
  [[nodiscard]] std::string describe() const;

 private:
  explicit DistributionSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

double sample(const DistributionSpec& dist, RandomStream& rng);

double mean(const DistributionSpec& dist);
double density(const DistributionSpec& dist, double x);
double cdf(const DistributionSpec& dist, double x);
/// Quantile function on [0, 1].
double inverse_cdf(const DistributionSpec& dist, double u);

/// P[lo < X <= hi]. Throws std::invalid_argument if lo > hi.
double interval_mass(const DistributionSpec& dist, double lo, double hi);

/// E[g(X)] by adaptive Simpson. `breakpoints` lists kinks of g in [0, 1].
double expectation(const DistributionSpec& dist, const std::function<double(double)>& g,
                   std::span<const double> breakpoints = {}, double abs_tol = 1e-10);

/// Mean competence of voters who do not delegate: E[(1-q) x] / E[1-q].
/// Throws std::domain_error when E[1-q] = 0 (everybody always delegates).
double nondelegator_mean(const DistributionSpec& dist, const std::function<double(double)>& q,
                         std::span<const double> breakpoints = {});

}  // namespace fluid
