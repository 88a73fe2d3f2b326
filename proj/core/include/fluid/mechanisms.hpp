#pragma once

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fluid/distributions.hpp"

namespace fluid {

struct ProbabilityKnot {
  double x = 0.0;
  double value = 0.0;
};

/// q: competence -> probability of delegating.
class DelegationProbabilityFn {
 public:
  struct Constant {
    double p;
  };
  /// q(x) = clamp(a - b x, 0, 1)
  struct Linear {
    double a, b;
  };
  /// Linear interpolation between knots, constant beyond the end knots.
  struct PiecewiseLinear {
    std::vector<ProbabilityKnot> knots;
  };
  using Variant = std::variant<Constant, Linear, PiecewiseLinear>;

  static DelegationProbabilityFn constant(double p);
  static DelegationProbabilityFn linear(double a, double b);
  static DelegationProbabilityFn piecewise_linear(std::vector<ProbabilityKnot> knots);

  double operator()(double x) const;

  [[nodiscard]] bool is_constant() const { return std::holds_alternative<Constant>(variant_); }
  /// Non-increasing on [0, 1].
  [[nodiscard]] bool is_monotone_decreasing() const;
  /// Strictly decreasing somewhere, non-increasing everywhere.
  [[nodiscard]] bool is_strictly_decreasing() const;
  /// Kinks inside [0, 1], for quadrature.
  [[nodiscard]] std::vector<double> breakpoints() const;
  [[nodiscard]] const Variant& variant() const { return variant_; }

 private:
  explicit DelegationProbabilityFn(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// phi: (delegator competence x, candidate competence y) -> nonnegative weight.
///
/// Every function carries a row normalizer m(x); evaluation returns
/// base(x, y) / m(x). Freshly built functions have m == 1; normalize_phi
/// installs the normalizer that gives unit row means under a distribution.
class PairWeightFn {
 public:
  struct Indicator {};  // 1 if y > x else 0
  struct Constant1 {};
  struct AffineInY {
    double c0, c1;
  };
  struct ExpInY {
    double lambda;
  };
  /// size x size grid over [0,1]^2, values[i * size + j] = phi(i/(size-1), j/(size-1)),
  /// bilinear in between.
  struct Tabulated {
    std::size_t size;
    std::vector<double> values;
  };
  using Variant = std::variant<Indicator, Constant1, AffineInY, ExpInY, Tabulated>;

  static PairWeightFn indicator();
  static PairWeightFn constant1();
  static PairWeightFn affine_in_y(double c0, double c1);
  static PairWeightFn exp_in_y(double lambda);
  static PairWeightFn tabulated(std::size_t size, std::vector<double> values);

  double operator()(double x, double y) const;
  /// Unnormalized weight.
  [[nodiscard]] double base(double x, double y) const;
  /// Row normalizer m(x).
  [[nodiscard]] double row_scale(double x) const;

  /// True when phi(x, y) depends on y only (up to a constant factor), so one
  /// weight table serves every delegator.
  [[nodiscard]] bool separable_in_y() const;
  [[nodiscard]] bool is_indicator() const { return std::holds_alternative<Indicator>(variant_); }
  [[nodiscard]] bool is_normalized() const { return normalized_; }
  [[nodiscard]] const Variant& variant() const { return variant_; }
  [[nodiscard]] std::string describe() const;

 private:
  friend PairWeightFn normalize_phi(const PairWeightFn& phi, const DistributionSpec& dist);
  explicit PairWeightFn(Variant v) : variant_(std::move(v)) {}

  Variant variant_;
  bool normalized_ = false;
  double scale_ = 1.0;             // separable functions
  std::vector<double> row_means_;  // tabulated: m at each grid row
};

/// Rescales phi so that E_{y~D}[phi(x, y)] = 1 for every x. The induced
/// delegation law is unchanged. Throws for the indicator (not positive).
PairWeightFn normalize_phi(const PairWeightFn& phi, const DistributionSpec& dist);

/// (min, max) of phi over [0,1]^2. Throws std::domain_error if phi attains 0.
std::pair<double, double> phi_bounds(const PairWeightFn& phi);

/// Mechanism M = (q, phi) in one of the three studied families.
class MechanismSpec {
 public:
  struct Upward {
    double p;
  };
  struct ConfidenceBased {
    DelegationProbabilityFn q;
  };
  struct GeneralContinuous {
    double p;
    PairWeightFn phi;
  };
  using Variant = std::variant<Upward, ConfidenceBased, GeneralContinuous>;

  static MechanismSpec upward(double p);
  static MechanismSpec confidence_based(DelegationProbabilityFn q);
  static MechanismSpec general_continuous(double p, PairWeightFn phi);

  [[nodiscard]] const Variant& variant() const { return variant_; }
  [[nodiscard]] bool is_upward() const { return std::holds_alternative<Upward>(variant_); }
  [[nodiscard]] bool is_confidence_based() const {
    return std::holds_alternative<ConfidenceBased>(variant_);
  }
  [[nodiscard]] bool is_general() const { return std::holds_alternative<GeneralContinuous>(variant_); }
  [[nodiscard]] std::string describe() const;

 private:
  explicit MechanismSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

double delegation_probability(const MechanismSpec& mech, double x);
double pair_weight(const MechanismSpec& mech, double x, double y);

/// Weight function of the mechanism as a PairWeightFn (indicator, constant1, phi).
PairWeightFn mechanism_phi(const MechanismSpec& mech);

}  // namespace fluid
