#include "fluid/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fluid {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool valid_probability(double p) { return p >= 0.0 && p <= 1.0; }

double tabulated_base(const PairWeightFn::Tabulated& t, double x, double y) {
  const double last = static_cast<double>(t.size - 1);
  const double gx = std::clamp(x, 0.0, 1.0) * last;
  const double gy = std::clamp(y, 0.0, 1.0) * last;
  const std::size_t i = std::min(static_cast<std::size_t>(gx), t.size - 2);
  const std::size_t j = std::min(static_cast<std::size_t>(gy), t.size - 2);
  const double u = gx - static_cast<double>(i);
  const double v = gy - static_cast<double>(j);
  const auto at = [&](std::size_t r, std::size_t c) { return t.values[r * t.size + c]; };
  return (1 - u) * ((1 - v) * at(i, j) + v * at(i, j + 1)) +
         u * ((1 - v) * at(i + 1, j) + v * at(i + 1, j + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// DelegationProbabilityFn

DelegationProbabilityFn DelegationProbabilityFn::constant(double p) {
  if (!valid_probability(p)) throw std::invalid_argument("constant q must lie in [0, 1]");
  return DelegationProbabilityFn(Constant{p});
}

DelegationProbabilityFn DelegationProbabilityFn::linear(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("linear q coefficients must be finite");
  return DelegationProbabilityFn(Linear{a, b});
}

DelegationProbabilityFn DelegationProbabilityFn::piecewise_linear(std::vector<ProbabilityKnot> knots) {
  if (knots.empty()) throw std::invalid_argument("piecewise-linear q needs at least one knot");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!valid_probability(knots[i].value))
      throw std::invalid_argument("piecewise-linear q values must lie in [0, 1]");
    if (!(knots[i].x >= 0.0 && knots[i].x <= 1.0))
      throw std::invalid_argument("piecewise-linear q knots must lie in [0, 1]");
    if (i > 0 && !(knots[i].x > knots[i - 1].x))
      throw std::invalid_argument("piecewise-linear q knots must be strictly increasing");
  }
  return DelegationProbabilityFn(PiecewiseLinear{std::move(knots)});
}

double DelegationProbabilityFn::operator()(double x) const {
  return std::visit(Overloaded{
                        [](const Constant& c) { return c.p; },
                        [&](const Linear& l) { return std::clamp(l.a - l.b * x, 0.0, 1.0); },
                        [&](const PiecewiseLinear& pl) {
                          const auto& k = pl.knots;
                          if (x <= k.front().x) return k.front().value;
                          if (x >= k.back().x) return k.back().value;
                          auto it = std::upper_bound(
                              k.begin(), k.end(), x,
                              [](double v, const ProbabilityKnot& kn) { return v < kn.x; });
                          const auto& hi = *it;
                          const auto& lo = *(it - 1);
                          const double w = (x - lo.x) / (hi.x - lo.x);
                          return (1.0 - w) * lo.value + w * hi.value;
                        },
                    },
                    variant_);
}

bool DelegationProbabilityFn::is_monotone_decreasing() const {
  return std::visit(Overloaded{
                        [](const Constant&) { return true; },
                        [](const Linear& l) { return l.b >= 0.0; },
                        [](const PiecewiseLinear& pl) {
                          for (std::size_t i = 1; i < pl.knots.size(); ++i)
                            if (pl.knots[i].value > pl.knots[i - 1].value) return false;
                          return true;
                        },
                    },
                    variant_);
}

bool DelegationProbabilityFn::is_strictly_decreasing() const {
  if (!is_monotone_decreasing()) return false;
  return (*this)(0.0) > (*this)(1.0);
}

std::vector<double> DelegationProbabilityFn::breakpoints() const {
  std::vector<double> out;
  std::visit(Overloaded{
                 [](const Constant&) {},
                 [&](const Linear& l) {
                   if (l.b != 0.0) {
                     out.push_back(l.a / l.b);
                     out.push_back((l.a - 1.0) / l.b);
                   }
                 },
                 [&](const PiecewiseLinear& pl) {
                   for (const auto& k : pl.knots) out.push_back(k.x);
                 },
             },
             variant_);
  std::erase_if(out, [](double x) { return !(x > 0.0 && x < 1.0); });
  return out;
}

// ---------------------------------------------------------------------------
// PairWeightFn

PairWeightFn PairWeightFn::indicator() { return PairWeightFn(Indicator{}); }
PairWeightFn PairWeightFn::constant1() { return PairWeightFn(Constant1{}); }

PairWeightFn PairWeightFn::affine_in_y(double c0, double c1) {
  if (!(c0 > 0.0 && c1 > 0.0) || !std::isfinite(c0) || !std::isfinite(c1))
    throw std::invalid_argument("affine_in_y requires c0 > 0 and c1 > 0");
  return PairWeightFn(AffineInY{c0, c1});
}

PairWeightFn PairWeightFn::exp_in_y(double lambda) {
  if (!std::isfinite(lambda) || std::abs(lambda) > 700.0)
    throw std::invalid_argument("exp_in_y requires a finite lambda with |lambda| <= 700");
  return PairWeightFn(ExpInY{lambda});
}

PairWeightFn PairWeightFn::tabulated(std::size_t size, std::vector<double> values) {
  if (size < 2) throw std::invalid_argument("tabulated phi needs a grid of at least 2x2");
  if (values.size() != size * size)
    throw std::invalid_argument("tabulated phi needs size*size values");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("tabulated phi values must be finite and nonnegative");
  return PairWeightFn(Tabulated{size, std::move(values)});
}

double PairWeightFn::base(double x, double y) const {
  return std::visit(Overloaded{
                        [&](const Indicator&) { return y > x ? 1.0 : 0.0; },
                        [](const Constant1&) { return 1.0; },
                        [&](const AffineInY& a) { return a.c0 + a.c1 * y; },
                        [&](const ExpInY& e) { return std::exp(e.lambda * y); },
                        [&](const Tabulated& t) { return tabulated_base(t, x, y); },
                    },
                    variant_);
}

double PairWeightFn::row_scale(double x) const {
  if (row_means_.empty()) return scale_;
  const auto& t = std::get<Tabulated>(variant_);
  const double gx = std::clamp(x, 0.0, 1.0) * static_cast<double>(t.size - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(gx), t.size - 2);
  const double u = gx - static_cast<double>(i);
  return (1.0 - u) * row_means_[i] + u * row_means_[i + 1];
}

double PairWeightFn::operator()(double x, double y) const { return base(x, y) / row_scale(x); }

bool PairWeightFn::separable_in_y() const {
  return std::holds_alternative<Constant1>(variant_) ||
         std::holds_alternative<AffineInY>(variant_) || std::holds_alternative<ExpInY>(variant_);
}

std::string PairWeightFn::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Indicator&) { os << "Indicator(y > x)"; },
                 [&](const Constant1&) { os << "Constant1"; },
                 [&](const AffineInY& a) { os << "AffineInY(" << a.c0 << ", " << a.c1 << ")"; },
                 [&](const ExpInY& e) { os << "ExpInY(" << e.lambda << ")"; },
                 [&](const Tabulated& t) { os << "Tabulated(" << t.size << "x" << t.size << ")"; },
             },
             variant_);
  if (normalized_) os << " normalized";
  return os.str();
}

PairWeightFn normalize_phi(const PairWeightFn& phi, const DistributionSpec& dist) {
  if (phi.is_indicator())
    throw std::invalid_argument("normalize_phi: the indicator weight is not strictly positive");
  PairWeightFn out(phi.variant_);
  out.normalized_ = true;
  if (const auto* t = std::get_if<PairWeightFn::Tabulated>(&phi.variant_)) {
    std::vector<double> grid;
    for (std::size_t j = 1; j + 1 < t->size; ++j)
      grid.push_back(static_cast<double>(j) / static_cast<double>(t->size - 1));
    out.row_means_.resize(t->size);
    for (std::size_t i = 0; i < t->size; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(t->size - 1);
      out.row_means_[i] = expectation(dist, [&](double y) { return phi.base(x, y); }, grid, 1e-12);
      if (!(out.row_means_[i] > 0.0))
        throw std::invalid_argument("normalize_phi: a row of phi has zero mean");
    }
  } else {
    out.scale_ = expectation(dist, [&](double y) { return phi.base(0.0, y); }, {}, 1e-12);
    if (!(out.scale_ > 0.0)) throw std::invalid_argument("normalize_phi: phi has zero mean");
  }
  return out;
}

std::pair<double, double> phi_bounds(const PairWeightFn& phi) {
  double lo = 0.0, hi = 0.0;
  std::visit(Overloaded{
                 [&](const PairWeightFn::Indicator&) { lo = 0.0, hi = 1.0; },
                 [&](const PairWeightFn::Constant1&) { lo = hi = 1.0; },
                 [&](const PairWeightFn::AffineInY& a) {
                   lo = std::min(a.c0, a.c0 + a.c1);
                   hi = std::max(a.c0, a.c0 + a.c1);
                 },
                 [&](const PairWeightFn::ExpInY& e) {
                   lo = std::min(1.0, std::exp(e.lambda));
                   hi = std::max(1.0, std::exp(e.lambda));
                 },
                 [&](const PairWeightFn::Tabulated& t) {
                   // Bilinear values (and, after normalization, ratios of
                   // functions linear in x) take their extremes on grid nodes.
                   lo = std::numeric_limits<double>::infinity();
                   hi = -lo;
                   for (std::size_t i = 0; i < t.size; ++i) {
                     const double x = static_cast<double>(i) / static_cast<double>(t.size - 1);
                     for (std::size_t j = 0; j < t.size; ++j) {
                       const double v = t.values[i * t.size + j] / phi.row_scale(x);
                       lo = std::min(lo, v);
                       hi = std::max(hi, v);
                     }
                   }
                 },
             },
             phi.variant());
  if (!std::holds_alternative<PairWeightFn::Tabulated>(phi.variant())) {
    lo /= phi.row_scale(0.0);
    hi /= phi.row_scale(0.0);
  }
  if (!(lo > 0.0)) throw std::domain_error("phi_bounds: phi is not strictly positive");
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// MechanismSpec

MechanismSpec MechanismSpec::upward(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("upward mechanism requires p in (0, 1)");
  return MechanismSpec(Upward{p});
}

MechanismSpec MechanismSpec::confidence_based(DelegationProbabilityFn q) {
  if (!q.is_monotone_decreasing())
    throw std::invalid_argument("confidence-based mechanism requires a non-increasing q");
  return MechanismSpec(ConfidenceBased{std::move(q)});
}

MechanismSpec MechanismSpec::general_continuous(double p, PairWeightFn phi) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("general continuous mechanism requires p in (0, 1)");
  if (phi.is_indicator())
    throw std::invalid_argument("general continuous mechanism requires a continuous positive phi");
  phi_bounds(phi);  // throws if phi attains zero
  constexpr int kGrid = 100;
  for (int i = 0; i < kGrid; ++i) {
    const double x = i / double(kGrid - 1);
    double prev = phi(x, 0.0);
    for (int j = 1; j < kGrid; ++j) {
      const double cur = phi(x, j / double(kGrid - 1));
      if (cur < prev * (1.0 - 1e-12))
        throw std::invalid_argument("general continuous mechanism requires phi increasing in y");
      prev = cur;
    }
  }
  return MechanismSpec(GeneralContinuous{p, std::move(phi)});
}

std::string MechanismSpec::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Upward& u) { os << "Upward(p=" << u.p << ")"; },
                 [&](const ConfidenceBased& c) {
                   os << "ConfidenceBased(q(0)=" << c.q(0.0) << ", q(1)=" << c.q(1.0) << ")";
                 },
                 [&](const GeneralContinuous& g) {
                   os << "GeneralContinuous(p=" << g.p << ", phi=" << g.phi.describe() << ")";
                 },
             },
             variant_);
  return os.str();
}

double delegation_probability(const MechanismSpec& mech, double x) {
  return std::visit(Overloaded{
                        [](const MechanismSpec::Upward& u) { return u.p; },
                        [&](const MechanismSpec::ConfidenceBased& c) { return c.q(x); },
                        [](const MechanismSpec::GeneralContinuous& g) { return g.p; },
                    },
                    mech.variant());
}

double pair_weight(const MechanismSpec& mech, double x, double y) {
  return std::visit(Overloaded{
                        [&](const MechanismSpec::Upward&) { return y > x ? 1.0 : 0.0; },
                        [](const MechanismSpec::ConfidenceBased&) { return 1.0; },
                        [&](const MechanismSpec::GeneralContinuous& g) { return g.phi(x, y); },
                    },
                    mech.variant());
}

PairWeightFn mechanism_phi(const MechanismSpec& mech) {
  return std::visit(Overloaded{
                        [](const MechanismSpec::Upward&) { return PairWeightFn::indicator(); },
                        [](const MechanismSpec::ConfidenceBased&) { return PairWeightFn::constant1(); },
                        [](const MechanismSpec::GeneralContinuous& g) { return g.phi; },
                    },
                    mech.variant());
}

}  // namespace fluid
