#include "fluid/distributions.hpp"
#include "fluid/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>

namespace fluid {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Offset t from the segment start where the CDF has grown by `mass`, for a
// density that goes linearly from d0 to d1 over width h.
double segment_inverse(double d0, double d1, double h, double mass) {
  const double slope = (d1 - d0) / h;
  const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * mass);
  const double denom = d0 + std::sqrt(disc);
  if (denom <= 0.0) return 0.0;
  return std::clamp(2.0 * mass / denom, 0.0, h);
}

double pld_cdf(const PiecewiseLinearDensity& d, double x) {
  const auto& k = d.knots;
  if (x <= k.front().x) return 0.0;
  if (x >= k.back().x) return 1.0;
  const auto it = std::upper_bound(k.begin(), k.end(), x,
                                   [](double v, const DensityKnot& kn) { return v < kn.x; });
  const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
  const double h = k[i + 1].x - k[i].x;
  const double t = x - k[i].x;
  const double value =
      d.cumulative[i] + k[i].density * t + (k[i + 1].density - k[i].density) * t * t / (2.0 * h);
  return std::clamp(value, 0.0, 1.0);
}

double pld_inverse(const PiecewiseLinearDensity& d, double u) {
  const auto& k = d.knots;
  if (u <= 0.0) return k.front().x;
  if (u >= 1.0) return k.back().x;
  auto it = std::upper_bound(d.cumulative.begin(), d.cumulative.end(), u);
  std::size_t i = static_cast<std::size_t>(it - d.cumulative.begin());
  i = std::clamp<std::size_t>(i, 1, k.size() - 1) - 1;
  const double h = k[i + 1].x - k[i].x;
  return k[i].x + segment_inverse(k[i].density, k[i + 1].density, h, u - d.cumulative[i]);
}

double pld_density(const PiecewiseLinearDensity& d, double x) {
  const auto& k = d.knots;
  if (x < k.front().x || x > k.back().x) return 0.0;
  auto it = std::upper_bound(k.begin(), k.end(), x,
                             [](double v, const DensityKnot& kn) { return v < kn.x; });
  if (it == k.end()) return k.back().density;
  const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
  const double w = (x - k[i].x) / (k[i + 1].x - k[i].x);
  return (1.0 - w) * k[i].density + w * k[i + 1].density;
}

}  // namespace

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo < hi))
    throw std::invalid_argument("uniform distribution requires 0 <= lo < hi <= 1");
  return DistributionSpec(Uniform{lo, hi});
}

DistributionSpec DistributionSpec::truncated_beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("beta distribution requires a > 0 and b > 0");
  return DistributionSpec(TruncatedBeta{a, b});
}

DistributionSpec DistributionSpec::piecewise_linear(std::vector<DensityKnot> knots) {
  if (knots.size() < 2)
    throw std::invalid_argument("piecewise-linear density needs at least two knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].x >= 0.0 && knots[i].x <= 1.0))
      throw std::invalid_argument("piecewise-linear density knots must lie in [0, 1]");
    if (!(knots[i].density >= 0.0) || !std::isfinite(knots[i].density))
      throw std::invalid_argument("piecewise-linear density values must be nonnegative");
    if (i > 0 && !(knots[i].x > knots[i - 1].x))
      throw std::invalid_argument("piecewise-linear density knots must be strictly increasing");
  }
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    area += 0.5 * (knots[i].density + knots[i + 1].density) * (knots[i + 1].x - knots[i].x);
  if (!(area > 0.0)) throw std::invalid_argument("piecewise-linear density has zero mass");

  PiecewiseLinearDensity pld;
  pld.knots = std::move(knots);
  for (auto& k : pld.knots) k.density /= area;
  pld.cumulative.assign(pld.knots.size(), 0.0);
  for (std::size_t i = 0; i + 1 < pld.knots.size(); ++i) {
    pld.cumulative[i + 1] = pld.cumulative[i] + 0.5 *
                                                    (pld.knots[i].density + pld.knots[i + 1].density) *
                                                    (pld.knots[i + 1].x - pld.knots[i].x);
  }
  pld.cumulative.back() = 1.0;
  return DistributionSpec(std::move(pld));
}

std::string DistributionSpec::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Uniform& u) { os << "Uniform(" << u.lo << ", " << u.hi << ")"; },
                 [&](const TruncatedBeta& b) { os << "Beta(" << b.a << ", " << b.b << ")"; },
                 [&](const PiecewiseLinearDensity& p) {
                   os << "PiecewiseLinear(" << p.knots.size() << " knots)";
                 },
             },
             variant_);
  return os.str();
}

double sample(const DistributionSpec& dist, RandomStream& rng) {
  return std::visit(
      Overloaded{
          [&](const Uniform& u) { return u.lo + (u.hi - u.lo) * rng.uniform(); },
          [&](const TruncatedBeta& b) {
            std::gamma_distribution<double> ga(b.a, 1.0);
            std::gamma_distribution<double> gb(b.b, 1.0);
            const double x = ga(rng);
            const double y = gb(rng);
            return (x + y) > 0.0 ? x / (x + y) : rng.uniform();
          },
          [&](const PiecewiseLinearDensity& p) { return pld_inverse(p, rng.uniform()); },
      },
      dist.variant());
}

double mean(const DistributionSpec& dist) {
  return std::visit(
      Overloaded{
          [](const Uniform& u) { return 0.5 * (u.lo + u.hi); },
          [](const TruncatedBeta& b) { return b.a / (b.a + b.b); },
          [](const PiecewiseLinearDensity& p) {
            double total = 0.0;
            for (std::size_t i = 0; i + 1 < p.knots.size(); ++i) {
              total += adaptive_simpson([&](double x) { return x * pld_density(p, x); },
                                        p.knots[i].x, p.knots[i + 1].x, 1e-10 / p.knots.size());
            }
            return total;
          },
      },
      dist.variant());
}

double density(const DistributionSpec& dist, double x) {
  return std::visit(Overloaded{
                        [&](const Uniform& u) {
                          return (x >= u.lo && x <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0;
                        },
                        [&](const TruncatedBeta& b) {
                          if (x < 0.0 || x > 1.0) return 0.0;
                          return boost::math::pdf(boost::math::beta_distribution<>(b.a, b.b), x);
                        },
                        [&](const PiecewiseLinearDensity& p) { return pld_density(p, x); },
                    },
                    dist.variant());
}

double cdf(const DistributionSpec& dist, double x) {
  return std::visit(Overloaded{
                        [&](const Uniform& u) { return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0); },
                        [&](const TruncatedBeta& b) {
                          if (x <= 0.0) return 0.0;
                          if (x >= 1.0) return 1.0;
                          return boost::math::cdf(boost::math::beta_distribution<>(b.a, b.b), x);
                        },
                        [&](const PiecewiseLinearDensity& p) { return pld_cdf(p, x); },
                    },
                    dist.variant());
}

double inverse_cdf(const DistributionSpec& dist, double u) {
  u = std::clamp(u, 0.0, 1.0);
  return std::visit(Overloaded{
                        [&](const Uniform& d) { return d.lo + (d.hi - d.lo) * u; },
                        [&](const TruncatedBeta& b) {
                          return boost::math::quantile(boost::math::beta_distribution<>(b.a, b.b), u);
                        },
                        [&](const PiecewiseLinearDensity& p) { return pld_inverse(p, u); },
                    },
                    dist.variant());
}

double interval_mass(const DistributionSpec& dist, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("interval_mass: lo must not exceed hi");
  if (lo == hi) return 0.0;
  return std::max(0.0, cdf(dist, hi) - cdf(dist, lo));
}

double expectation(const DistributionSpec& dist, const std::function<double(double)>& g,
                   std::span<const double> breakpoints, double abs_tol) {
  return std::visit(
      Overloaded{
          [&](const Uniform& u) {
            const double width = u.hi - u.lo;
            return adaptive_simpson(g, u.lo, u.hi, breakpoints, abs_tol * width) / width;
          },
          [&](const TruncatedBeta& b) {
            if (b.a >= 1.0 && b.b >= 1.0) {
              boost::math::beta_distribution<> beta(b.a, b.b);
              return adaptive_simpson([&](double x) { return g(x) * boost::math::pdf(beta, x); },
                                      0.0, 1.0, breakpoints, abs_tol);
            }
            // Unbounded density: integrate over probability space instead,
            // E[g(X)] = int_0^1 g(Q(u)) du, whose integrand is bounded.
            std::vector<double> ubreaks;
            for (double x : breakpoints) ubreaks.push_back(cdf(dist, x));
            return adaptive_simpson([&](double u) { return g(inverse_cdf(dist, u)); }, 0.0, 1.0,
                                    ubreaks, abs_tol);
          },
          [&](const PiecewiseLinearDensity& p) {
            std::vector<double> cuts(breakpoints.begin(), breakpoints.end());
            for (const auto& k : p.knots) cuts.push_back(k.x);
            return adaptive_simpson([&](double x) { return g(x) * pld_density(p, x); },
                                    p.knots.front().x, p.knots.back().x, cuts, abs_tol);
          },
      },
      dist.variant());
}

double nondelegator_mean(const DistributionSpec& dist, const std::function<double(double)>& q,
                         std::span<const double> breakpoints) {
  const double stay = expectation(dist, [&](double x) { return 1.0 - q(x); }, breakpoints, 1e-11);
  if (!(stay > 1e-12))
    throw std::domain_error("nondelegator_mean: every voter delegates (E[1 - q] = 0)");
  const double stay_x =
      expectation(dist, [&](double x) { return (1.0 - q(x)) * x; }, breakpoints, 1e-11);
  return stay_x / stay;
}

}  // namespace fluid
