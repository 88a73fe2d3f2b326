#include "fluid/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "fluid/parallel.hpp"
#include "fluid/stats.hpp"

#ifndef FLUID_VERSION
#define FLUID_VERSION "unknown"
#endif

namespace fluid {

namespace {

// Stream tags; each experiment family draws from its own subtree of the seed.
constexpr std::uint64_t kInstanceTag = 1;
constexpr std::uint64_t kSixStepTag = 2;

constexpr double kFitQuantile = 0.999;

double log_n(std::size_t n) { return std::log(static_cast<double>(std::max<std::size_t>(n, 2))); }

double sum_in_order(const std::vector<double>& values) { return pairwise_sum(values); }

}  // namespace

std::string version() { return FLUID_VERSION; }

double upward_exponent_floor(double p) { return p + (1.0 - p) * 7.0 / 8.0; }

double effective_delta_exponent(const ExperimentConfig& cfg) {
  if (cfg.delta_exponent) return *cfg.delta_exponent;
  const double p = std::get<MechanismSpec::Upward>(cfg.mechanism.variant()).p;
  return (upward_exponent_floor(p) + 1.0) / 2.0;
}

void ExperimentConfig::validate() const {
  if (sizes.empty()) throw ConfigError("sizes", "must not be empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 2) throw ConfigError("sizes", "every size must be at least 2");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sizes", "must be strictly increasing");
  }
  if (reps_per_size < 1) throw ConfigError("reps_per_size", "must be at least 1");
  if (delta_exponent) {
    if (!mechanism.is_upward())
      throw ConfigError("delta_exponent", "only applies to the upward mechanism");
    const double p = std::get<MechanismSpec::Upward>(mechanism.variant()).p;
    const double lo = upward_exponent_floor(p);
    if (!(*delta_exponent > lo && *delta_exponent < 1.0))
      throw ConfigError("delta_exponent", "must lie in (" + format_double(lo) + ", 1)");
  }
  if (log_coefficient && !(*log_coefficient > 0.0))
    throw ConfigError("log_coefficient", "must be positive");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("eps", "must lie in (0, 0.5)");
  if (!(ci_delta > 0.0 && ci_delta < 1.0)) throw ConfigError("ci_delta", "must lie in (0, 1)");
  if (exact_cap < 1) throw ConfigError("exact_cap", "must be positive");
  if (gain_mode.kind == GainMode::Kind::monte_carlo &&
      !(gain_mode.delta > 0.0 && gain_mode.delta < 1.0))
    throw ConfigError("gain_mode.delta", "must lie in (0, 1)");
}

LiftConstant estimate_lift_constant(const MechanismSpec& mech, const DistributionSpec& dist) {
  LiftConstant out;
  out.mu = mean(dist);
  if (const auto* up = std::get_if<MechanismSpec::Upward>(&mech.variant())) {
    const double a = inverse_cdf(dist, 0.25);
    const double b = inverse_cdf(dist, 0.5);
    out.mu_star_or_c = b - a;
    out.suggested_alpha = (b - a) * 0.25 * 0.5 * up->p / 8.0;
    out.degenerate = !(b > a);
    return out;
  }
  if (const auto* cb = std::get_if<MechanismSpec::ConfidenceBased>(&mech.variant())) {
    const auto& q = cb->q;
    const auto kinks = q.breakpoints();
    out.mu_star_or_c = nondelegator_mean(dist, [&](double x) { return q(x); }, kinks);
    if (!(out.mu_star_or_c > out.mu + 1e-12))
      throw std::domain_error("estimate_lift_constant: mu* <= mu; q must be strictly decreasing");
    out.suggested_alpha = (out.mu_star_or_c - out.mu) / 6.0;
    return out;
  }
  const auto& gc = std::get<MechanismSpec::GeneralContinuous>(mech.variant());
  const PairWeightFn phi = gc.phi.is_normalized() ? gc.phi : normalize_phi(gc.phi, dist);
  double c = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 200;
  for (int k = 0; k < kGrid; ++k) {
    const double x = static_cast<double>(k) / (kGrid - 1);
    c = std::min(c, expectation(dist, [&](double y) { return phi(x, y) * y; }) - out.mu);
  }
  out.mu_star_or_c = c;
  out.degenerate = !(c > 1e-9);
  if (out.degenerate) out.mu_star_or_c = std::max(c, 0.0);
  out.suggested_alpha = out.degenerate ? 0.0 : c * (1.0 - gc.p) / 4.0;
  return out;
}

std::pair<std::vector<double>, DelegationGraph> sample_instance(const ExperimentConfig& cfg,
                                                                std::size_t n, std::size_t rep) {
  const RandomStream root = RandomStream::derive(cfg.seed, {kInstanceTag, n, rep});
  RandomStream competence_rng = root.split(0);
  RandomStream graph_rng = root.split(1);
  std::vector<double> p = sample_competencies(cfg.distribution, n, competence_rng);
  DelegationGraph g = sample_graph(cfg.mechanism, p, graph_rng);
  return {std::move(p), std::move(g)};
}

namespace {

struct RepSummary {
  std::uint64_t edges = 0;
  std::uint64_t max_weight = 0;
  std::uint64_t total_weight = 0;
  std::uint64_t nullified = 0;
  double sum_p = 0.0;
  double sum_wp = 0.0;
};

RepSummary summarize(const std::vector<double>& p, const DelegationGraph& g,
                     const WeightProfile& w) {
  RepSummary s;
  s.edges = g.edge_count();
  s.max_weight = w.max_weight;
  s.total_weight = w.total_weight;
  s.nullified = w.nullified.size();
  std::vector<double> weighted(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) weighted[i] = static_cast<double>(w.weight[i]) * p[i];
  s.sum_p = sum_in_order(p);
  s.sum_wp = sum_in_order(weighted);
  return s;
}

std::vector<RepSummary> summaries_for(const ExperimentConfig& cfg, std::size_t n) {
  std::vector<RepSummary> out(cfg.reps_per_size);
  parallel_for(cfg.reps_per_size, cfg.threads, [&](std::size_t rep) {
    auto [p, g] = sample_instance(cfg, n, rep);
    out[rep] = summarize(p, g, compute_weights(g));
  });
  return out;
}

double fit_log_coefficient(const std::vector<double>& max_values, std::size_t n) {
  std::vector<double> ratios;
  ratios.reserve(max_values.size());
  for (double m : max_values) ratios.push_back(m / log_n(n));
  return std::max(quantile(ratios, kFitQuantile), 1e-12);
}

}  // namespace

ConditionReport run_condition_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ConditionReport report;
  if (cfg.alpha) {
    report.alpha = *cfg.alpha;
    report.alpha_from_config = true;
  } else {
    LiftConstant lift;
    try {
      lift = estimate_lift_constant(cfg.mechanism, cfg.distribution);
    } catch (const std::domain_error& e) {
      throw ConfigError("alpha", std::string("no default available (") + e.what() + "); set alpha");
    }
    if (!(lift.suggested_alpha > 0.0))
      throw ConfigError("alpha", "the lift constant is zero for this mechanism; set alpha");
    report.alpha = lift.suggested_alpha;
  }

  std::vector<std::vector<RepSummary>> per_size;
  for (std::size_t n : cfg.sizes) per_size.push_back(summaries_for(cfg, n));

  const bool upward = cfg.mechanism.is_upward();
  if (upward) {
    report.delta_exponent = effective_delta_exponent(cfg);
  } else if (cfg.log_coefficient) {
    report.log_coefficient = cfg.log_coefficient;
  } else {
    std::vector<double> first;
    for (const auto& s : per_size.front()) first.push_back(static_cast<double>(s.max_weight));
    report.log_coefficient = fit_log_coefficient(first, cfg.sizes.front());
    report.log_coefficient_fitted = true;
  }

  const double ci = hoeffding_halfwidth(cfg.reps_per_size, cfg.ci_delta);
  for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
    const std::size_t n = cfg.sizes[k];
    const double dn = static_cast<double>(n);
    ConditionRow row;
    row.n = n;
    row.reps = cfg.reps_per_size;
    row.bound = upward ? std::pow(dn, *report.delta_exponent) : *report.log_coefficient * log_n(n);
    std::vector<double> e1, e2, e3, maxw, lift, nullified;
    for (const auto& s : per_size[k]) {
      const double gain = s.sum_wp - s.sum_p;
      e1.push_back(static_cast<double>(s.max_weight) <= row.bound ? 1.0 : 0.0);
      e2.push_back(gain >= 2.0 * report.alpha * dn ? 1.0 : 0.0);
      e3.push_back(s.sum_p + report.alpha * dn <= dn / 2.0 && dn / 2.0 <= s.sum_wp - report.alpha * dn
                       ? 1.0
                       : 0.0);
      maxw.push_back(static_cast<double>(s.max_weight));
      lift.push_back(gain / dn);
      nullified.push_back(static_cast<double>(s.nullified));
    }
    row.freq1 = mean(e1);
    row.freq2 = mean(e2);
    row.freq3 = mean(e3);
    row.ci1 = row.ci2 = row.ci3 = ci;
    row.mean_max_weight = mean(maxw);
    row.mean_lift = mean(lift);
    row.mean_nullified = mean(nullified);
    report.rows.push_back(row);
  }
  return report;
}

std::vector<GainRow> run_gain_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.gain_mode.kind == GainMode::Kind::exact && cfg.sizes.back() > cfg.exact_cap)
    throw ConfigError("gain_mode", "exact tally requested for n = " + std::to_string(cfg.sizes.back()) +
                                       " above exact_cap = " + std::to_string(cfg.exact_cap));
  std::vector<GainRow> rows;
  for (std::size_t n : cfg.sizes) {
    std::vector<GainRow> block(cfg.reps_per_size);
    parallel_for(cfg.reps_per_size, cfg.threads, [&](std::size_t rep) {
      auto [p, g] = sample_instance(cfg, n, rep);
      const WeightProfile w = compute_weights(g);
      GainRow& row = block[rep];
      row.n = n;
      row.rep = rep;
      row.max_weight = w.max_weight;
      row.nullified = w.nullified.size();
      const bool exact = cfg.gain_mode.kind == GainMode::Kind::exact ||
                         (cfg.gain_mode.kind == GainMode::Kind::automatic && n <= cfg.exact_cap);
      if (exact) {
        row.report = exact_gain(p, g, cfg.exact_cap);
      } else {
        const double delta = cfg.gain_mode.kind == GainMode::Kind::monte_carlo ? cfg.gain_mode.delta : 0.01;
        const std::uint64_t reps = cfg.gain_mode.reps > 0 ? cfg.gain_mode.reps : hoeffding_reps(0.005, 0.01);
        const RandomStream tally = RandomStream::derive(cfg.seed, {kInstanceTag, n, rep}).split(2);
        row.report = monte_carlo_gain(p, g, reps, delta, tally, 1);
      }
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

std::vector<ScalingRow> run_scaling_study(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ScalingRow> rows;
  for (std::size_t n : cfg.sizes) {
    const auto summaries = summaries_for(cfg, n);
    std::vector<double> maxw, nullified;
    for (const auto& s : summaries) {
      maxw.push_back(static_cast<double>(s.max_weight));
      nullified.push_back(static_cast<double>(s.nullified) / static_cast<double>(n));
    }
    ScalingRow row;
    row.n = n;
    row.reps = cfg.reps_per_size;
    row.p99_max_weight = quantile(maxw, 0.99);
    row.ratio_to_log_n = row.p99_max_weight / log_n(n);
    row.mean_max_weight = mean(maxw);
    row.nullified_fraction = mean(nullified);
    rows.push_back(row);
  }
  return rows;
}

std::vector<InstanceRow> run_simulation(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<InstanceRow> rows;
  for (std::size_t n : cfg.sizes) {
    const auto summaries = summaries_for(cfg, n);
    for (std::size_t rep = 0; rep < summaries.size(); ++rep) {
      const auto& s = summaries[rep];
      rows.push_back({n, rep, s.edges, s.max_weight, s.total_weight, s.nullified, s.sum_p, s.sum_wp});
    }
  }
  return rows;
}

std::array<bool, 6> evaluate_six_step_events(const SixStepDiagnostics& d, std::size_t n, double p,
                                             const SixStepParams& params,
                                             SixStepDiagnostics* with_thresholds) {
  const double dn = static_cast<double>(n);
  const double eps = params.eps;
  const double target = params.mu + params.c;
  std::array<double, 6> t{};
  t[0] = (1.0 - p - eps) * dn;
  t[1] = dn * (params.mu + eps) * (p + eps);
  t[2] = (1.0 - eps) / (1.0 + eps) * target;
  t[3] = 0.0;
  t[4] = dn - params.bound * params.bound * log_n(n);
  t[5] = (1.0 - eps) * (1.0 - eps) / (1.0 + eps) * target * (p - 2.0 * eps) * dn;
  const double m = static_cast<double>(d.m_size);
  std::array<bool, 6> e{};
  e[0] = m >= t[0] && m <= (1.0 - p + eps) * dn;
  e[1] = d.sum_p_outside <= t[1];
  e[2] = d.min_ratio >= t[2];
  e[3] = true;
  e[4] = static_cast<double>(d.max_dels) <= params.bound &&
         static_cast<double>(d.partial_total_weight) >= t[4];
  e[5] = d.weighted_q_sum >= t[5];
  if (with_thresholds) with_thresholds->thresholds = t;
  return e;
}

SixStepResult run_six_step_sampler(const MechanismSpec& mech, const DistributionSpec& dist,
                                   std::size_t n, const SixStepParams& params, RandomStream& rng) {
  const auto* gc = std::get_if<MechanismSpec::GeneralContinuous>(&mech.variant());
  if (!gc) throw std::invalid_argument("run_six_step_sampler: needs a general continuous mechanism");
  if (n < 2) throw std::invalid_argument("run_six_step_sampler: n must be at least 2");
  const PairWeightFn& phi = gc->phi;

  SixStepResult out;
  out.competencies.assign(n, 0.0);
  out.in_m.assign(n, 0);
  out.in_r.assign(n, 0);
  out.graph = DelegationGraph(n);
  auto& pv = out.competencies;

  // 1. voters who keep their vote
  for (std::size_t i = 0; i < n; ++i) out.in_m[i] = rng.bernoulli(1.0 - gc->p) ? 1 : 0;
  // 2, 3. competencies outside M, then inside M
  for (std::size_t i = 0; i < n; ++i)
    if (!out.in_m[i]) pv[i] = sample(dist, rng);
  for (std::size_t i = 0; i < n; ++i)
    if (out.in_m[i]) pv[i] = sample(dist, rng);

  std::vector<VoterId> m_set, rest, everyone(n);
  std::iota(everyone.begin(), everyone.end(), VoterId{0});
  for (VoterId i = 0; i < n; ++i) (out.in_m[i] ? m_set : rest).push_back(i);
  const detail::TargetSampler to_m(phi, pv, m_set);
  const detail::TargetSampler to_rest(phi, pv, rest);
  const detail::TargetSampler to_all(phi, pv, everyone);

  // 4. delegators whose target lies in M
  for (VoterId i : rest) {
    const double all = to_all.total_weight(i);
    const double share = all > 0.0 ? to_m.total_weight(i) / all : 0.0;
    out.in_r[i] = rng.uniform() < share ? 1 : 0;
  }
  // 5. delegations that stay outside M
  for (VoterId i : rest)
    if (!out.in_r[i]) out.graph.set_target(i, to_rest.draw(i, rng));

  auto& d = out.diagnostics;
  d.m_size = m_set.size();
  const WeightProfile partial = compute_weights(out.graph);
  d.partial_total_weight = partial.total_weight;
  for (VoterId i : rest) d.max_dels = std::max(d.max_dels, partial.dels[i]);
  {
    std::vector<double> outside;
    for (VoterId i : rest) outside.push_back(pv[i]);
    d.sum_p_outside = sum_in_order(outside);
  }
  auto ratio_for = [&](double x) {
    double num = 0.0, den = 0.0;
    for (VoterId j : m_set) {
      const double w = phi(x, pv[j]);
      num += w * pv[j];
      den += w;
    }
    return den > 0.0 ? num / den : 0.0;
  };
  d.min_ratio = rest.empty() ? std::numeric_limits<double>::infinity() : 0.0;
  if (!rest.empty() && !m_set.empty()) {
    if (phi.separable_in_y()) {
      d.min_ratio = ratio_for(0.0);
    } else {
      d.min_ratio = std::numeric_limits<double>::infinity();
      for (VoterId i : rest) d.min_ratio = std::min(d.min_ratio, ratio_for(pv[i]));
    }
  }

  // 6. delegations into M
  std::vector<double> weighted_q;
  for (VoterId i : rest) {
    if (!out.in_r[i]) continue;
    ++d.r_size;
    const auto target = to_m.draw(i, rng);
    out.graph.set_target(i, target);
    if (target) weighted_q.push_back(static_cast<double>(1 + partial.dels[i]) * pv[*target]);
  }
  d.weighted_q_sum = sum_in_order(weighted_q);
  out.events = evaluate_six_step_events(d, n, gc->p, params, &d);
  return out;
}

SixStepReport run_six_step_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto* gc = std::get_if<MechanismSpec::GeneralContinuous>(&cfg.mechanism.variant());
  if (!gc) throw ConfigError("mechanism", "sixstep needs a general mechanism");
  SixStepReport report;
  report.lift = estimate_lift_constant(cfg.mechanism, cfg.distribution);

  SixStepParams params;
  params.eps = cfg.eps;
  params.mu = report.lift.mu;
  params.c = report.lift.mu_star_or_c;

  std::vector<std::vector<SixStepResult>> runs;
  for (std::size_t n : cfg.sizes) {
    std::vector<SixStepResult> block(cfg.reps_per_size);
    parallel_for(cfg.reps_per_size, cfg.threads, [&](std::size_t rep) {
      RandomStream rng = RandomStream::derive(cfg.seed, {kSixStepTag, n, rep});
      auto r = run_six_step_sampler(cfg.mechanism, cfg.distribution, n, params, rng);
      // Only the diagnostics are kept; instances are large.
      block[rep].diagnostics = r.diagnostics;
    });
    runs.push_back(std::move(block));
  }

  if (cfg.log_coefficient) {
    report.log_coefficient = *cfg.log_coefficient;
  } else {
    std::vector<double> first;
    for (const auto& r : runs.front()) first.push_back(static_cast<double>(r.diagnostics.max_dels));
    report.log_coefficient = fit_log_coefficient(first, cfg.sizes.front());
    report.log_coefficient_fitted = true;
  }

  for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
    const std::size_t n = cfg.sizes[k];
    SixStepRow row;
    row.n = n;
    row.reps = cfg.reps_per_size;
    row.bound = report.log_coefficient * log_n(n);
    params.bound = row.bound;
    std::array<std::vector<double>, 6> hits;
    std::vector<double> all, m_frac, r_frac, total;
    for (const auto& r : runs[k]) {
      const auto e = evaluate_six_step_events(r.diagnostics, n, gc->p, params);
      bool every = true;
      for (std::size_t s = 0; s < 6; ++s) {
        hits[s].push_back(e[s] ? 1.0 : 0.0);
        every = every && e[s];
      }
      all.push_back(every ? 1.0 : 0.0);
      m_frac.push_back(static_cast<double>(r.diagnostics.m_size) / static_cast<double>(n));
      r_frac.push_back(static_cast<double>(r.diagnostics.r_size) / static_cast<double>(n));
      total.push_back(static_cast<double>(r.diagnostics.partial_total_weight));
    }
    for (std::size_t s = 0; s < 6; ++s) row.freq[s] = mean(hits[s]);
    row.freq_all = mean(all);
    row.ci = hoeffding_halfwidth(cfg.reps_per_size, cfg.ci_delta);
    row.mean_m_fraction = mean(m_frac);
    row.mean_r_fraction = mean(r_frac);
    row.mean_total_weight = mean(total);
    report.rows.push_back(row);
  }
  return report;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const ConditionReport& r) {
  os << "n,reps,freq1,ci1,freq2,ci2,freq3,ci3,mean_max_weight,mean_lift,mean_nullified\n";
  for (const auto& row : r.rows)
    os << row.n << ',' << row.reps << ',' << format_double(row.freq1) << ',' << format_double(row.ci1)
       << ',' << format_double(row.freq2) << ',' << format_double(row.ci2) << ','
       << format_double(row.freq3) << ',' << format_double(row.ci3) << ','
       << format_double(row.mean_max_weight) << ',' << format_double(row.mean_lift) << ','
       << format_double(row.mean_nullified) << '\n';
}

void write_csv(std::ostream& os, const std::vector<GainRow>& rows) {
  os << "n,rep,gain,p_direct,p_fluid,max_weight,nullified\n";
  for (const auto& row : rows)
    os << row.n << ',' << row.rep << ',' << format_double(row.report.gain) << ','
       << format_double(row.report.p_direct) << ',' << format_double(row.report.p_fluid) << ','
       << row.max_weight << ',' << row.nullified << '\n';
}

void write_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "n,reps,p99_max_weight,p99_over_log_n,mean_max_weight,nullified_fraction\n";
  for (const auto& row : rows)
    os << row.n << ',' << row.reps << ',' << format_double(row.p99_max_weight) << ','
       << format_double(row.ratio_to_log_n) << ',' << format_double(row.mean_max_weight) << ','
       << format_double(row.nullified_fraction) << '\n';
}

void write_csv(std::ostream& os, const std::vector<InstanceRow>& rows) {
  os << "n,rep,edges,max_weight,total_weight,nullified,sum_p,sum_weighted_p\n";
  for (const auto& row : rows)
    os << row.n << ',' << row.rep << ',' << row.edges << ',' << row.max_weight << ','
       << row.total_weight << ',' << row.nullified << ',' << format_double(row.sum_p) << ','
       << format_double(row.sum_weighted_p) << '\n';
}

void write_csv(std::ostream& os, const SixStepReport& r) {
  os << "n,reps,bound,e1,e2,e3,e4,e5,e6,all,ci,mean_m_fraction,mean_r_fraction,mean_partial_total_weight\n";
  for (const auto& row : r.rows) {
    os << row.n << ',' << row.reps << ',' << format_double(row.bound);
    for (double f : row.freq) os << ',' << format_double(f);
    os << ',' << format_double(row.freq_all) << ',' << format_double(row.ci) << ','
       << format_double(row.mean_m_fraction) << ',' << format_double(row.mean_r_fraction) << ','
       << format_double(row.mean_total_weight) << '\n';
  }
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i, h >>= 4) buf[i] = kHex[h & 0xF];
  buf[16] = '\0';
  return buf;
}

std::string to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = version();
  j["seed"] = m.seed;
  j["config_hash"] = config_hash(m.config_json);
  j["config"] = nlohmann::ordered_json::parse(m.config_json);
  j["threads"] = m.threads;
  j["wall_seconds"] = m.wall_seconds;
  j["outputs"] = m.outputs;
  j["details"] = nlohmann::ordered_json::parse(m.extra_json);
  return j.dump(2);
}

}  // namespace fluid
