// Acceptance checks. One PASS/FAIL line per criterion.
//
//   fluid_acceptance                 all criteria
//   fluid_acceptance --criterion 7   one criterion

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fluid/delegation_graph.hpp"
#include "fluid/harness.hpp"
#include "fluid/parallel.hpp"
#include "fluid/processes.hpp"
#include "fluid/stats.hpp"
#include "fluid/tally.hpp"
#include "oracles.hpp"

using namespace fluid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const DistributionSpec kUnit = DistributionSpec::uniform(0, 1);

MechanismSpec cb_default() { return MechanismSpec::confidence_based(DelegationProbabilityFn::linear(0.8, 0.8)); }
MechanismSpec gc_default() { return MechanismSpec::general_continuous(0.3, normalize_phi(PairWeightFn::exp_in_y(1.0), kUnit)); }

ExperimentConfig config(MechanismSpec mech, DistributionSpec dist, std::vector<std::size_t> sizes, std::size_t reps,
                        std::uint64_t seed, unsigned threads) {
  ExperimentConfig cfg;
  cfg.mechanism = std::move(mech);
  cfg.distribution = std::move(dist);
  cfg.sizes = std::move(sizes);
  cfg.reps_per_size = reps;
  cfg.seed = seed;
  cfg.threads = threads;
  return cfg;
}

std::string csv(const auto& value) {
  std::ostringstream os;
  write_csv(os, value);
  return os.str();
}

Outcome c1_tail_oracle() {
  Timer timer;
  RandomStream rng(101);
  double worst = 0.0, worst_oracle = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<std::uint64_t> w(n);
    std::vector<double> p(n);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = rng.below(6);
      p[i] = rng.uniform();
      total += w[i];
    }
    const double threshold = static_cast<double>(total) / 2.0;
    const double dp = weighted_poisson_binomial_tail(w, p, threshold);
    worst = std::max(worst, std::abs(dp - brute_force_tail(w, p, threshold)));
    worst_oracle = std::max(worst_oracle, std::abs(dp - oracle::enumerate_tail(w, p, threshold)));
  }
  const double secs = timer.seconds();
  return {worst <= 1e-12 && worst_oracle <= 1e-12 && secs < 10.0,
          fmt("max |dp - brute| = %.3g, max |dp - enumeration| = %.3g (<= 1e-12), %.2f s (< 10 s)", worst,
              worst_oracle, secs)};
}

Outcome c2_cycle_semantics() {
  RandomStream rng(102);
  int mismatched = 0, accounting = 0, with_cycles = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const double delegate = rng.uniform();
    std::vector<std::int64_t> out(n, DelegationGraph::kVotesDirectly);
    for (std::size_t i = 0; i < n && n > 1; ++i) {
      if (!rng.bernoulli(delegate)) continue;
      auto t = rng.below(n - 1);
      if (t >= i) ++t;
      out[i] = static_cast<std::int64_t>(t);
    }
    const auto w = compute_weights(DelegationGraph(out));
    const auto expected = oracle::nullified_by_walk(out);
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same &= (w.is_nullified[i] != 0) == expected[i];
    mismatched += !same;
    accounting += w.total_weight + w.nullified.size() != n;
    with_cycles += !w.nullified.empty();
  }
  return {mismatched == 0 && accounting == 0,
          fmt("%d nullified-set mismatches, %d accounting failures over 10000 graphs (%d with cycles)", mismatched,
              accounting, with_cycles)};
}

Outcome c3_upward_acyclic() {
  const auto mech = MechanismSpec::upward(0.5);
  std::vector<int> cyclic(10000, 0), downhill(10000, 0);
  parallel_for(10000, default_thread_count(), [&](std::size_t rep) {
    RandomStream rng = RandomStream::derive(103, {rep});
    const auto p = sample_competencies(kUnit, 1000, rng);
    const auto g = sample_graph(mech, p, rng);
    cyclic[rep] = !compute_weights(g).nullified.empty();
    // every edge climbs in competence, which rules out cycles independently
    for (std::size_t i = 0; i < g.size(); ++i)
      if (auto t = g.target(i); t && !(p[*t] > p[i])) downhill[rep] = 1;
  });
  const int c = std::accumulate(cyclic.begin(), cyclic.end(), 0);
  const int d = std::accumulate(downhill.begin(), downhill.end(), 0);
  return {c == 0 && d == 0, fmt("%d instances with cycles, %d with a non-increasing edge, of 10000", c, d)};
}

Outcome c4_gamma_formula() {
  Timer timer;
  RandomStream rng(104);
  constexpr int kReps = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int rep = 0; rep < kReps; ++rep) {
    const double w = static_cast<double>(simulate_w_process(4, 2, 0.5, rng));
    sum += w;
    sum_sq += w * w;
  }
  const double m = sum / kReps;
  const double se = std::sqrt((sum_sq / kReps - m * m) / (kReps - 1));
  const double z = std::abs(m - 35.0 / 24.0) / se;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(100000);
    const std::size_t k = 1 + rng.below(n);
    const double p = rng.uniform();
    const double prod = oracle::product_w(n, k, p);
    worst = std::max(worst, std::abs(expected_w(n, k, p) - prod) / prod);
  }
  const double secs = timer.seconds();
  return {z <= 3.0 && worst <= 1e-10 && secs < 60.0,
          fmt("mean %.6f vs 35/24 = %.6f (%.2f SE, <= 3), max rel err %.3g (<= 1e-10), %.1f s (< 60 s)", m,
              35.0 / 24.0, z, worst, secs)};
}

Outcome c5_sampler_equivalence() {
  constexpr std::size_t n = 200;
  constexpr int kReps = 10000;
  const auto mech = MechanismSpec::upward(0.5);
  RandomStream rng(105);
  std::vector<std::uint64_t> direct_random, seq_random, simon_random;
  std::vector<std::uint64_t> direct_largest, seq_largest, simon_largest;
  for (int rep = 0; rep < kReps; ++rep) {
    const auto p = sample_competencies(kUnit, n, rng);
    const auto direct = sample_graph(mech, p, rng);
    const auto seq = sample_upward_sequential(0.5, p, rng);
    const auto voter = rng.below(n);
    direct_random.push_back(oracle::component_size_of(direct.edges(), voter));
    seq_random.push_back(oracle::component_size_of(seq.edges(), voter));
    direct_largest.push_back(oracle::component_sizes(direct.edges()).front());
    seq_largest.push_back(oracle::component_sizes(seq.edges()).front());

    const auto sizes = simulate_simon_components(n, 0.5, rng);
    simon_largest.push_back(*std::max_element(sizes.begin(), sizes.end()));
    // a uniformly random voter lands in a component with probability size / n
    std::uint64_t pick = rng.below(n);
    for (auto s : sizes) {
      if (pick < s) {
        simon_random.push_back(s);
        break;
      }
      pick -= s;
    }
  }
  const double p1 = chi_square_two_sample(direct_random, seq_random).p_value;
  const double p2 = chi_square_two_sample(direct_largest, seq_largest).p_value;
  const double p3 = chi_square_two_sample(direct_random, simon_random).p_value;
  const double p4 = chi_square_two_sample(direct_largest, simon_largest).p_value;
  const double lowest = std::min({p1, p2, p3, p4});
  return {lowest >= 0.001,
          fmt("chi-square p: sequential %.3g / %.3g, Simon %.3g / %.3g (random voter's / largest component; all >= "
              "0.001)",
              p1, p2, p3, p4)};
}

Outcome c6_condition1_polynomial() {
  auto cfg = config(MechanismSpec::upward(0.5), DistributionSpec::uniform(0, 0.98), {10000}, 200, 106,
                    default_thread_count());
  cfg.delta_exponent = 0.95;
  cfg.alpha = 0.01;
  const auto row = run_condition_experiment(cfg).rows[0];
  return {row.freq1 >= 0.99, fmt("freq(max_weight <= n^0.95 = %.0f) = %.3f (>= 0.99), mean max_weight %.1f", row.bound,
                                 row.freq1, row.mean_max_weight)};
}

Outcome c7_log_scaling() {
  const auto cfg = config(cb_default(), kUnit, {1000, 10000, 100000}, 100, 107, default_thread_count());
  const auto rows = run_scaling_study(cfg);
  bool ok = true;
  std::string ratios;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ratios += fmt("%s%.3f", k ? ", " : "", rows[k].ratio_to_log_n);
    if (k > 0) ok &= rows[k].ratio_to_log_n <= 1.2 * rows[k - 1].ratio_to_log_n;
  }
  const double nullified = rows[1].nullified_fraction;
  return {ok && nullified <= 0.01,
          fmt("p99(max_weight)/ln n = %s (non-increasing within 20%%), nullified fraction at 1e4 = %.5f (<= 0.01)",
              ratios.c_str(), nullified)};
}

Outcome c8_eigenvector() {
  const auto beta = DistributionSpec::truncated_beta(2, 5);
  std::vector<double> table;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) table.push_back(0.5 + 0.2 * i + 0.6 * j);
  const std::vector<PairWeightFn> phis{PairWeightFn::constant1(), PairWeightFn::affine_in_y(1, 2),
                                       PairWeightFn::exp_in_y(1), PairWeightFn::exp_in_y(2),
                                       PairWeightFn::tabulated(5, table)};
  const std::vector<std::pair<double, double>> p_eps{{0.3, 0.05}, {0.5, 0.05}, {0.6, 0.02}, {0.1, 0.2}};
  double worst = 0.0, worst_radius = 0.0;
  int models = 0, radius_failures = 0;
  for (const auto& dist : {kUnit, beta, DistributionSpec::uniform_eta(0.01)})
    for (const auto& raw : phis)
      for (auto [p, eps] : p_eps) {
        if (bucket_growth_factor(p, eps) >= 1.0) continue;
        const auto m = build_bucket_model(normalize_phi(raw, dist), dist, p, eps);
        const double lambda = bucket_growth_factor(p, eps);
        for (std::size_t t = 0; t < m.B; ++t) {
          double mpi = 0.0;
          for (std::size_t u = 0; u < m.B; ++u) mpi += m.at(m.M, t, u) * m.pi[u];
          worst = std::max(worst, std::abs(mpi - lambda * m.pi[t]));
        }
        radius_failures += !(m.spectral_radius < 1.0);
        worst_radius = std::max(worst_radius, m.spectral_radius);
        ++models;
      }
  return {worst <= 1e-9 && radius_failures == 0,
          fmt("%d models, max |M pi - lambda pi| = %.3g (<= 1e-9), max spectral radius %.4f (< 1)", models, worst,
              worst_radius)};
}

ExperimentConfig c9_config(unsigned threads) {
  auto cfg = config(MechanismSpec::upward(0.5), DistributionSpec::uniform_eta(0.01), {4000}, 50, 109, threads);
  cfg.gain_mode.kind = GainMode::Kind::exact;
  return cfg;
}

Outcome c9_positive_gain() {
  Timer timer;
  const auto rows = run_gain_sweep(c9_config(default_thread_count()));
  const auto good = std::count_if(rows.begin(), rows.end(), [](const GainRow& r) { return r.report.gain >= 0.9; });
  std::vector<double> gains, direct;
  for (const auto& r : rows) {
    gains.push_back(r.report.gain);
    direct.push_back(r.report.p_direct);
  }
  const double frac = static_cast<double>(good) / static_cast<double>(rows.size());
  const double secs = timer.seconds();
  return {frac >= 0.95 && secs < 600.0,
          fmt("gain >= 0.9 in %.2f of %zu seeds (>= 0.95); median gain %.3f, median P_direct %.3f, %.1f s (< 600 s)",
              frac, rows.size(), quantile(gains, 0.5), quantile(direct, 0.5), secs)};
}

std::vector<ExperimentConfig> c10_configs(unsigned threads) {
  std::vector<ExperimentConfig> out;
  std::uint64_t seed = 110;
  for (const auto& mech : {MechanismSpec::upward(0.5), cb_default(), gc_default()}) {
    auto cfg = config(mech, kUnit, {2000}, 100, seed++, threads);
    cfg.gain_mode.kind = GainMode::Kind::exact;
    out.push_back(cfg);
  }
  return out;
}

Outcome c10_do_no_harm() {
  bool ok = true;
  std::string detail;
  for (const auto& cfg : c10_configs(default_thread_count())) {
    std::vector<double> gains;
    for (const auto& r : run_gain_sweep(cfg)) gains.push_back(r.report.gain);
    const double m = mean(gains), q5 = quantile(gains, 0.05);
    ok &= m >= -0.01 && q5 >= -0.05;
    detail += fmt("%s%s: mean %.4f, p5 %.4f", detail.empty() ? "" : "; ", cfg.mechanism.describe().c_str(), m, q5);
  }
  return {ok, detail + " (mean >= -0.01, p5 >= -0.05)"};
}

Outcome c11_monte_carlo() {
  ExperimentConfig cfg = config(MechanismSpec::upward(0.5), kUnit, {500}, 1, 111, 1);
  const auto [p, g] = sample_instance(cfg, 500, 0);
  const auto exact = exact_gain(p, g);
  constexpr int kTrials = 500;
  constexpr std::uint64_t kReps = 1000;
  std::vector<int> covered(kTrials, 0);
  parallel_for(kTrials, default_thread_count(), [&](std::size_t trial) {
    const auto mc = monte_carlo_gain(p, g, kReps, 0.01, RandomStream::derive(111, {trial}));
    covered[trial] = std::abs(mc.gain - exact.gain) <= 2.0 * *mc.ci_halfwidth;
  });
  const double rate = static_cast<double>(std::accumulate(covered.begin(), covered.end(), 0)) / kTrials;
  return {rate >= 0.98, fmt("exact gain %.4f; interval gain +/- 2h (h = %.4f) covers it in %.3f of %d trials (>= 0.98)",
                            exact.gain, hoeffding_halfwidth(kReps, 0.01), rate, kTrials)};
}

Outcome c12_determinism() {
  std::vector<std::pair<std::string, std::function<std::string(unsigned)>>> experiments{
      {"conditions (6)",
       [](unsigned t) {
         auto cfg = config(MechanismSpec::upward(0.5), DistributionSpec::uniform(0, 0.98), {10000}, 200, 106, t);
         cfg.delta_exponent = 0.95;
         cfg.alpha = 0.01;
         return csv(run_condition_experiment(cfg));
       }},
      {"scaling (7)", [](unsigned t) { return csv(run_scaling_study(config(cb_default(), kUnit, {1000, 10000, 100000}, 100, 107, t))); }},
      {"gain (9)", [](unsigned t) { return csv(run_gain_sweep(c9_config(t))); }},
      {"gain (10)",
       [](unsigned t) {
         std::string all;
         for (const auto& cfg : c10_configs(t)) all += csv(run_gain_sweep(cfg));
         return all;
       }},
      {"monte carlo gain",
       [](unsigned t) {
         auto cfg = config(cb_default(), kUnit, {500}, 20, 112, t);
         cfg.gain_mode.kind = GainMode::Kind::monte_carlo;
         cfg.gain_mode.reps = 2000;
         return csv(run_gain_sweep(cfg));
       }},
      {"sixstep",
       [](unsigned t) { return csv(run_six_step_experiment(config(gc_default(), kUnit, {1000, 4000}, 40, 113, t))); }},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, run] : experiments) {
    const std::string reference = run(1);
    bool same = true;
    for (unsigned threads : {4u, 16u}) same &= run(threads) == reference;
    ok &= same;
    detail += fmt("%s%s %s", detail.empty() ? "" : ", ", name.c_str(), same ? "identical" : "DIFFERS");
  }
  return {ok, detail + " at 1/4/16 threads"};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"tail DP matches brute force", c1_tail_oracle},
    {"cycle nullification semantics", c2_cycle_semantics},
    {"upward graphs are acyclic", c3_upward_acyclic},
    {"W-process gamma formula", c4_gamma_formula},
    {"upward direct and sequential samplers agree", c5_sampler_equivalence},
    {"condition 1 with polynomial bound", c6_condition1_polynomial},
    {"condition 1 logarithmic scaling", c7_log_scaling},
    {"bucket model eigenvector identity", c8_eigenvector},
    {"positive gain at desk scale", c9_positive_gain},
    {"do no harm at desk scale", c10_do_no_harm},
    {"monte carlo interval coverage", c11_monte_carlo},
    {"thread-count determinism", c12_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > 12) {
    std::fprintf(stderr, "criterion must be 1..12\n");
    return 2;
  }
  bool all_pass = true;
  for (int k = 1; k <= 12; ++k) {
    if (only != 0 && k != only) continue;
    const auto& c = kCriteria[k - 1];
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("C%d %s %s: %s\n", k, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    all_pass &= o.pass;
  }
  return all_pass ? 0 : 1;
}
