#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluid/delegation_graph.hpp"
#include "fluid/distributions.hpp"
#include "fluid/mechanisms.hpp"
#include "fluid/random.hpp"
#include "fluid/tally.hpp"

namespace fluid {

/// Invalid experiment configuration; field() names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GainMode {
  enum class Kind { automatic, exact, monte_carlo };
  Kind kind = Kind::automatic;
  std::uint64_t reps = 0;  // monte_carlo; 0 picks the Hoeffding count for half-width 0.005
  double delta = 0.01;
};

struct ExperimentConfig {
  MechanismSpec mechanism = MechanismSpec::upward(0.5);
  DistributionSpec distribution = DistributionSpec::uniform(0.0, 1.0);
  std::vector<std::size_t> sizes{1000};
  std::size_t reps_per_size = 100;
  std::uint64_t seed = 0;
  std::optional<double> delta_exponent;   // Upward: C(n) = n^delta
  std::optional<double> log_coefficient;  // otherwise: C(n) = c ln n
  std::optional<double> alpha;
  GainMode gain_mode;
  double eps = 0.05;
  double ci_delta = 0.01;
  std::size_t exact_cap = kDefaultExactCap;
  unsigned threads = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// Lower end of the admissible Upward exponent range, p + (1 - p) 7/8.
double upward_exponent_floor(double p);
/// delta_exponent if set, else the midpoint of (floor, 1).
double effective_delta_exponent(const ExperimentConfig& cfg);

struct LiftConstant {
  double mu = 0.0;
  /// mu* for ConfidenceBased, c for GeneralContinuous, b - a for Upward.
  double mu_star_or_c = 0.0;
  double suggested_alpha = 0.0;
  /// c is (numerically) zero: phi is not strictly increasing in y.
  bool degenerate = false;
};

/// Throws std::domain_error for ConfidenceBased when mu* <= mu.
LiftConstant estimate_lift_constant(const MechanismSpec& mech, const DistributionSpec& dist);

struct ConditionRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  double bound = 0.0;  // C(n)
  double freq1 = 0.0, ci1 = 0.0;
  double freq2 = 0.0, ci2 = 0.0;
  double freq3 = 0.0, ci3 = 0.0;
  double mean_max_weight = 0.0;
  double mean_lift = 0.0;  // (sum w p - sum p) / n
  double mean_nullified = 0.0;
};

struct ConditionReport {
  std::vector<ConditionRow> rows;
  double alpha = 0.0;
  bool alpha_from_config = false;
  std::optional<double> delta_exponent;
  std::optional<double> log_coefficient;
  bool log_coefficient_fitted = false;
};

ConditionReport run_condition_experiment(const ExperimentConfig& cfg);

struct GainRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  GainReport report;
  std::uint64_t max_weight = 0;
  std::uint64_t nullified = 0;
};

std::vector<GainRow> run_gain_sweep(const ExperimentConfig& cfg);

struct ScalingRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  double p99_max_weight = 0.0;
  double ratio_to_log_n = 0.0;
  double mean_max_weight = 0.0;
  double nullified_fraction = 0.0;
};

std::vector<ScalingRow> run_scaling_study(const ExperimentConfig& cfg);

struct InstanceRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t edges = 0;
  std::uint64_t max_weight = 0;
  std::uint64_t total_weight = 0;
  std::uint64_t nullified = 0;
  double sum_p = 0.0;
  double sum_weighted_p = 0.0;
};

/// One instance per (n, rep) with summary statistics.
std::vector<InstanceRow> run_simulation(const ExperimentConfig& cfg);

/// Competencies and graph of replication `rep` at size n, exactly as drawn
/// by run_simulation and the other experiments for the same seed.
std::pair<std::vector<double>, DelegationGraph> sample_instance(const ExperimentConfig& cfg,
                                                                std::size_t n, std::size_t rep);

struct SixStepParams {
  double eps = 0.05;
  double mu = 0.5;
  double c = 0.0;      // lift constant
  double bound = 0.0;  // C(n) for the dels bound
};

struct SixStepDiagnostics {
  std::size_t m_size = 0;  // |M|, voters who keep their vote
  std::size_t r_size = 0;  // |R|, delegators into M
  double sum_p_outside = 0.0;
  double min_ratio = 0.0;  // min over i outside M of the phi-weighted mean competence of M
  std::uint64_t max_dels = 0;        // over voters outside M, step-5 subgraph
  std::uint64_t partial_total_weight = 0;
  double weighted_q_sum = 0.0;       // sum over R of (1 + dels_i) Q_i
  std::array<double, 6> thresholds{};
};

struct SixStepResult {
  std::vector<double> competencies;
  DelegationGraph graph;
  std::vector<std::uint8_t> in_m;
  std::vector<std::uint8_t> in_r;
  SixStepDiagnostics diagnostics;
  std::array<bool, 6> events{};
};

std::array<bool, 6> evaluate_six_step_events(const SixStepDiagnostics& d, std::size_t n, double p,
                                             const SixStepParams& params,
                                             SixStepDiagnostics* with_thresholds = nullptr);

/// Samples a GeneralContinuous instance in six conditional steps. The joint
/// law of (competencies, graph) equals sample_graph's.
SixStepResult run_six_step_sampler(const MechanismSpec& mech, const DistributionSpec& dist,
                                   std::size_t n, const SixStepParams& params, RandomStream& rng);

struct SixStepRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  double bound = 0.0;
  std::array<double, 6> freq{};
  double freq_all = 0.0;
  double ci = 0.0;
  double mean_m_fraction = 0.0;
  double mean_r_fraction = 0.0;
  double mean_total_weight = 0.0;
};

struct SixStepReport {
  std::vector<SixStepRow> rows;
  LiftConstant lift;
  double log_coefficient = 0.0;
  bool log_coefficient_fitted = false;
};

SixStepReport run_six_step_experiment(const ExperimentConfig& cfg);

/// Shortest round-trip decimal form; identical on every run.
std::string format_double(double x);

void write_csv(std::ostream& os, const ConditionReport& r);
void write_csv(std::ostream& os, const std::vector<GainRow>& rows);
void write_csv(std::ostream& os, const std::vector<ScalingRow>& rows);
void write_csv(std::ostream& os, const std::vector<InstanceRow>& rows);
void write_csv(std::ostream& os, const SixStepReport& r);

struct RunManifest {
  std::string command;
  std::string config_json;  // canonical config
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::string extra_json = "{}";  // experiment-specific values (alpha used, fitted C(n), ...)
};

/// 64-bit FNV-1a, hex encoded.
std::string config_hash(const std::string& text);
std::string to_json(const RunManifest& m);

/// Library version string.
std::string version();

}  // namespace fluid
