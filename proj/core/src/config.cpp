#include "fluid/config.hpp"

#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace fluid {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const Json& require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  return j;
}

void reject_unknown(const Json& j, const std::string& path, std::initializer_list<const char*> known) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(join(path, key), "unknown field");
}

const Json& field(const Json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key), "is required");
  return *it;
}

double number(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_number()) throw ConfigError(join(path, key), "must be a number");
  return v.get<double>();
}

std::uint64_t count(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(path, "must be a nonnegative integer");
}

std::string kind_of(const Json& j, const std::string& path) {
  const Json& v = field(j, path, "kind");
  if (!v.is_string()) throw ConfigError(join(path, "kind"), "must be a string");
  return v.get<std::string>();
}

// Runs a factory, turning its argument errors into ConfigError at `path`.
template <class F>
auto build(const std::string& path, F&& factory) {
  try {
    return factory();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

std::vector<std::pair<double, double>> pairs(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "must be a nonempty array of [x, value] pairs");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& e = j[i];
    const std::string at = path + "[" + std::to_string(i) + "]";
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ConfigError(at, "must be a pair of numbers");
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

DistributionSpec parse_distribution(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "uniform") {
    reject_unknown(j, path, {"kind", "lo", "hi"});
    const double lo = number(j, path, "lo"), hi = number(j, path, "hi");
    return build(path, [&] { return DistributionSpec::uniform(lo, hi); });
  }
  if (kind == "uniform_eta") {
    reject_unknown(j, path, {"kind", "eta"});
    const double eta = number(j, path, "eta");
    if (!(eta > 0.0 && eta < 0.5)) throw ConfigError(join(path, "eta"), "must lie in (0, 0.5)");
    return build(path, [&] { return DistributionSpec::uniform_eta(eta); });
  }
  if (kind == "truncated_beta") {
    reject_unknown(j, path, {"kind", "a", "b"});
    const double a = number(j, path, "a"), b = number(j, path, "b");
    return build(path, [&] { return DistributionSpec::truncated_beta(a, b); });
  }
  if (kind == "piecewise_linear") {
    reject_unknown(j, path, {"kind", "knots"});
    std::vector<DensityKnot> knots;
    for (auto [x, d] : pairs(field(j, path, "knots"), join(path, "knots"))) knots.push_back({x, d});
    return build(join(path, "knots"), [&] { return DistributionSpec::piecewise_linear(knots); });
  }
  throw ConfigError(join(path, "kind"), "unknown distribution kind '" + kind + "'");
}

DelegationProbabilityFn parse_q(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "constant") {
    reject_unknown(j, path, {"kind", "p"});
    const double p = number(j, path, "p");
    return build(path, [&] { return DelegationProbabilityFn::constant(p); });
  }
  if (kind == "linear") {
    reject_unknown(j, path, {"kind", "a", "b"});
    const double a = number(j, path, "a"), b = number(j, path, "b");
    return build(path, [&] { return DelegationProbabilityFn::linear(a, b); });
  }
  if (kind == "piecewise_linear") {
    reject_unknown(j, path, {"kind", "knots"});
    std::vector<ProbabilityKnot> knots;
    for (auto [x, v] : pairs(field(j, path, "knots"), join(path, "knots"))) knots.push_back({x, v});
    return build(join(path, "knots"), [&] { return DelegationProbabilityFn::piecewise_linear(knots); });
  }
  throw ConfigError(join(path, "kind"), "unknown delegation probability kind '" + kind + "'");
}

PairWeightFn parse_phi(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "indicator") {
    reject_unknown(j, path, {"kind"});
    return PairWeightFn::indicator();
  }
  if (kind == "constant") {
    reject_unknown(j, path, {"kind"});
    return PairWeightFn::constant1();
  }
  if (kind == "affine_in_y") {
    reject_unknown(j, path, {"kind", "c0", "c1"});
    const double c0 = number(j, path, "c0"), c1 = number(j, path, "c1");
    return build(path, [&] { return PairWeightFn::affine_in_y(c0, c1); });
  }
  if (kind == "exp_in_y") {
    reject_unknown(j, path, {"kind", "lambda"});
    const double lambda = number(j, path, "lambda");
    return build(path, [&] { return PairWeightFn::exp_in_y(lambda); });
  }
  if (kind == "tabulated") {
    reject_unknown(j, path, {"kind", "size", "values"});
    const auto size = count(field(j, path, "size"), join(path, "size"));
    const Json& values = field(j, path, "values");
    if (!values.is_array()) throw ConfigError(join(path, "values"), "must be an array of numbers");
    std::vector<double> v;
    for (const auto& x : values) {
      if (!x.is_number()) throw ConfigError(join(path, "values"), "must be an array of numbers");
      v.push_back(x.get<double>());
    }
    return build(path, [&] { return PairWeightFn::tabulated(size, v); });
  }
  throw ConfigError(join(path, "kind"), "unknown phi kind '" + kind + "'");
}

MechanismSpec parse_mechanism(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "upward") {
    reject_unknown(j, path, {"kind", "p"});
    const double p = number(j, path, "p");
    return build(join(path, "p"), [&] { return MechanismSpec::upward(p); });
  }
  if (kind == "confidence") {
    reject_unknown(j, path, {"kind", "q"});
    auto q = parse_q(field(j, path, "q"), join(path, "q"));
    return build(join(path, "q"), [&] { return MechanismSpec::confidence_based(q); });
  }
  if (kind == "general") {
    reject_unknown(j, path, {"kind", "p", "phi"});
    const double p = number(j, path, "p");
    auto phi = parse_phi(field(j, path, "phi"), join(path, "phi"));
    return build(path, [&] { return MechanismSpec::general_continuous(p, phi); });
  }
  throw ConfigError(join(path, "kind"), "unknown mechanism kind '" + kind + "'");
}

GainMode parse_gain_mode(const Json& j) {
  const std::string path = "gain_mode";
  GainMode mode;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "auto") return mode;
    if (s == "exact") {
      mode.kind = GainMode::Kind::exact;
      return mode;
    }
    if (s == "monte_carlo") {
      mode.kind = GainMode::Kind::monte_carlo;
      return mode;
    }
    throw ConfigError(path, "must be \"auto\", \"exact\" or {\"kind\": \"monte_carlo\", ...}");
  }
  require_object(j, path);
  if (kind_of(j, path) != "monte_carlo") throw ConfigError(join(path, "kind"), "object form must be monte_carlo");
  reject_unknown(j, path, {"kind", "reps", "delta"});
  mode.kind = GainMode::Kind::monte_carlo;
  if (j.contains("reps")) {
    mode.reps = count(j["reps"], join(path, "reps"));
    if (mode.reps == 0) throw ConfigError(join(path, "reps"), "must be positive");
  }
  if (j.contains("delta")) mode.delta = number(j, path, "delta");
  return mode;
}

OrderedJson distribution_json(const DistributionSpec& d) {
  OrderedJson j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          j = {{"kind", "uniform"}, {"lo", v.lo}, {"hi", v.hi}};
        } else if constexpr (std::is_same_v<T, TruncatedBeta>) {
          j = {{"kind", "truncated_beta"}, {"a", v.a}, {"b", v.b}};
        } else {
          OrderedJson knots = OrderedJson::array();
          for (const auto& k : v.knots) knots.push_back({k.x, k.density});
          j = {{"kind", "piecewise_linear"}, {"knots", knots}};
        }
      },
      d.variant());
  return j;
}

OrderedJson q_json(const DelegationProbabilityFn& q) {
  OrderedJson j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DelegationProbabilityFn::Constant>) {
          j = {{"kind", "constant"}, {"p", v.p}};
        } else if constexpr (std::is_same_v<T, DelegationProbabilityFn::Linear>) {
          j = {{"kind", "linear"}, {"a", v.a}, {"b", v.b}};
        } else {
          OrderedJson knots = OrderedJson::array();
          for (const auto& k : v.knots) knots.push_back({k.x, k.value});
          j = {{"kind", "piecewise_linear"}, {"knots", knots}};
        }
      },
      q.variant());
  return j;
}

OrderedJson phi_json(const PairWeightFn& phi) {
  OrderedJson j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PairWeightFn::Indicator>) {
          j = {{"kind", "indicator"}};
        } else if constexpr (std::is_same_v<T, PairWeightFn::Constant1>) {
          j = {{"kind", "constant"}};
        } else if constexpr (std::is_same_v<T, PairWeightFn::AffineInY>) {
          j = {{"kind", "affine_in_y"}, {"c0", v.c0}, {"c1", v.c1}};
        } else if constexpr (std::is_same_v<T, PairWeightFn::ExpInY>) {
          j = {{"kind", "exp_in_y"}, {"lambda", v.lambda}};
        } else {
          j = {{"kind", "tabulated"}, {"size", v.size}, {"values", v.values}};
        }
      },
      phi.variant());
  return j;
}

OrderedJson mechanism_json(const MechanismSpec& m) {
  OrderedJson j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MechanismSpec::Upward>) {
          j = {{"kind", "upward"}, {"p", v.p}};
        } else if constexpr (std::is_same_v<T, MechanismSpec::ConfidenceBased>) {
          j = {{"kind", "confidence"}, {"q", q_json(v.q)}};
        } else {
          j = {{"kind", "general"}, {"p", v.p}, {"phi", phi_json(v.phi)}};
        }
      },
      m.variant());
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  require_object(j, "config");
  reject_unknown(j, "", {"mechanism", "distribution", "sizes", "reps_per_size", "seed", "delta_exponent",
                         "log_coefficient", "alpha", "gain_mode", "eps", "ci_delta", "exact_cap"});

  ExperimentConfig cfg;
  cfg.mechanism = parse_mechanism(field(j, "", "mechanism"), "mechanism");
  cfg.distribution = parse_distribution(field(j, "", "distribution"), "distribution");

  const Json& sizes = field(j, "", "sizes");
  if (!sizes.is_array()) throw ConfigError("sizes", "must be an array of counts");
  cfg.sizes.clear();
  for (std::size_t i = 0; i < sizes.size(); ++i)
    cfg.sizes.push_back(count(sizes[i], "sizes[" + std::to_string(i) + "]"));

  if (j.contains("reps_per_size")) cfg.reps_per_size = count(j["reps_per_size"], "reps_per_size");
  if (j.contains("seed")) cfg.seed = count(j["seed"], "seed");
  if (j.contains("delta_exponent")) cfg.delta_exponent = number(j, "", "delta_exponent");
  if (j.contains("log_coefficient")) cfg.log_coefficient = number(j, "", "log_coefficient");
  if (j.contains("alpha")) cfg.alpha = number(j, "", "alpha");
  if (j.contains("gain_mode")) cfg.gain_mode = parse_gain_mode(j["gain_mode"]);
  if (j.contains("eps")) cfg.eps = number(j, "", "eps");
  if (j.contains("ci_delta")) cfg.ci_delta = number(j, "", "ci_delta");
  if (j.contains("exact_cap")) cfg.exact_cap = count(j["exact_cap"], "exact_cap");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str());
}

std::string to_canonical_json(const ExperimentConfig& cfg) {
  OrderedJson j;
  j["mechanism"] = mechanism_json(cfg.mechanism);
  j["distribution"] = distribution_json(cfg.distribution);
  j["sizes"] = cfg.sizes;
  j["reps_per_size"] = cfg.reps_per_size;
  j["seed"] = cfg.seed;
  if (cfg.delta_exponent) j["delta_exponent"] = *cfg.delta_exponent;
  if (cfg.log_coefficient) j["log_coefficient"] = *cfg.log_coefficient;
  if (cfg.alpha) j["alpha"] = *cfg.alpha;
  switch (cfg.gain_mode.kind) {
    case GainMode::Kind::automatic:
      j["gain_mode"] = "auto";
      break;
    case GainMode::Kind::exact:
      j["gain_mode"] = "exact";
      break;
    case GainMode::Kind::monte_carlo: {
      OrderedJson mc = {{"kind", "monte_carlo"}, {"delta", cfg.gain_mode.delta}};
      if (cfg.gain_mode.reps > 0) mc["reps"] = cfg.gain_mode.reps;
      j["gain_mode"] = mc;
      break;
    }
  }
  j["eps"] = cfg.eps;
  j["ci_delta"] = cfg.ci_delta;
  j["exact_cap"] = cfg.exact_cap;
  return j.dump();
}

}  // namespace fluid
