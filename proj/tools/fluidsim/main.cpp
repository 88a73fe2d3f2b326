// fluidsim: run delegation experiments from a JSON config.
//
//   fluidsim conditions --config upward.json --out runs/u1
//   fluidsim gain --config cbd.json --out runs/g --sizes 500,1000 --threads 4
//
// Exit status: 0 success, 1 invalid config or arguments, 2 runtime failure.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fluid/config.hpp"
#include "fluid/harness.hpp"
#include "fluid/parallel.hpp"
#include "fluid/processes.hpp"

namespace fs = std::filesystem;
using namespace fluid;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

constexpr std::uint64_t kMultitypeCap = 10000;
constexpr std::uint64_t kMultitypeTag = 3;

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> sizes;
  unsigned threads = 0;
};

class Run {
 public:
  Run(const Invocation& inv, ExperimentConfig cfg) : inv_(inv), cfg_(std::move(cfg)) {
    fs::create_directories(inv_.output_dir);
  }

  template <class Writer>
  void write(const std::string& name, Writer&& writer) {
    const fs::path path = fs::path(inv_.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    writer(out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
    outputs_.push_back(name);
    std::cerr << "fluidsim: wrote " << path.string() << '\n';
  }

  void finish(nlohmann::ordered_json details) {
    RunManifest m;
    m.command = inv_.subcommand;
    m.config_json = to_canonical_json(cfg_);
    m.seed = cfg_.seed;
    m.threads = cfg_.threads;
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m.outputs = outputs_;
    m.extra_json = details.dump();
    const fs::path path = fs::path(inv_.output_dir) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    out << to_json(m) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }

  const ExperimentConfig& cfg() const { return cfg_; }

 private:
  const Invocation& inv_;
  ExperimentConfig cfg_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void run_simulate(Run& run) {
  const auto rows = run_simulation(run.cfg());
  run.write("instances.csv", [&](std::ostream& os) { write_csv(os, rows); });
  for (std::size_t n : run.cfg().sizes) {
    const auto [p, g] = sample_instance(run.cfg(), n, 0);
    run.write("edges_n" + std::to_string(n) + "_rep0.csv", [&](std::ostream& os) { write_edge_list_csv(os, g); });
  }
  run.finish(nlohmann::ordered_json::object());
}

void run_gain(Run& run) {
  const auto rows = run_gain_sweep(run.cfg());
  run.write("gain.csv", [&](std::ostream& os) { write_csv(os, rows); });
  run.finish({{"exact_cap", run.cfg().exact_cap}});
}

void run_conditions(Run& run) {
  const auto report = run_condition_experiment(run.cfg());
  run.write("conditions.csv", [&](std::ostream& os) { write_csv(os, report); });
  nlohmann::ordered_json bounds = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) bounds.push_back({{"n", row.n}, {"C(n)", row.bound}});
  run.finish({{"alpha", report.alpha},
              {"alpha_from_config", report.alpha_from_config},
              {"delta_exponent", optional_json(report.delta_exponent)},
              {"log_coefficient", optional_json(report.log_coefficient)},
              {"log_coefficient_fitted", report.log_coefficient_fitted},
              {"bounds", bounds}});
}

void run_scaling(Run& run) {
  const auto rows = run_scaling_study(run.cfg());
  run.write("scaling.csv", [&](std::ostream& os) { write_csv(os, rows); });
  run.finish(nlohmann::ordered_json::object());
}

void run_processes(Run& run) {
  const auto& cfg = run.cfg();
  const auto* gc = std::get_if<MechanismSpec::GeneralContinuous>(&cfg.mechanism.variant());
  if (!gc) throw ConfigError("mechanism", "processes needs a general mechanism");
  if (bucket_growth_factor(gc->p, cfg.eps) >= 1.0)
    throw ConfigError("eps", "p(1+eps)^3/(1-2eps) = " + format_double(bucket_growth_factor(gc->p, cfg.eps)) +
                                 " >= 1; the branching process would not be sub-critical");
  PairWeightFn phi = gc->phi;
  try {
    if (!phi.is_normalized()) phi = normalize_phi(phi, cfg.distribution);
  } catch (const std::exception& e) {
    throw ConfigError("mechanism.phi", e.what());
  }
  BucketModel model;
  try {
    model = build_bucket_model(phi, cfg.distribution, gc->p, cfg.eps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("eps", e.what());
  }
  std::cerr << "fluidsim: B = " << model.B << ", spectral radius = " << format_double(model.spectral_radius) << '\n';
  run.write("bucket_model.json", [&](std::ostream& os) { os << to_json(model) << '\n'; });

  struct Draw {
    std::size_t start = 0;
    MultitypeSize size;
  };
  std::vector<Draw> draws(cfg.reps_per_size);
  parallel_for(cfg.reps_per_size, cfg.threads, [&](std::size_t rep) {
    RandomStream rng = RandomStream::derive(cfg.seed, {kMultitypeTag, rep});
    draws[rep].start = model.bucket_of(sample(cfg.distribution, rng));
    draws[rep].size = simulate_multitype_poisson(model, draws[rep].start, kMultitypeCap, rng);
  });
  run.write("multitype.csv", [&](std::ostream& os) {
    os << "rep,start_type,size,capped\n";
    for (std::size_t rep = 0; rep < draws.size(); ++rep)
      os << rep << ',' << draws[rep].start << ',' << draws[rep].size.size << ','
         << (draws[rep].size.capped ? 1 : 0) << '\n';
  });
  run.finish({{"B", model.B}, {"spectral_radius", model.spectral_radius}, {"cap", kMultitypeCap}});
}

void run_sixstep(Run& run) {
  const auto report = run_six_step_experiment(run.cfg());
  run.write("sixstep.csv", [&](std::ostream& os) { write_csv(os, report); });
  run.finish({{"mu", report.lift.mu},
              {"c", report.lift.mu_star_or_c},
              {"c_degenerate", report.lift.degenerate},
              {"log_coefficient", report.log_coefficient},
              {"log_coefficient_fitted", report.log_coefficient_fitted}});
}

int dispatch(const Invocation& inv) {
  ExperimentConfig cfg = load_experiment_config(inv.config_path);
  if (inv.seed) cfg.seed = *inv.seed;
  if (!inv.sizes.empty()) cfg.sizes = inv.sizes;
  cfg.threads = inv.threads > 0 ? inv.threads : default_thread_count();
  cfg.validate();

  std::cerr << "fluidsim: " << inv.subcommand << " with " << cfg.mechanism.describe() << " on "
            << cfg.distribution.describe() << ", seed " << cfg.seed << ", " << cfg.threads << " thread(s)\n";
  Run run(inv, std::move(cfg));
  if (inv.subcommand == "simulate") run_simulate(run);
  else if (inv.subcommand == "gain") run_gain(run);
  else if (inv.subcommand == "conditions") run_conditions(run);
  else if (inv.subcommand == "scaling") run_scaling(run);
  else if (inv.subcommand == "processes") run_processes(run);
  else run_sixstep(run);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delegation mechanism experiments"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Invocation inv;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "sample instances and write summaries and edge lists"},
      {"gain", "per-instance gain sweep"},
      {"conditions", "condition frequency report"},
      {"scaling", "max-weight and cycle-mass scaling"},
      {"processes", "bucket model and multitype branching draws"},
      {"sixstep", "six-step sampler event frequencies"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", inv.output_dir, "output directory")->required();
    sub->add_option("--seed", inv.seed, "override the config seed");
    sub->add_option("--sizes", inv.sizes, "override sizes, e.g. 500,1000")->delimiter(',');
    sub->add_option("--threads", inv.threads, "worker threads (default: hardware concurrency)");
    sub->callback([&inv, sub] { inv.subcommand = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    return dispatch(inv);
  } catch (const ConfigError& e) {
    std::cerr << "fluidsim: invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "fluidsim: error: " << e.what() << '\n';
    return kRuntime;
  }
}
