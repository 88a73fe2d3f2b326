#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fluid/harness.hpp"

namespace fluid {

/// Parses and validates an experiment config document. Every problem is
/// reported as ConfigError naming the field by its dotted path, e.g.
/// "mechanism.q.b". Unknown fields are rejected.
///
///   {
///     "mechanism": {"kind": "general", "p": 0.3, "phi": {"kind": "exp_in_y", "lambda": 1}},
///     "distribution": {"kind": "uniform", "lo": 0, "hi": 1},
///     "sizes": [1000, 10000], "reps_per_size": 100, "seed": 7,
///     "gain_mode": "auto"
///   }
ExperimentConfig parse_experiment_config(std::string_view json_text);

/// Reads the file, then parse_experiment_config. An unreadable file is a
/// ConfigError on field "config".
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Stable JSON rendering of a config (keys in fixed order, no whitespace);
/// parse_experiment_config(to_canonical_json(c)) reproduces c.
std::string to_canonical_json(const ExperimentConfig& cfg);

}  // namespace fluid
