#pragma once

// Config-driven experiments. A config is one JSON document:
//
//   {
//     "command": "pressure-curve",
//     "system":  {"kind": "cantor-repeller", "slopes": [3, 3]},
//     "measure": {"type": "bernoulli", "p": [0.5, 0.5]},
//     "params":  {"t": [0, 0.5, 1], "epsilons": [0.1, 0.05], "n_range": [4, 8]},
//     "seed": 7,
//     "output_dir": "out/cantor"
//   }
//
// The full grammar is in README.md. Parsing fills every default, so the
// resolved document records exactly what ran.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lydim/report.hpp"
#include "lydim/systems.hpp"

namespace lydim {

enum class Command { pressure_curve, dimension, lyapunov, box_count, horseshoe_approx, verify_identities };

std::string to_string(Command command);

struct ExperimentConfig {
  Command command = Command::dimension;
  nlohmann::json system;   // resolved system spec (null for verify-identities)
  nlohmann::json measure;  // resolved measure spec or null
  nlohmann::json params;   // resolved parameters with defaults
  std::optional<std::uint64_t> seed;
  std::string output_dir;

  /// The document that reproduces this run.
  nlohmann::json resolved() const;
};

/// Validates a config document; throws ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Reads and parses a file (IoError if unreadable, ConfigError if malformed).
ExperimentConfig load_config(const std::filesystem::path& path);

ModelSystem build_system(const nlohmann::json& spec, const std::string& path = "system");
ErgodicMeasureSpec build_measure(const nlohmann::json& spec, int alphabet, const std::string& path = "measure");

/// Commands that draw random samples and therefore need a seed.
bool needs_seed(const ExperimentConfig& config);

struct RunOptions {
  std::optional<std::filesystem::path> out;  // overrides output_dir
  std::optional<std::uint64_t> seed;         // overrides the config seed
  unsigned threads = 0;                      // 0 = all cores; never changes results
  bool geometric_check = false;
};

struct ReportBundle {
  std::vector<Table> tables;
  nlohmann::json manifest;
  bool passed = true;  // false when verify-identities found a failure
};

/// Runs the command and returns every table (all cells checked finite).
ReportBundle compute_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Tool version recorded in manifests.
std::string tool_version();

/// SHA-256 over the resolved config, seed and tool version.
std::string config_hash(const ExperimentConfig& config, bool geometric_check);

/// Writes tables and manifest.json into dir; IoError on failure.
void write_bundle(ReportBundle& bundle, const std::filesystem::path& dir);

/// compute_experiment followed by write_bundle into the resolved output directory.
ReportBundle run_experiment(ExperimentConfig config, const RunOptions& options);

}  // namespace lydim
