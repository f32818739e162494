#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace memoc {

struct RunOptions {
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  bool verbose = false;
};

// Validates a config and fills every default; rejects unknown keys and
// malformed values with ConfigError naming the field. Idempotent.
nlohmann::json normalize_config(const nlohmann::json& config);

// Runs the experiment described by the config, writes the CSV artifacts and
// the JSON summary into opts.output_dir, and returns the summary. Throws
// ConfigError on schema problems; numerical failures from the solvers
// propagate as the module exceptions.
nlohmann::json run_experiment(const nlohmann::json& config,
                              const RunOptions& opts = {});

// CLI entry: 0 all checks pass, 1 numerical failure or failed check,
// 2 unreadable or invalid config.
int run_experiment_file(const std::string& config_path, const RunOptions& opts,
                        std::ostream& out, std::ostream& err);

// Stable table of the experiment kinds, required fields, and the property
// each one exercises.
std::string list_experiments();

}  // namespace memoc
