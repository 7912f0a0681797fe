#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sean/graph_store.hpp"
#include "sean/training.hpp"

namespace sean::cli {

// Invalid configuration: unknown key, malformed value or violated bound.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string unit;
  std::string help;
};

// Every key accepted by any command, in display order.
auto schema() -> const std::vector<KeySpec>&;

struct RunConfig {
  std::string command;
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path checkpoint;
  bool bipartite = true;
  SplitSpec split;
  TrainConfig train;
  Setting setting = Setting::kTransductive;
  double inductive_fraction = 0.1;
  bool node_class = false;
  bool prune_trace = false;
  std::vector<double> rates;
  std::vector<std::size_t> ks;
  std::size_t jobs = 1;
  std::size_t gc_seeds = 20;
  double gc_eps = 1e-5;
  SynthConfig synth;
  // Fully resolved key -> value map (defaults, then file, then flags).
  std::map<std::string, std::string> resolved;
};

// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
// keys are ConfigErrors.
auto parse_config_file(const std::filesystem::path& path)
    -> std::map<std::string, std::string>;

// Layers defaults < file < flags and validates every value.
auto resolve_config(const std::string& command,
                    const std::map<std::string, std::string>& file_values,
                    const std::map<std::string, std::string>& flag_values)
    -> RunConfig;

// FNV-1a 64 over the sorted resolved keys, excluding output locations.
auto config_hash(const RunConfig& config) -> std::string;

// Entry point. Returns 0 on success, 1 on runtime failure, 2 on invalid
// configuration.
auto run_cli(int argc, const char* const* argv) -> int;

}  // namespace sean::cli
