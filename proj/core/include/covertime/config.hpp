#pragma once

// Run configuration: defaults, COVERTIME_SEED, a flat key=value config file,
// and command-line flags, resolved in that order (later sources win).

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "covertime/rng.hpp"

namespace covertime::harness {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = kDefaultSeed;
  int workers = 1;
  std::string output_path;    // empty -> stdout
  std::string format = "csv"; // csv | json
  std::map<std::string, std::string> params;  // per-subcommand parameters
};

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// Parse a flat key=value document ('#' comments, blank lines allowed).
// Malformed lines raise ConfigError naming the line number.
std::vector<KeyValue> parse_config_text(const std::string& text);
std::vector<KeyValue> read_config_file(const std::string& path);

// Accepts decimal or 0x-prefixed hex.
std::uint64_t parse_seed(const std::string& text);

// Resolve precedence: defaults < env_seed < file < flags.  `allowed_params`
// lists subcommand parameter keys valid in addition to the built-ins
// (seed, workers, out, format); unknown keys raise ConfigError listing the
// valid ones.  `flags` contains only flags explicitly set on the command line.
RunConfig resolve_config(const std::vector<KeyValue>& file_entries,
                         const std::map<std::string, std::string>& flags,
                         const std::set<std::string>& allowed_params,
                         const char* env_seed);

}  // namespace covertime::harness
