#include "covertime/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace covertime::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<KeyValue> parse_config_text(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    }
    KeyValue kv;
    kv.key = trim(line.substr(0, eq));
    kv.value = trim(line.substr(eq + 1));
    kv.line = lineno;
    if (kv.key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty seed value");
  try {
    std::size_t pos = 0;
    const int base = (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) ? 16 : 10;
    const std::uint64_t v = std::stoull(base == 16 ? t.substr(2) : t, &pos, base);
    if (pos != (base == 16 ? t.size() - 2 : t.size())) {
      throw ConfigError("invalid seed value: " + text);
    }
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("invalid seed value: " + text);
  }
}

RunConfig resolve_config(const std::vector<KeyValue>& file_entries,
                         const std::map<std::string, std::string>& flags,
                         const std::set<std::string>& allowed_params,
                         const char* env_seed) {
  RunConfig cfg;
  if (env_seed != nullptr && *env_seed != '\0') cfg.seed = parse_seed(env_seed);

  auto valid_keys_message = [&]() {
    std::string msg = "seed, workers, out, format";
    for (const auto& k : allowed_params) msg += ", " + k;
    return msg;
  };

  auto apply = [&](const std::string& key, const std::string& value, int line) {
    const std::string where =
        line > 0 ? " (config line " + std::to_string(line) + ")" : "";
    if (key == "seed") {
      cfg.seed = parse_seed(value);
    } else if (key == "workers") {
      int w = 0;
      try {
        w = std::stoi(value);
      } catch (const std::exception&) {
        throw ConfigError("invalid workers value: " + value + where);
      }
      if (w <= 0) throw ConfigError("workers must be positive, got " + value + where);
      cfg.workers = w;
    } else if (key == "out") {
      cfg.output_path = value;
    } else if (key == "format") {
      if (value != "csv" && value != "json") {
        throw ConfigError("format must be csv or json, got " + value + where);
      }
      cfg.format = value;
    } else if (allowed_params.count(key) != 0) {
      cfg.params[key] = value;
    } else {
      throw ConfigError("unknown key '" + key + "'" + where +
                        "; valid keys: " + valid_keys_message());
    }
  };

  for (const auto& kv : file_entries) {
    // Flags override the file: skip file entries shadowed by a flag.
    if (flags.count(kv.key) != 0) continue;
    apply(kv.key, kv.value, kv.line);
  }
  for (const auto& [k, v] : flags) apply(k, v, 0);
  return cfg;
}

}  // namespace covertime::harness
