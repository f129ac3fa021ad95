#pragma once

// Report rows and serialization.  Every experiment emits rows with the fixed
// schema (module, quantity, value, stderr, n, seed, substream) so results are
// machine-joinable across runs; formatting uses shortest-round-trip doubles so
// a fixed seed yields byte-identical files.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace covertime::harness {

struct Row {
  std::string module;
  std::string quantity;
  double value = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();  // NaN -> empty field
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t substream = 0;
};

// Shortest representation that round-trips exactly (std::to_chars).
std::string format_double(double x);

struct Report {
  std::vector<Row> rows;

  void add(Row row) { rows.push_back(std::move(row)); }
  void add(const Report& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  }

  std::string to_csv() const;   // includes header row
  std::string to_json() const;  // array of objects
};

// Outcome of one statistical check in the self-test suite.
struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::int64_t n = 0;
  bool pass = false;
  std::string detail;  // free-form context (tolerances, observed values)
};

}  // namespace covertime::harness
