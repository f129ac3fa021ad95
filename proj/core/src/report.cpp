#include "covertime/report.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace covertime::harness {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string Report::to_csv() const {
  std::string out = "module,quantity,value,stderr,n,seed,substream\n";
  for (const auto& r : rows) {
    out += r.module;
    out += ',';
    out += r.quantity;
    out += ',';
    out += format_double(r.value);
    out += ',';
    if (!std::isnan(r.stderr_)) out += format_double(r.stderr_);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.substream);
    out += '\n';
  }
  return out;
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string json_number(double x) {
  if (std::isnan(x) || std::isinf(x)) return "null";
  return format_double(x);
}

}  // namespace

std::string Report::to_json() const {
  std::string out = "[\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += "  {\"module\":\"" + json_escape(r.module) + "\",\"quantity\":\"" +
           json_escape(r.quantity) + "\",\"value\":" + json_number(r.value) +
           ",\"stderr\":" + json_number(r.stderr_) +
           ",\"n\":" + std::to_string(r.n) + ",\"seed\":" + std::to_string(r.seed) +
           ",\"substream\":" + std::to_string(r.substream) + "}";
    if (i + 1 < rows.size()) out += ',';
    out += '\n';
  }
  out += "]\n";
  return out;
}

}  // namespace covertime::harness
