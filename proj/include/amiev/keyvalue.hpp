#pragma once

// Plain-text configuration: one `key = value` per line, '#' starts a comment.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "amiev/error.hpp"

namespace amiev {

class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text, const std::string& origin = "<string>") {
    KeyValues kv;
    std::size_t pos = 0;
    int no = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        fail(ErrorCode::ParseError, origin + ":" + std::to_string(no) + ": expected 'key = value'");
      }
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) fail(ErrorCode::ParseError, origin + ":" + std::to_string(no) + ": empty key");
      kv.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    kv.origin_ = origin;
    return kv;
  }

  static KeyValues load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::ParseError, origin_ + ": missing key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? require_double(key) : fallback;
  }

  double require_double(const std::string& key) const { return to_number<double>(key, require_string(key)); }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? to_number<std::int64_t>(key, require_string(key)) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = require_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorCode::ParseError, origin_ + ": key '" + key + "' is not a boolean");
  }

  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::string_view rest = values_.at(key);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      out.push_back(to_number<double>(key, std::string(trim(rest.substr(0, comma)))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  template <typename T>
  T to_number(const std::string& key, const std::string& text) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(ErrorCode::ParseError, origin_ + ": key '" + key + "' has non-numeric value '" + text + "'");
    }
    return value;
  }

  std::map<std::string, std::string> values_;
  std::string origin_ = "<string>";
};

/// Shortest round-trip text for a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace amiev
