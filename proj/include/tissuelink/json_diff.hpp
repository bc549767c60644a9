#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tissuelink {

struct JsonMismatch {
  std::string path;
  nlohmann::json expected;
  nlohmann::json actual;
};

inline bool numbers_close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-3});
}

/// Structural comparison; numbers match within `rel` relative tolerance
/// (with a 1e-3 magnitude floor so values near zero compare absolutely).
/// When `subset` is set, top-level keys absent from `expected` are ignored.
inline void json_diff(const nlohmann::json& expected, const nlohmann::json& actual, double rel,
                      bool subset, const std::string& path, std::vector<JsonMismatch>& out) {
  if (expected.is_number() && actual.is_number()) {
    if (!numbers_close(expected.get<double>(), actual.get<double>(), rel))
      out.push_back({path, expected, actual});
    return;
  }
  if (expected.type() != actual.type()) {
    out.push_back({path, expected, actual});
    return;
  }
  if (expected.is_object()) {
    for (const auto& [k, v] : expected.items()) {
      const auto sub = path.empty() ? k : path + "." + k;
      if (!actual.contains(k)) out.push_back({sub, v, nullptr});
      else json_diff(v, actual.at(k), rel, false, sub, out);
    }
    if (!subset)
      for (const auto& [k, v] : actual.items())
        if (!expected.contains(k)) out.push_back({path.empty() ? k : path + "." + k, nullptr, v});
    return;
  }
  if (expected.is_array()) {
    if (expected.size() != actual.size()) {
      out.push_back({path, expected, actual});
      return;
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
      json_diff(expected[i], actual[i], rel, false, path + "[" + std::to_string(i) + "]", out);
    return;
  }
  if (expected != actual) out.push_back({path, expected, actual});
}

inline std::vector<JsonMismatch> json_diff(const nlohmann::json& expected, const nlohmann::json& actual,
                                           double rel = 1e-9, bool subset = false) {
  std::vector<JsonMismatch> out;
  json_diff(expected, actual, rel, subset, "", out);
  return out;
}

}  // namespace tissuelink
