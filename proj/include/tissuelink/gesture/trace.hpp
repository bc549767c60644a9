#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/geometry.hpp"

namespace tissuelink::gesture {

enum class Hand { left, right };

inline const char* to_string(Hand h) { return h == Hand::left ? "left" : "right"; }

inline Hand other(Hand h) { return h == Hand::left ? Hand::right : Hand::left; }

struct HandPose {
  Vec3 index{};
  Vec3 thumb{};
  Vec3 wrist{};

  bool operator==(const HandPose&) const = default;
};

/// One sample of both hands, world meters. An absent hand has no pose.
struct HandFrame {
  double t{0.0};
  std::optional<HandPose> left;
  std::optional<HandPose> right;

  const std::optional<HandPose>& hand(Hand h) const { return h == Hand::left ? left : right; }
  bool operator==(const HandFrame&) const = default;
};

class TraceError : public std::runtime_error {
 public:
  TraceError(int line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline std::optional<Vec3> vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) return std::nullopt;
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    const auto& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) return std::nullopt;
    v[i] = e.get<double>();
  }
  if (!is_finite(v)) return std::nullopt;
  return v;
}

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace detail

/// Parses one frame object. Returns an error description on failure.
inline std::optional<std::string> frame_from_json(const nlohmann::json& j, HandFrame& out) {
  if (!j.is_object()) return "frame must be an object";
  for (const auto& [k, _] : j.items())
    if (k != "t" && k != "left" && k != "right") return "unexpected key '" + k + "'";
  if (!j.contains("t") || !j["t"].is_number()) return "'t' must be a number";
  out.t = j["t"].get<double>();
  if (!std::isfinite(out.t)) return "'t' must be finite";
  for (Hand h : {Hand::left, Hand::right}) {
    const char* name = to_string(h);
    auto& slot = h == Hand::left ? out.left : out.right;
    slot.reset();
    if (!j.contains(name) || j[name].is_null()) continue;
    const auto& hj = j[name];
    if (!hj.is_object() || hj.size() != 3) return std::string(name) + " must be null or {index,thumb,wrist}";
    HandPose pose;
    const std::pair<const char*, Vec3*> fields[] = {
        {"index", &pose.index}, {"thumb", &pose.thumb}, {"wrist", &pose.wrist}};
    for (auto [key, dst] : fields) {
      if (!hj.contains(key)) return std::string(name) + "." + key + " missing";
      auto v = detail::vec3_from(hj[key]);
      if (!v) return std::string(name) + "." + key + " must be [x,y,z]";
      *dst = *v;
    }
    slot = pose;
  }
  return std::nullopt;
}

inline nlohmann::json frame_to_json(const HandFrame& f) {
  auto hand = [](const std::optional<HandPose>& p) -> nlohmann::json {
    if (!p) return nullptr;
    return {{"index", detail::vec3_json(p->index)},
            {"thumb", detail::vec3_json(p->thumb)},
            {"wrist", detail::vec3_json(p->wrist)}};
  };
  return {{"t", f.t}, {"left", hand(f.left)}, {"right", hand(f.right)}};
}

/// Reads a JSON Lines trace. Blank lines are skipped; t must strictly increase.
inline std::vector<HandFrame> read_trace(std::istream& in) {
  std::vector<HandFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw TraceError(line_no, "malformed JSON");
    HandFrame f;
    if (auto err = frame_from_json(j, f)) throw TraceError(line_no, *err);
    if (!frames.empty() && !(f.t > frames.back().t))
      throw TraceError(line_no, "t must strictly increase");
    frames.push_back(f);
  }
  return frames;
}

inline void write_trace(std::ostream& out, const std::vector<HandFrame>& frames) {
  for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

}  // namespace tissuelink::gesture
