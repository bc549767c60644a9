#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/protocol/types.hpp"
#include "tissuelink/result.hpp"

namespace tissuelink::protocol {

using json = nlohmann::json;

/// One path/value pair. A null value is a tombstone (only legal on
/// `measurements.<id>` and `hover`).
struct Update {
  std::string path;
  json value;

  bool operator==(const Update&) const = default;
};

struct StateDelta {
  std::vector<Update> updates;

  bool empty() const { return updates.empty(); }
  bool operator==(const StateDelta&) const = default;
};

struct Violation {
  std::string path;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

// ---------------------------------------------------------------------------
// Path grammar
// ---------------------------------------------------------------------------

enum class ChannelField { color, window, visible, opacity };

inline std::string_view to_string(ChannelField f) {
  switch (f) {
    case ChannelField::color: return "color";
    case ChannelField::window: return "window";
    case ChannelField::visible: return "visible";
    case ChannelField::opacity: return "opacity";
  }
  return "color";
}

struct ChannelPath {
  int channel;
  ChannelField field;
};
struct TransformPath {};
struct SelectionPath {};
struct HoverPath {};
struct MeasurementPath {
  std::string id;
};

using Path = std::variant<ChannelPath, TransformPath, SelectionPath, HoverPath, MeasurementPath>;

inline bool valid_measurement_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    if (c == '.' || static_cast<unsigned char>(c) < 0x21 || c == 0x7F) return false;
  }
  return true;
}

inline bool valid_entity_id(std::string_view id) { return !id.empty() && id.size() <= 256; }

/// Parses the closed path grammar. Channel ids must be canonical decimal
/// (no sign, no leading zeros) so that each path has exactly one spelling.
inline std::optional<Path> parse_path(std::string_view path) {
  if (path == "transform") return TransformPath{};
  if (path == "selection") return SelectionPath{};
  if (path == "hover") return HoverPath{};

  constexpr std::string_view kMeas = "measurements.";
  if (path.substr(0, kMeas.size()) == kMeas) {
    auto id = path.substr(kMeas.size());
    if (!valid_measurement_id(id)) return std::nullopt;
    return MeasurementPath{std::string(id)};
  }

  constexpr std::string_view kChan = "channels.";
  if (path.substr(0, kChan.size()) != kChan) return std::nullopt;
  auto rest = path.substr(kChan.size());
  auto dot = rest.find('.');
  if (dot == std::string_view::npos || dot == 0) return std::nullopt;
  auto digits = rest.substr(0, dot);
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  int channel = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), channel);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || channel < 0) return std::nullopt;
  auto field = rest.substr(dot + 1);
  if (field == "color") return ChannelPath{channel, ChannelField::color};
  if (field == "window") return ChannelPath{channel, ChannelField::window};
  if (field == "visible") return ChannelPath{channel, ChannelField::visible};
  if (field == "opacity") return ChannelPath{channel, ChannelField::opacity};
  return std::nullopt;
}

inline std::string channel_path(int channel, ChannelField field) {
  return "channels." + std::to_string(channel) + "." + std::string(to_string(field));
}

inline std::string measurement_path(std::string_view id) {
  return "measurements." + std::string(id);
}

// ---------------------------------------------------------------------------
// Value codecs. Decoders check shape and the value's own invariants and
// return the violated rule name on failure.
// ---------------------------------------------------------------------------

namespace values {

using Rule = std::string;

inline json vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Result<Vec3, Rule> parse_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) return fail(Rule("type"));
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    const auto& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) return fail(Rule("type"));
    v[i] = e.get<double>();
  }
  if (!is_finite(v)) return fail(Rule("non_finite"));
  return v;
}

inline Result<double, Rule> parse_number(const json& j) {
  if (!j.is_number()) return fail(Rule("type"));
  double d = j.get<double>();
  if (!std::isfinite(d)) return fail(Rule("non_finite"));
  return d;
}

inline json color(const std::array<int, 3>& c) { return json::array({c[0], c[1], c[2]}); }

inline Result<std::array<int, 3>, Rule> parse_color(const json& j) {
  if (!j.is_array() || j.size() != 3) return fail(Rule("type"));
  std::array<int, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer()) return fail(Rule("type"));
    auto v = j[i].get<std::int64_t>();
    if (v < 0 || v > 255) return fail(Rule("color_range"));
    c[i] = static_cast<int>(v);
  }
  return c;
}

struct Window {
  double lo;
  double hi;
};

inline json window(double lo, double hi) { return json::array({lo, hi}); }

inline Result<Window, Rule> parse_window(const json& j) {
  if (!j.is_array() || j.size() != 2) return fail(Rule("type"));
  auto lo = parse_number(j[0]);
  if (!lo) return fail(lo.error());
  auto hi = parse_number(j[1]);
  if (!hi) return fail(hi.error());
  if (*lo > *hi) return fail(Rule("window_order"));
  return Window{*lo, *hi};
}

inline Result<bool, Rule> parse_visible(const json& j) {
  if (!j.is_boolean()) return fail(Rule("type"));
  return j.get<bool>();
}

inline Result<double, Rule> parse_opacity(const json& j) {
  auto v = parse_number(j);
  if (!v) return v;
  if (*v < 0.0 || *v > 1.0) return fail(Rule("opacity_range"));
  return v;
}

inline json transform(const VolumeTransform& t) {
  return json{{"t", vec3(t.translation)},
              {"q", json::array({t.rotation.w, t.rotation.x, t.rotation.y, t.rotation.z})},
              {"s", t.scale}};
}

inline Result<VolumeTransform, Rule> parse_transform(const json& j) {
  if (!j.is_object() || !j.contains("t") || !j.contains("q") || !j.contains("s") || j.size() != 3)
    return fail(Rule("type"));
  VolumeTransform out;
  auto t = parse_vec3(j["t"]);
  if (!t) return fail(t.error());
  out.translation = *t;
  const auto& q = j["q"];
  if (!q.is_array() || q.size() != 4) return fail(Rule("type"));
  double qv[4];
  for (std::size_t i = 0; i < 4; ++i) {
    auto c = parse_number(q[i]);
    if (!c) return fail(c.error());
    qv[i] = *c;
  }
  out.rotation = Quat{qv[0], qv[1], qv[2], qv[3]};
  if (std::abs(out.rotation.norm() - 1.0) > kQuatNormTolerance) return fail(Rule("quaternion_norm"));
  auto s = parse_number(j["s"]);
  if (!s) return fail(s.error());
  if (*s < kMinScale || *s > kMaxScale) return fail(Rule("scale_range"));
  out.scale = *s;
  return out;
}

inline json selection(const std::set<std::string>& ids) {
  json arr = json::array();
  for (const auto& id : ids) arr.push_back(id);
  return arr;
}

inline Result<std::set<std::string>, Rule> parse_selection(const json& j) {
  if (!j.is_array()) return fail(Rule("type"));
  std::set<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) return fail(Rule("type"));
    auto s = e.get<std::string>();
    if (!valid_entity_id(s)) return fail(Rule("entity_id"));
    out.insert(std::move(s));
  }
  return out;
}

inline Result<std::string, Rule> parse_entity(const json& j) {
  if (!j.is_string()) return fail(Rule("type"));
  auto s = j.get<std::string>();
  if (!valid_entity_id(s)) return fail(Rule("entity_id"));
  return s;
}

inline json measurement(const Measurement& m) {
  return json{{"a", vec3(m.endpointA)},
              {"b", vec3(m.endpointB)},
              {"lengthUm", m.lengthUm},
              {"finalized", m.finalized}};
}

inline bool length_matches(const Vec3& a, const Vec3& b, double lengthUm) {
  const double d = distance(a, b);
  return std::abs(lengthUm - d) <= kLengthRelTolerance * std::max(std::abs(d), std::abs(lengthUm));
}

inline Result<Measurement, Rule> parse_measurement(const std::string& id, const json& j) {
  if (!j.is_object() || j.size() != 4 || !j.contains("a") || !j.contains("b") ||
      !j.contains("lengthUm") || !j.contains("finalized"))
    return fail(Rule("type"));
  Measurement m;
  m.id = id;
  auto a = parse_vec3(j["a"]);
  if (!a) return fail(a.error());
  auto b = parse_vec3(j["b"]);
  if (!b) return fail(b.error());
  auto len = parse_number(j["lengthUm"]);
  if (!len) return fail(len.error());
  if (!j["finalized"].is_boolean()) return fail(Rule("type"));
  m.endpointA = *a;
  m.endpointB = *b;
  m.lengthUm = *len;
  m.finalized = j["finalized"].get<bool>();
  if (!length_matches(m.endpointA, m.endpointB, m.lengthUm)) return fail(Rule("length_mismatch"));
  return m;
}

}  // namespace values

// ---------------------------------------------------------------------------
// Typed update builders
// ---------------------------------------------------------------------------

namespace updates {

inline Update color(int channel, const std::array<int, 3>& rgb) {
  return {channel_path(channel, ChannelField::color), values::color(rgb)};
}
inline Update window(int channel, double lo, double hi) {
  return {channel_path(channel, ChannelField::window), values::window(lo, hi)};
}
inline Update visible(int channel, bool v) {
  return {channel_path(channel, ChannelField::visible), json(v)};
}
inline Update opacity(int channel, double v) {
  return {channel_path(channel, ChannelField::opacity), json(v)};
}
inline Update transform(const VolumeTransform& t) { return {"transform", values::transform(t)}; }
inline Update selection(const std::set<std::string>& ids) {
  return {"selection", values::selection(ids)};
}
inline Update hover(const std::optional<std::string>& id) {
  return {"hover", id ? json(*id) : json(nullptr)};
}
inline Update measurement(const Measurement& m) {
  return {measurement_path(m.id), values::measurement(m)};
}
inline Update delete_measurement(std::string_view id) {
  return {measurement_path(id), json(nullptr)};
}

}  // namespace updates

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

namespace detail {

// Writes a validated value into the state. Returns the violated rule, if any.
inline std::optional<std::string> write_value(SessionState& state, const Path& path,
                                              const json& value) {
  using R = std::optional<std::string>;
  return std::visit(
      [&](const auto& p) -> R {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ChannelPath>) {
          if (value.is_null()) return "null_not_deletable";
          switch (p.field) {
            case ChannelField::color: {
              auto c = values::parse_color(value);
              if (!c) return c.error();
              state.channels[p.channel].color = *c;
              break;
            }
            case ChannelField::window: {
              auto w = values::parse_window(value);
              if (!w) return w.error();
              auto& ch = state.channels[p.channel];
              ch.windowLo = w->lo;
              ch.windowHi = w->hi;
              break;
            }
            case ChannelField::visible: {
              auto v = values::parse_visible(value);
              if (!v) return v.error();
              state.channels[p.channel].visible = *v;
              break;
            }
            case ChannelField::opacity: {
              auto o = values::parse_opacity(value);
              if (!o) return o.error();
              state.channels[p.channel].opacity = *o;
              break;
            }
          }
          return std::nullopt;
        } else if constexpr (std::is_same_v<P, TransformPath>) {
          if (value.is_null()) return "null_not_deletable";
          auto t = values::parse_transform(value);
          if (!t) return t.error();
          state.transform = *t;
          return std::nullopt;
        } else if constexpr (std::is_same_v<P, SelectionPath>) {
          if (value.is_null()) return "null_not_deletable";
          auto s = values::parse_selection(value);
          if (!s) return s.error();
          state.selection = std::move(s).value();
          return std::nullopt;
        } else if constexpr (std::is_same_v<P, HoverPath>) {
          if (value.is_null()) {
            state.hover.reset();
            return std::nullopt;
          }
          auto e = values::parse_entity(value);
          if (!e) return e.error();
          state.hover = std::move(e).value();
          return std::nullopt;
        } else {
          if (value.is_null()) {
            state.measurements.erase(p.id);
            return std::nullopt;
          }
          auto m = values::parse_measurement(p.id, value);
          if (!m) return m.error();
          state.measurements[p.id] = std::move(m).value();
          return std::nullopt;
        }
      },
      path);
}

}  // namespace detail

/// Checks one update in isolation: path grammar, value shape and value
/// invariants. Independent of any state, so merge order cannot change it.
inline std::optional<Violation> check_update(const Update& u) {
  auto path = parse_path(u.path);
  if (!path) return Violation{u.path, "unknown_path"};
  SessionState scratch;
  if (auto rule = detail::write_value(scratch, *path, u.value)) return Violation{u.path, *rule};
  return std::nullopt;
}

/// State-dependent admission rules applied by the sequencing server before
/// a seq is assigned. Finalized measurements accept only deletion.
inline std::optional<Violation> check_admission(const SessionState& state, const Update& u) {
  if (auto v = check_update(u)) return v;
  auto path = parse_path(u.path);
  if (auto* m = std::get_if<MeasurementPath>(&*path)) {
    auto it = state.measurements.find(m->id);
    if (it != state.measurements.end() && it->second.finalized && !u.value.is_null())
      return Violation{u.path, "finalized_immutable"};
  }
  return std::nullopt;
}

struct ApplyResult {
  SessionState state;
  std::vector<Violation> violations;
  std::vector<std::string> written;
};

/// Per-path last-writer-wins merge. An update is written iff its
/// (seq, sender) stamp is greater than the path's recorded stamp. Invalid
/// updates are skipped and reported; the rest of the delta still applies.
inline ApplyResult apply_delta(SessionState state, const StateDelta& delta, std::uint64_t seq,
                               const ClientId& sender) {
  ApplyResult out{std::move(state), {}, {}};
  if (seq == 0) {
    for (const auto& u : delta.updates) out.violations.push_back({u.path, "unassigned_seq"});
    return out;
  }
  const SeqStamp stamp{seq, sender};
  std::set<std::string_view> seen;
  for (const auto& u : delta.updates) {
    if (!seen.insert(u.path).second) {
      out.violations.push_back({u.path, "duplicate_path"});
      continue;
    }
    auto path = parse_path(u.path);
    if (!path) {
      out.violations.push_back({u.path, "unknown_path"});
      continue;
    }
    auto last = out.state.lastSeq.find(u.path);
    if (last != out.state.lastSeq.end() && !(last->second < stamp)) {
      // Still report invalid values so validation does not depend on arrival order.
      if (auto v = check_update(u)) out.violations.push_back(*v);
      continue;
    }
    SessionState candidate_scratch;
    if (auto rule = detail::write_value(candidate_scratch, *path, u.value)) {
      out.violations.push_back({u.path, *rule});
      continue;
    }
    detail::write_value(out.state, *path, u.value);
    out.state.lastSeq[u.path] = stamp;
    out.written.push_back(u.path);
  }
  return out;
}

/// Every type invariant of the state, one Violation per failing value.
inline std::vector<Violation> validate_state(const SessionState& state) {
  std::vector<Violation> out;
  for (const auto& [id, ch] : state.channels) {
    if (id < 0) out.push_back({"channels." + std::to_string(id), "channel_id"});
    for (int c : ch.color) {
      if (c < 0 || c > 255) {
        out.push_back({channel_path(id, ChannelField::color), "color_range"});
        break;
      }
    }
    if (!std::isfinite(ch.windowLo) || !std::isfinite(ch.windowHi))
      out.push_back({channel_path(id, ChannelField::window), "non_finite"});
    else if (ch.windowLo > ch.windowHi)
      out.push_back({channel_path(id, ChannelField::window), "window_order"});
    if (!(ch.opacity >= 0.0 && ch.opacity <= 1.0))
      out.push_back({channel_path(id, ChannelField::opacity), "opacity_range"});
  }
  const auto& t = state.transform;
  if (!is_finite(t.translation)) out.push_back({"transform", "non_finite"});
  if (!(std::abs(t.rotation.norm() - 1.0) <= kQuatNormTolerance))
    out.push_back({"transform", "quaternion_norm"});
  if (!(t.scale >= kMinScale && t.scale <= kMaxScale)) out.push_back({"transform", "scale_range"});
  for (const auto& id : state.selection) {
    if (!valid_entity_id(id)) out.push_back({"selection", "entity_id"});
  }
  if (state.hover && !valid_entity_id(*state.hover)) out.push_back({"hover", "entity_id"});
  for (const auto& [id, m] : state.measurements) {
    const auto path = measurement_path(id);
    if (!valid_measurement_id(id) || m.id != id) out.push_back({path, "measurement_id"});
    if (!is_finite(m.endpointA) || !is_finite(m.endpointB) || !std::isfinite(m.lengthUm))
      out.push_back({path, "non_finite"});
    else if (!values::length_matches(m.endpointA, m.endpointB, m.lengthUm))
      out.push_back({path, "length_mismatch"});
  }
  return out;
}

/// Minimal delta taking `a` to `b`. Channels cannot be deleted, so channels
/// present in `a` but absent from `b` produce no update.
inline StateDelta diff_states(const SessionState& a, const SessionState& b) {
  StateDelta d;
  for (const auto& [id, cb] : b.channels) {
    auto it = a.channels.find(id);
    const bool fresh = it == a.channels.end();
    if (fresh || it->second.color != cb.color) d.updates.push_back(updates::color(id, cb.color));
    if (fresh || it->second.windowLo != cb.windowLo || it->second.windowHi != cb.windowHi)
      d.updates.push_back(updates::window(id, cb.windowLo, cb.windowHi));
    if (fresh || it->second.visible != cb.visible)
      d.updates.push_back(updates::visible(id, cb.visible));
    if (fresh || it->second.opacity != cb.opacity)
      d.updates.push_back(updates::opacity(id, cb.opacity));
  }
  if (a.transform != b.transform) d.updates.push_back(updates::transform(b.transform));
  if (a.selection != b.selection) d.updates.push_back(updates::selection(b.selection));
  if (a.hover != b.hover) d.updates.push_back(updates::hover(b.hover));
  for (const auto& [id, m] : a.measurements) {
    if (!b.measurements.count(id)) d.updates.push_back(updates::delete_measurement(id));
  }
  for (const auto& [id, m] : b.measurements) {
    auto it = a.measurements.find(id);
    if (it == a.measurements.end() || it->second != m) d.updates.push_back(updates::measurement(m));
  }
  return d;
}

}  // namespace tissuelink::protocol
