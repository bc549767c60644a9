#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "tissuelink/geometry.hpp"

namespace tissuelink::protocol {

inline constexpr int kProtocolVersion = 1;

/// Four decimal digits, "0000".."9999".
class SessionCode {
 public:
  SessionCode() : code_("0000") {}

  static std::optional<SessionCode> parse(std::string_view text) {
    if (text.size() != 4) return std::nullopt;
    for (char c : text) {
      if (c < '0' || c > '9') return std::nullopt;
    }
    return SessionCode(std::string(text));
  }

  static SessionCode from_index(int index) {
    std::string s(4, '0');
    for (int i = 3; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = static_cast<char>('0' + index % 10);
      index /= 10;
    }
    return SessionCode(std::move(s));
  }

  const std::string& str() const { return code_; }
  int index() const { return std::stoi(code_); }

  auto operator<=>(const SessionCode&) const = default;

 private:
  explicit SessionCode(std::string code) : code_(std::move(code)) {}
  std::string code_;
};

/// 128-bit opaque client identifier, 32 lowercase hex digits. Ordering is
/// lexicographic on the hex text and breaks equal-seq ties during merges.
class ClientId {
 public:
  ClientId() = default;

  static std::optional<ClientId> parse(std::string_view text) {
    if (text.size() != 32) return std::nullopt;
    for (char c : text) {
      const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
      if (!hex) return std::nullopt;
    }
    return ClientId(std::string(text));
  }

  static ClientId from_words(std::uint64_t hi, std::uint64_t lo) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(32, '0');
    for (int i = 0; i < 16; ++i) {
      s[static_cast<std::size_t>(15 - i)] = kDigits[(hi >> (4 * i)) & 0xF];
      s[static_cast<std::size_t>(31 - i)] = kDigits[(lo >> (4 * i)) & 0xF];
    }
    return ClientId(std::move(s));
  }

  const std::string& str() const { return hex_; }
  bool empty() const { return hex_.empty(); }

  auto operator<=>(const ClientId&) const = default;

 private:
  explicit ClientId(std::string hex) : hex_(std::move(hex)) {}
  std::string hex_;
};

enum class Role { display2d, headset, simulator, observer };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::display2d: return "display2d";
    case Role::headset: return "headset";
    case Role::simulator: return "simulator";
    case Role::observer: return "observer";
  }
  return "observer";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "display2d") return Role::display2d;
  if (s == "headset") return Role::headset;
  if (s == "simulator") return Role::simulator;
  if (s == "observer") return Role::observer;
  return std::nullopt;
}

struct ChannelState {
  std::array<int, 3> color{255, 255, 255};
  double windowLo{0.0};
  double windowHi{65535.0};
  bool visible{true};
  double opacity{1.0};

  bool operator==(const ChannelState&) const = default;
};

/// Placement of the volume in headset world space. `scale` multiplies the
/// scene's base meters-per-micrometer factor.
struct VolumeTransform {
  Vec3 translation{};
  Quat rotation{};
  double scale{1.0};

  bool operator==(const VolumeTransform&) const = default;
};

inline constexpr double kMinScale = 1e-4;
inline constexpr double kMaxScale = 1e4;
inline constexpr double kQuatNormTolerance = 1e-6;
inline constexpr double kLengthRelTolerance = 1e-9;

struct Measurement {
  std::string id;
  Vec3 endpointA{};  // scene micrometers
  Vec3 endpointB{};
  double lengthUm{0.0};
  bool finalized{false};

  static Measurement between(std::string id, const Vec3& a, const Vec3& b, bool finalized) {
    return {std::move(id), a, b, distance(a, b), finalized};
  }

  bool operator==(const Measurement&) const = default;
};

struct SeqStamp {
  std::uint64_t seq{0};
  ClientId sender{};

  auto operator<=>(const SeqStamp&) const = default;
};

struct SessionState {
  std::map<int, ChannelState> channels;
  VolumeTransform transform;
  std::set<std::string> selection;
  std::optional<std::string> hover;
  std::map<std::string, Measurement> measurements;
  std::map<std::string, SeqStamp> lastSeq;

  bool operator==(const SessionState&) const = default;
};

/// Equality over synchronized values only; ignores lastSeq bookkeeping.
inline bool values_equal(const SessionState& a, const SessionState& b) {
  return a.channels == b.channels && a.transform == b.transform && a.selection == b.selection &&
         a.hover == b.hover && a.measurements == b.measurements;
}

}  // namespace tissuelink::protocol
