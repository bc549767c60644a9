#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/types.hpp"
#include "tissuelink/result.hpp"

namespace tissuelink::protocol {

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

/// Per-entity statistics shipped to clients at join time.
struct CatalogEntry {
  std::string id;
  std::string label;
  double volumeUm3{0.0};
  Vec3 centroidUm{};
  Vec3 aabbMin{};
  Vec3 aabbMax{};

  bool operator==(const CatalogEntry&) const = default;
};

struct CreateSession {
  bool operator==(const CreateSession&) const = default;
};
struct SessionCreated {
  SessionCode code;
  bool operator==(const SessionCreated&) const = default;
};
struct JoinRequest {
  Role role{Role::observer};
  bool operator==(const JoinRequest&) const = default;
};
struct JoinAck {
  ClientId clientId;
  SessionCode code;
  std::uint64_t seq{0};
  SessionState state;
  std::string catalogChecksum;
  std::optional<std::vector<CatalogEntry>> catalog;
  bool operator==(const JoinAck&) const = default;
};
struct JoinReject {
  std::string reason;
  bool operator==(const JoinReject&) const = default;
};
struct DeltaPayload {
  StateDelta delta;
  bool operator==(const DeltaPayload&) const = default;
};
struct FullSync {
  std::uint64_t seq{0};
  SessionState state;
  bool operator==(const FullSync&) const = default;
};
struct Ping {
  std::uint64_t nonce{0};
  bool operator==(const Ping&) const = default;
};
struct Pong {
  std::uint64_t nonce{0};
  bool operator==(const Pong&) const = default;
};
struct Leave {
  bool operator==(const Leave&) const = default;
};
struct ErrorPayload {
  std::string code;
  std::string message;
  std::vector<std::string> paths;
  bool operator==(const ErrorPayload&) const = default;
};

using Payload = std::variant<CreateSession, SessionCreated, JoinRequest, JoinAck, JoinReject,
                             DeltaPayload, FullSync, Ping, Pong, Leave, ErrorPayload>;

enum class Kind {
  create_session,
  session_created,
  join_request,
  join_ack,
  join_reject,
  delta,
  full_sync,
  ping,
  pong,
  leave,
  error
};

inline constexpr std::string_view kKindNames[] = {
    "create_session", "session_created", "join_request", "join_ack", "join_reject", "delta",
    "full_sync",      "ping",            "pong",         "leave",    "error"};

inline std::string_view to_string(Kind k) { return kKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<Kind> parse_kind(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == s) return static_cast<Kind>(i);
  }
  return std::nullopt;
}

struct Message {
  int v{kProtocolVersion};
  std::optional<SessionCode> session;
  std::optional<ClientId> sender;
  std::uint64_t seq{0};  // 0 = unassigned
  Payload payload;

  Kind kind() const { return static_cast<Kind>(payload.index()); }

  template <typename P>
  const P* as() const {
    return std::get_if<P>(&payload);
  }

  bool operator==(const Message&) const = default;
};

inline Message make_message(Payload payload, std::optional<SessionCode> session = std::nullopt,
                            std::optional<ClientId> sender = std::nullopt, std::uint64_t seq = 0) {
  Message m;
  m.payload = std::move(payload);
  m.session = std::move(session);
  m.sender = std::move(sender);
  m.seq = seq;
  return m;
}

// ---------------------------------------------------------------------------
// SessionState <-> JSON
// ---------------------------------------------------------------------------

inline json state_to_json(const SessionState& s) {
  json channels = json::object();
  for (const auto& [id, ch] : s.channels) {
    channels[std::to_string(id)] = json{{"color", values::color(ch.color)},
                                        {"window", values::window(ch.windowLo, ch.windowHi)},
                                        {"visible", ch.visible},
                                        {"opacity", ch.opacity}};
  }
  json measurements = json::object();
  for (const auto& [id, m] : s.measurements) measurements[id] = values::measurement(m);
  json last = json::object();
  for (const auto& [path, stamp] : s.lastSeq)
    last[path] = json{{"seq", stamp.seq}, {"sender", stamp.sender.str()}};
  return json{{"channels", std::move(channels)},
              {"transform", values::transform(s.transform)},
              {"selection", values::selection(s.selection)},
              {"hover", s.hover ? json(*s.hover) : json(nullptr)},
              {"measurements", std::move(measurements)},
              {"lastSeq", std::move(last)}};
}

/// Strict parse; returns the offending path on failure.
inline Result<SessionState, std::string> state_from_json(const json& j) {
  using R = Result<SessionState, std::string>;
  if (!j.is_object()) return fail(std::string("state"));
  for (const char* key : {"channels", "transform", "selection", "hover", "measurements", "lastSeq"})
    if (!j.contains(key)) return fail(std::string(key));
  if (j.size() != 6) return fail(std::string("state"));

  SessionState s;
  const auto& channels = j["channels"];
  if (!channels.is_object()) return fail(std::string("channels"));
  for (const auto& [key, value] : channels.items()) {
    auto probe = parse_path("channels." + key + ".color");
    if (!probe || !value.is_object() || value.size() != 4) return R(fail("channels." + key));
    const int id = std::get<ChannelPath>(*probe).channel;
    for (auto field : {ChannelField::color, ChannelField::window, ChannelField::visible,
                       ChannelField::opacity}) {
      const std::string name(to_string(field));
      if (!value.contains(name)) return fail(channel_path(id, field));
      if (detail::write_value(s, ChannelPath{id, field}, value[name]))
        return fail(channel_path(id, field));
    }
  }
  auto t = values::parse_transform(j["transform"]);
  if (!t) return fail(std::string("transform"));
  s.transform = *t;
  auto sel = values::parse_selection(j["selection"]);
  if (!sel) return fail(std::string("selection"));
  s.selection = std::move(sel).value();
  if (!j["hover"].is_null()) {
    auto h = values::parse_entity(j["hover"]);
    if (!h) return fail(std::string("hover"));
    s.hover = std::move(h).value();
  }
  const auto& ms = j["measurements"];
  if (!ms.is_object()) return fail(std::string("measurements"));
  for (const auto& [id, value] : ms.items()) {
    if (!valid_measurement_id(id) || value.is_null()) return fail(measurement_path(id));
    auto m = values::parse_measurement(id, value);
    if (!m) return fail(measurement_path(id));
    s.measurements[id] = std::move(m).value();
  }
  const auto& last = j["lastSeq"];
  if (!last.is_object()) return fail(std::string("lastSeq"));
  for (const auto& [path, value] : last.items()) {
    if (!parse_path(path) || !value.is_object() || value.size() != 2 ||
        !value.contains("seq") || !value["seq"].is_number_unsigned() ||
        !value.contains("sender") || !value["sender"].is_string())
      return fail("lastSeq." + path);
    auto sender = ClientId::parse(value["sender"].get<std::string>());
    if (!sender) return fail("lastSeq." + path);
    s.lastSeq[path] = SeqStamp{value["seq"].get<std::uint64_t>(), *sender};
  }
  return s;
}

// ---------------------------------------------------------------------------
// Message codec
// ---------------------------------------------------------------------------

enum class DecodeErrorKind { malformed, unknown_kind, bad_version, schema };

inline std::string_view to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::malformed: return "malformed";
    case DecodeErrorKind::unknown_kind: return "unknown_kind";
    case DecodeErrorKind::bad_version: return "bad_version";
    case DecodeErrorKind::schema: return "schema";
  }
  return "schema";
}

struct DecodeError {
  DecodeErrorKind kind;
  std::string detail;
};

namespace codec {

inline json catalog_entry(const CatalogEntry& e) {
  return json{{"id", e.id},
              {"label", e.label},
              {"volumeUm3", e.volumeUm3},
              {"centroidUm", values::vec3(e.centroidUm)},
              {"aabbMin", values::vec3(e.aabbMin)},
              {"aabbMax", values::vec3(e.aabbMax)}};
}

inline json payload_to_json(const Payload& p) {
  return std::visit(
      [](const auto& v) -> json {
        using P = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<P, CreateSession> || std::is_same_v<P, Leave>) {
          return json::object();
        } else if constexpr (std::is_same_v<P, SessionCreated>) {
          return json{{"code", v.code.str()}};
        } else if constexpr (std::is_same_v<P, JoinRequest>) {
          return json{{"role", std::string(to_string(v.role))}};
        } else if constexpr (std::is_same_v<P, JoinAck>) {
          json out{{"clientId", v.clientId.str()},
                   {"code", v.code.str()},
                   {"seq", v.seq},
                   {"state", state_to_json(v.state)},
                   {"catalogChecksum", v.catalogChecksum}};
          if (v.catalog) {
            json arr = json::array();
            for (const auto& e : *v.catalog) arr.push_back(catalog_entry(e));
            out["catalog"] = std::move(arr);
          }
          return out;
        } else if constexpr (std::is_same_v<P, JoinReject>) {
          return json{{"reason", v.reason}};
        } else if constexpr (std::is_same_v<P, DeltaPayload>) {
          json arr = json::array();
          for (const auto& u : v.delta.updates) arr.push_back(json{{"path", u.path}, {"value", u.value}});
          return json{{"updates", std::move(arr)}};
        } else if constexpr (std::is_same_v<P, FullSync>) {
          return json{{"seq", v.seq}, {"state", state_to_json(v.state)}};
        } else if constexpr (std::is_same_v<P, Ping> || std::is_same_v<P, Pong>) {
          return json{{"nonce", v.nonce}};
        } else {
          json out{{"code", v.code}, {"message", v.message}};
          if (!v.paths.empty()) out["paths"] = v.paths;
          return out;
        }
      },
      p);
}

inline bool only_keys(const json& j, std::initializer_list<std::string_view> required,
                      std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) return false;
  for (auto k : required)
    if (!j.contains(k)) return false;
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (auto r : required) known = known || r == k;
    for (auto o : optional) known = known || o == k;
    if (!known) return false;
  }
  return true;
}

inline Result<Payload, std::string> payload_from_json(Kind kind, const json& j) {
  using R = Result<Payload, std::string>;
  auto bad = [](std::string what) { return R(fail(std::move(what))); };
  auto code_field = [&](const json& c) -> std::optional<SessionCode> {
    if (!c.is_string()) return std::nullopt;
    return SessionCode::parse(c.get<std::string>());
  };
  switch (kind) {
    case Kind::create_session:
      if (!only_keys(j, {})) return bad("payload");
      return Payload{CreateSession{}};
    case Kind::leave:
      if (!only_keys(j, {})) return bad("payload");
      return Payload{Leave{}};
    case Kind::session_created: {
      if (!only_keys(j, {"code"})) return bad("payload");
      auto c = code_field(j["code"]);
      if (!c) return bad("payload.code");
      return Payload{SessionCreated{*c}};
    }
    case Kind::join_request: {
      if (!only_keys(j, {"role"}) || !j["role"].is_string()) return bad("payload.role");
      auto r = parse_role(j["role"].get<std::string>());
      if (!r) return bad("payload.role");
      return Payload{JoinRequest{*r}};
    }
    case Kind::join_ack: {
      if (!only_keys(j, {"clientId", "code", "seq", "state", "catalogChecksum"}, {"catalog"}))
        return bad("payload");
      JoinAck ack;
      auto id = j["clientId"].is_string() ? ClientId::parse(j["clientId"].get<std::string>())
                                          : std::nullopt;
      if (!id) return bad("payload.clientId");
      ack.clientId = *id;
      auto c = code_field(j["code"]);
      if (!c) return bad("payload.code");
      ack.code = *c;
      if (!j["seq"].is_number_unsigned()) return bad("payload.seq");
      ack.seq = j["seq"].get<std::uint64_t>();
      auto st = state_from_json(j["state"]);
      if (!st) return bad("payload.state." + st.error());
      ack.state = std::move(st).value();
      if (!j["catalogChecksum"].is_string()) return bad("payload.catalogChecksum");
      ack.catalogChecksum = j["catalogChecksum"].get<std::string>();
      if (j.contains("catalog")) {
        const auto& arr = j["catalog"];
        if (!arr.is_array()) return bad("payload.catalog");
        std::vector<CatalogEntry> entries;
        for (const auto& e : arr) {
          if (!only_keys(e, {"id", "label", "volumeUm3", "centroidUm", "aabbMin", "aabbMax"}) ||
              !e["id"].is_string() || !e["label"].is_string() || !e["volumeUm3"].is_number())
            return bad("payload.catalog");
          auto c0 = values::parse_vec3(e["centroidUm"]);
          auto a0 = values::parse_vec3(e["aabbMin"]);
          auto a1 = values::parse_vec3(e["aabbMax"]);
          if (!c0 || !a0 || !a1) return bad("payload.catalog");
          entries.push_back(CatalogEntry{e["id"].get<std::string>(), e["label"].get<std::string>(),
                                         e["volumeUm3"].get<double>(), *c0, *a0, *a1});
        }
        ack.catalog = std::move(entries);
      }
      return Payload{std::move(ack)};
    }
    case Kind::join_reject:
      if (!only_keys(j, {"reason"}) || !j["reason"].is_string()) return bad("payload.reason");
      return Payload{JoinReject{j["reason"].get<std::string>()}};
    case Kind::delta: {
      if (!only_keys(j, {"updates"}) || !j["updates"].is_array()) return bad("payload.updates");
      DeltaPayload d;
      for (const auto& u : j["updates"]) {
        if (!only_keys(u, {"path", "value"}) || !u["path"].is_string())
          return bad("payload.updates");
        d.delta.updates.push_back(Update{u["path"].get<std::string>(), u["value"]});
      }
      return Payload{std::move(d)};
    }
    case Kind::full_sync: {
      if (!only_keys(j, {"seq", "state"}) || !j["seq"].is_number_unsigned())
        return bad("payload.seq");
      auto st = state_from_json(j["state"]);
      if (!st) return bad("payload.state." + st.error());
      return Payload{FullSync{j["seq"].get<std::uint64_t>(), std::move(st).value()}};
    }
    case Kind::ping:
    case Kind::pong: {
      if (!only_keys(j, {"nonce"}) || !j["nonce"].is_number_unsigned()) return bad("payload.nonce");
      const auto nonce = j["nonce"].get<std::uint64_t>();
      if (kind == Kind::ping) return Payload{Ping{nonce}};
      return Payload{Pong{nonce}};
    }
    case Kind::error: {
      if (!only_keys(j, {"code", "message"}, {"paths"}) || !j["code"].is_string() ||
          !j["message"].is_string())
        return bad("payload");
      ErrorPayload e{j["code"].get<std::string>(), j["message"].get<std::string>(), {}};
      if (j.contains("paths")) {
        if (!j["paths"].is_array()) return bad("payload.paths");
        for (const auto& p : j["paths"]) {
          if (!p.is_string()) return bad("payload.paths");
          e.paths.push_back(p.get<std::string>());
        }
      }
      return Payload{std::move(e)};
    }
  }
  return bad("kind");
}

}  // namespace codec

inline json message_to_json(const Message& m) {
  json out{{"v", m.v},
           {"kind", std::string(to_string(m.kind()))},
           {"seq", m.seq},
           {"payload", codec::payload_to_json(m.payload)}};
  if (m.session) out["session"] = m.session->str();
  if (m.sender) out["sender"] = m.sender->str();
  return out;
}

/// One JSON object per message, UTF-8 text.
inline std::string encode_message(const Message& m) { return message_to_json(m).dump(); }

inline Result<Message, DecodeError> decode_message(std::string_view bytes) {
  using R = Result<Message, DecodeError>;
  auto err = [](DecodeErrorKind k, std::string d) { return R(fail(DecodeError{k, std::move(d)})); };

  json j = json::parse(bytes.begin(), bytes.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return err(DecodeErrorKind::malformed, "not json");
  if (!j.is_object()) return err(DecodeErrorKind::malformed, "not an object");

  if (!j.contains("v") || !j["v"].is_number_integer()) return err(DecodeErrorKind::schema, "v");
  if (j["v"].get<std::int64_t>() != kProtocolVersion)
    return err(DecodeErrorKind::bad_version, j["v"].dump());

  if (!j.contains("kind") || !j["kind"].is_string()) return err(DecodeErrorKind::schema, "kind");
  auto kind = parse_kind(j["kind"].get<std::string>());
  if (!kind) return err(DecodeErrorKind::unknown_kind, j["kind"].get<std::string>());

  if (!codec::only_keys(j, {"v", "kind", "seq", "payload"}, {"session", "sender"}))
    return err(DecodeErrorKind::schema, "envelope");
  if (!j["seq"].is_number_unsigned()) return err(DecodeErrorKind::schema, "seq");

  Message m;
  m.seq = j["seq"].get<std::uint64_t>();
  if (j.contains("session")) {
    auto c = j["session"].is_string() ? SessionCode::parse(j["session"].get<std::string>())
                                      : std::nullopt;
    if (!c) return err(DecodeErrorKind::schema, "session");
    m.session = *c;
  }
  if (j.contains("sender")) {
    auto s = j["sender"].is_string() ? ClientId::parse(j["sender"].get<std::string>())
                                     : std::nullopt;
    if (!s) return err(DecodeErrorKind::schema, "sender");
    m.sender = *s;
  }
  auto payload = codec::payload_from_json(*kind, j["payload"]);
  if (!payload) return err(DecodeErrorKind::schema, payload.error());
  m.payload = std::move(payload).value();
  return m;
}

}  // namespace tissuelink::protocol
