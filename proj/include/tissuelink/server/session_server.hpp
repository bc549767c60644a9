#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/message.hpp"
#include "tissuelink/protocol/types.hpp"
#include "tissuelink/result.hpp"
#include "tissuelink/scene/scene.hpp"

namespace tissuelink::server {

using namespace tissuelink::protocol;

using ConnId = std::uint64_t;

struct ServerConfig {
  double heartbeatIntervalSec{5.0};
  int missedPongsLimit{3};
  double sessionGraceSec{600.0};
  std::size_t maxMembers{32};
};

/// Scene data shared by every session.
struct SceneInfo {
  std::string catalogChecksum;
  std::vector<CatalogEntry> catalog;
  std::vector<int> channelIds;  // seeded with default ChannelState
};

inline SceneInfo scene_info(const scene::Scene& s) {
  SceneInfo info{s.catalogChecksum, s.catalog(), {}};
  for (const auto& c : s.metadata.channels) info.channelIds.push_back(c.id);
  return info;
}

struct Member {
  ClientId id;
  Role role{Role::observer};
  ConnId conn{0};
  double lastHeard{0.0};
  double lastPing{0.0};
  std::uint64_t pingsSent{0};
};

struct SessionRecord {
  SessionCode code;
  SessionState state;
  std::uint64_t nextSeq{1};
  std::map<ClientId, Member> members;
  double createdAt{0.0};
  double lastActivityAt{0.0};
  std::optional<double> emptySince;
};

struct SessionsExhausted {};

inline constexpr int kCodeSpace = 10000;

/// Transport-agnostic session service. The transport reports connection
/// events and inbound text; replies go out through `send`, and `close`
/// asks the transport to drop a connection. Not thread-safe: callers
/// serialize all calls (one executor owns the instance).
class SessionServer {
 public:
  using SendFn = std::function<void(ConnId, std::string)>;
  using CloseFn = std::function<void(ConnId)>;

  SessionServer(ServerConfig cfg, SceneInfo scene, SendFn send, CloseFn close, std::uint64_t seed = std::random_device{}())
      : cfg_(cfg), scene_(std::move(scene)), send_(std::move(send)), close_(std::move(close)), rng_(seed) {
    free_codes_.reserve(kCodeSpace);
    for (int i = 0; i < kCodeSpace; ++i) free_codes_.push_back(i);
  }

  const ServerConfig& config() const { return cfg_; }
  std::size_t live_sessions() const { return sessions_.size(); }

  const SessionRecord* session(const SessionCode& code) const {
    auto it = sessions_.find(code);
    return it == sessions_.end() ? nullptr : &it->second;
  }

  /// Uniform over unused codes.
  Result<SessionCode, SessionsExhausted> allocate_session(double now) {
    if (free_codes_.empty()) return fail(SessionsExhausted{});
    std::uniform_int_distribution<std::size_t> pick(0, free_codes_.size() - 1);
    const std::size_t i = pick(rng_);
    const int index = free_codes_[i];
    free_codes_[i] = free_codes_.back();
    free_codes_.pop_back();
    const auto code = SessionCode::from_index(index);
    SessionRecord rec;
    rec.code = code;
    for (int ch : scene_.channelIds) rec.state.channels[ch] = ChannelState{};
    rec.createdAt = rec.lastActivityAt = now;
    rec.emptySince = now;
    sessions_.emplace(code, std::move(rec));
    return code;
  }

  void on_open(ConnId conn, double /*now*/) { conns_[conn]; }

  void on_close(ConnId conn, double now) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    if (it->second) remove_member(*it->second, now);
    conns_.erase(it);
  }

  void on_message(ConnId conn, std::string_view text, double now) {
    auto cit = conns_.find(conn);
    if (cit == conns_.end()) cit = conns_.emplace(conn, std::nullopt).first;
    auto decoded = decode_message(text);
    if (!decoded) {
      send_error(conn, std::string(to_string(decoded.error().kind)), decoded.error().detail);
      return;
    }
    const Message& msg = *decoded;
    if (cit->second) touch(*cit->second, now);

    switch (msg.kind()) {
      case Kind::create_session: {
        auto code = allocate_session(now);
        if (!code) {
          send_error(conn, "sessions_exhausted", "all 10000 session codes are in use");
          return;
        }
        send(conn, make_message(SessionCreated{*code}, *code));
        return;
      }
      case Kind::join_request:
        handle_join(conn, msg, now);
        return;
      case Kind::ping:
        send(conn, make_message(Pong{msg.as<Ping>()->nonce}));
        return;
      case Kind::pong:
        return;
      case Kind::leave:
        if (cit->second) {
          remove_member(*cit->second, now);
          cit->second.reset();
        }
        return;
      case Kind::delta:
        handle_delta(conn, msg, now);
        return;
      default:
        send_error(conn, "unexpected_kind", "servers do not accept " + std::string(to_string(msg.kind())));
        return;
    }
  }

  /// Heartbeats, evictions and expiry of empty sessions.
  void tick(double now) {
    const double evict_after = cfg_.heartbeatIntervalSec * cfg_.missedPongsLimit;
    std::vector<Slot> evict;
    for (auto& [code, rec] : sessions_) {
      for (auto& [id, m] : rec.members) {
        const double idle = now - m.lastHeard;
        if (idle >= evict_after) {
          evict.push_back({code, id});
        } else if (idle >= cfg_.heartbeatIntervalSec && now - m.lastPing >= cfg_.heartbeatIntervalSec) {
          m.lastPing = now;
          send(m.conn, make_message(Ping{++m.pingsSent}, code));
        }
      }
    }
    for (const auto& slot : evict) {
      const ConnId conn = sessions_.at(slot.code).members.at(slot.id).conn;
      remove_member(slot, now);
      if (auto it = conns_.find(conn); it != conns_.end()) it->second.reset();
      close_(conn);
    }
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      const auto& rec = it->second;
      if (rec.members.empty() && rec.emptySince && now - *rec.emptySince >= cfg_.sessionGraceSec) {
        free_codes_.push_back(rec.code.index());
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

 private:
  struct Slot {
    SessionCode code;
    ClientId id;
  };

  void send(ConnId conn, const Message& m) { send_(conn, encode_message(m)); }

  void send_error(ConnId conn, std::string code, std::string message, std::vector<std::string> paths = {}) {
    send(conn, make_message(ErrorPayload{std::move(code), std::move(message), std::move(paths)}));
  }

  void touch(const Slot& slot, double now) {
    auto s = sessions_.find(slot.code);
    if (s == sessions_.end()) return;
    auto m = s->second.members.find(slot.id);
    if (m != s->second.members.end()) m->second.lastHeard = now;
  }

  ClientId fresh_id(const SessionRecord& rec) {
    for (;;) {
      auto id = ClientId::from_words(rng_(), rng_());
      if (!rec.members.count(id)) return id;
    }
  }

  void handle_join(ConnId conn, const Message& msg, double now) {
    auto& slot = conns_[conn];
    if (slot) {
      remove_member(*slot, now);
      slot.reset();
    }
    if (!msg.session) {
      send(conn, make_message(JoinReject{"unknown_code"}));
      return;
    }
    auto it = sessions_.find(*msg.session);
    if (it == sessions_.end()) {
      send(conn, make_message(JoinReject{"unknown_code"}, *msg.session));
      return;
    }
    auto& rec = it->second;
    const bool rejoin = msg.sender.has_value() && !msg.sender->empty();
    // A rejoin under an id whose old connection is still registered takes it over.
    if (rejoin) {
      if (auto old = rec.members.find(*msg.sender); old != rec.members.end()) {
        const ConnId prev = old->second.conn;
        rec.members.erase(old);
        if (prev != conn) {
          if (auto pc = conns_.find(prev); pc != conns_.end()) pc->second.reset();
          close_(prev);
        }
      }
    }
    if (rec.members.size() >= cfg_.maxMembers) {
      send(conn, make_message(JoinReject{"session_full"}, rec.code));
      if (rec.members.empty()) rec.emptySince = now;
      return;
    }
    Member m;
    m.id = rejoin ? *msg.sender : fresh_id(rec);
    m.role = msg.as<JoinRequest>()->role;
    m.conn = conn;
    m.lastHeard = m.lastPing = now;
    rec.members[m.id] = m;
    rec.emptySince.reset();
    rec.lastActivityAt = now;
    slot = Slot{rec.code, m.id};

    const std::uint64_t seq = rec.nextSeq - 1;
    if (rejoin) {
      send(conn, make_message(FullSync{seq, rec.state}, rec.code, m.id, seq));
    } else {
      JoinAck ack{m.id, rec.code, seq, rec.state, scene_.catalogChecksum, scene_.catalog};
      send(conn, make_message(std::move(ack), rec.code, m.id, seq));
    }
  }

  void handle_delta(ConnId conn, const Message& msg, double now) {
    const auto& slot = conns_[conn];
    if (!slot || (msg.sender && *msg.sender != slot->id) || (msg.session && *msg.session != slot->code)) {
      send_error(conn, "not_member", "join a session before sending deltas");
      return;
    }
    if (msg.seq != 0) {
      send_error(conn, "invalid_update", "client deltas must carry seq 0");
      return;
    }
    auto& rec = sessions_.at(slot->code);
    rec.lastActivityAt = now;

    StateDelta accepted;
    std::vector<std::string> rejected;
    std::set<std::string> seen;
    for (const auto& u : msg.as<DeltaPayload>()->delta.updates) {
      if (!seen.insert(u.path).second || check_admission(rec.state, u)) {
        rejected.push_back(u.path);
        continue;
      }
      accepted.updates.push_back(u);
    }
    if (!rejected.empty()) {
      std::string detail;
      for (const auto& u : msg.as<DeltaPayload>()->delta.updates) {
        if (std::find(rejected.begin(), rejected.end(), u.path) == rejected.end()) continue;
        auto v = check_admission(rec.state, u);
        if (!detail.empty()) detail += "; ";
        detail += u.path + ": " + (v ? v->rule : std::string("duplicate_path"));
      }
      send_error(conn, "invalid_update", detail, rejected);
    }
    if (accepted.empty()) return;

    const std::uint64_t seq = rec.nextSeq++;
    rec.state = apply_delta(std::move(rec.state), accepted, seq, slot->id).state;
    const std::string wire = encode_message(make_message(DeltaPayload{std::move(accepted)}, rec.code, slot->id, seq));
    for (const auto& [id, m] : rec.members) send_(m.conn, wire);
  }

  void remove_member(const Slot& slot, double now) {
    auto s = sessions_.find(slot.code);
    if (s == sessions_.end()) return;
    s->second.members.erase(slot.id);
    if (s->second.members.empty()) s->second.emptySince = now;
  }

  ServerConfig cfg_;
  SceneInfo scene_;
  SendFn send_;
  CloseFn close_;
  std::mt19937_64 rng_;
  std::vector<int> free_codes_;
  std::map<SessionCode, SessionRecord> sessions_;
  std::map<ConnId, std::optional<Slot>> conns_;
};

}  // namespace tissuelink::server
