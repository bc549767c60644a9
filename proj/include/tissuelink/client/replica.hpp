#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>

#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/message.hpp"

namespace tissuelink::client {

using namespace tissuelink::protocol;

/// Client copy of a session's state. Only server-stamped deltas are merged;
/// anything at or below the last full-sync seq is ignored.
class Replica {
 public:
  const SessionState& state() const { return state_; }
  std::uint64_t floor() const { return floor_; }
  std::uint64_t last_seq() const { return last_seq_; }

  void reset(std::uint64_t seq, SessionState state) {
    state_ = std::move(state);
    floor_ = last_seq_ = seq;
    pending_.clear();
  }

  /// Returns false when the delta is stale (seq <= floor) and was ignored.
  bool apply(std::uint64_t seq, const ClientId& sender, const StateDelta& delta, const ClientId& self = {}) {
    if (seq <= floor_) return false;
    state_ = apply_delta(std::move(state_), delta, seq, sender).state;
    last_seq_ = std::max(last_seq_, seq);
    if (!self.empty() && sender == self) {
      for (const auto& u : delta.updates) {
        auto it = pending_.find(u.path);
        if (it != pending_.end() && --it->second.count == 0) pending_.erase(it);
      }
    }
    return true;
  }

  /// Records an update this client sent and has not yet seen echoed.
  void note_sent(const StateDelta& delta) {
    for (const auto& u : delta.updates) {
      auto& p = pending_[u.path];
      p.value = u.value;
      ++p.count;
    }
  }

  void drop_pending() { pending_.clear(); }
  /// Forgets an in-flight write the server rejected (it will never echo).
  void drop_pending(const std::string& path) { pending_.erase(path); }
  bool has_pending() const { return !pending_.empty(); }

  /// Authoritative state with this client's in-flight writes laid over it.
  SessionState view() const {
    SessionState out = state_;
    for (const auto& [path, p] : pending_)
      if (auto parsed = parse_path(path)) detail::write_value(out, *parsed, p.value);
    return out;
  }

 private:
  struct Pending {
    json value;
    int count{0};
  };

  SessionState state_;
  std::uint64_t floor_{0};
  std::uint64_t last_seq_{0};
  std::map<std::string, Pending> pending_;
};

}  // namespace tissuelink::client
