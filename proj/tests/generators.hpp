#pragma once

// Random value generators shared by the property tests and the acceptance suite.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/message.hpp"

namespace tissuelink::testing {

namespace proto = tissuelink::protocol;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  std::uint64_t u64() { return rng_(); }

  proto::ClientId client_id() { return proto::ClientId::from_words(rng_(), rng_()); }

  Vec3 vec3(double extent = 100.0) {
    return {uniform(-extent, extent), uniform(-extent, extent), uniform(-extent, extent)};
  }

  proto::VolumeTransform transform() {
    Quat q{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
    const double n = q.norm();
    if (n < 1e-3) q = Quat::identity();
    else q = Quat{q.w / n, q.x / n, q.y / n, q.z / n};
    return {vec3(2.0), q, std::exp(uniform(std::log(1e-3), std::log(1e3)))};
  }

  std::string entity() { return "e" + std::to_string(uniform_int(0, 9)); }

  std::set<std::string> selection() {
    std::set<std::string> s;
    const int n = uniform_int(0, 4);
    for (int i = 0; i < n; ++i) s.insert(entity());
    return s;
  }

  proto::Measurement measurement(const std::string& id) {
    return proto::Measurement::between(id, vec3(), vec3(), coin());
  }

  /// One valid update on a path drawn from a small pool so collisions are common.
  proto::Update update(bool allow_tombstones = true) {
    switch (uniform_int(0, 7)) {
      case 0: return proto::updates::color(uniform_int(0, 3), {uniform_int(0, 255), uniform_int(0, 255), uniform_int(0, 255)});
      case 1: {
        double lo = uniform(0, 1000), hi = uniform(0, 1000);
        if (lo > hi) std::swap(lo, hi);
        return proto::updates::window(uniform_int(0, 3), lo, hi);
      }
      case 2: return proto::updates::visible(uniform_int(0, 3), coin());
      case 3: return proto::updates::opacity(uniform_int(0, 3), uniform(0, 1));
      case 4: return proto::updates::transform(transform());
      case 5: return proto::updates::selection(selection());
      case 6:
        if (allow_tombstones && coin(0.3)) return proto::updates::hover(std::nullopt);
        return proto::updates::hover(entity());
      default: {
        const std::string id = "m" + std::to_string(uniform_int(0, 3));
        if (allow_tombstones && coin(0.25)) return proto::updates::delete_measurement(id);
        return proto::updates::measurement(measurement(id));
      }
    }
  }

  proto::StateDelta delta(int max_updates = 4, bool allow_tombstones = true) {
    proto::StateDelta d;
    const int n = uniform_int(1, max_updates);
    std::set<std::string> used;
    for (int i = 0; i < n; ++i) {
      auto u = update(allow_tombstones);
      if (used.insert(u.path).second) d.updates.push_back(std::move(u));
    }
    return d;
  }

  proto::SessionState state(int n_updates = 20) {
    proto::SessionState s;
    const auto sender = client_id();
    for (int i = 0; i < n_updates; ++i)
      s = proto::apply_delta(std::move(s), delta(), static_cast<std::uint64_t>(i + 1), sender).state;
    return s;
  }

  proto::Message message() {
    using namespace proto;
    Message m;
    if (coin()) m.session = SessionCode::from_index(uniform_int(0, 9999));
    if (coin()) m.sender = client_id();
    m.seq = coin() ? 0 : u64() >> uniform_int(0, 63);
    switch (uniform_int(0, 10)) {
      case 0: m.payload = CreateSession{}; break;
      case 1: m.payload = SessionCreated{SessionCode::from_index(uniform_int(0, 9999))}; break;
      case 2: m.payload = JoinRequest{static_cast<Role>(uniform_int(0, 3))}; break;
      case 3: {
        JoinAck ack{client_id(), SessionCode::from_index(uniform_int(0, 9999)), u64() >> 8,
                    state(uniform_int(0, 10)), "0123456789abcdef", std::nullopt};
        if (coin()) {
          std::vector<CatalogEntry> cat;
          for (int i = 0; i < uniform_int(0, 3); ++i)
            cat.push_back({entity(), "label " + std::to_string(i), uniform(0, 1e4), vec3(), vec3(), vec3()});
          ack.catalog = std::move(cat);
        }
        m.payload = std::move(ack);
        break;
      }
      case 4: m.payload = JoinReject{coin() ? "unknown_code" : "session_full"}; break;
      case 5: m.payload = DeltaPayload{delta()}; break;
      case 6: m.payload = FullSync{u64() >> 4, state(uniform_int(0, 10))}; break;
      case 7: m.payload = Ping{u64()}; break;
      case 8: m.payload = Pong{u64()}; break;
      case 9: m.payload = Leave{}; break;
      default: {
        ErrorPayload e{"invalid_update", "rejected", {}};
        if (coin()) e.paths = {"channels.0.window", "transform"};
        m.payload = std::move(e);
        break;
      }
    }
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace tissuelink::testing
