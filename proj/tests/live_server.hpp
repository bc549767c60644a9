#pragma once

// In-process WebSocket server on an ephemeral port plus small client helpers,
// shared by the network tests and the acceptance suite.

#include <chrono>
#include <future>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "tissuelink/net/ws_client.hpp"
#include "tissuelink/net/ws_server.hpp"
#include "tissuelink/protocol/message.hpp"
#include "tissuelink/scene/scene.hpp"

namespace tissuelink::testing {

namespace proto = tissuelink::protocol;

class LiveServer {
 public:
  LiveServer(const scene::Scene& scene, server::ServerConfig cfg = {}, std::uint64_t seed = 7)
      : srv_(io_, {net::asio::ip::make_address("127.0.0.1"), 0}, cfg, server::scene_info(scene), seed) {
    srv_.start();
    thread_ = std::thread([this] { io_.run(); });
  }
  ~LiveServer() {
    net::asio::post(io_, [this] { srv_.stop(); });
    thread_.join();
  }

  net::Endpoint endpoint() const { return {"127.0.0.1", std::to_string(srv_.port()), "/"}; }
  std::string url() const { return "ws://127.0.0.1:" + std::to_string(srv_.port()); }

  /// Runs f on the server thread and returns its result.
  template <typename F>
  auto on_server(F f) {
    std::packaged_task<decltype(f(srv_.core()))()> task([&] { return f(srv_.core()); });
    auto fut = task.get_future();
    net::asio::post(io_, [&] { task(); });
    return fut.get();
  }

  std::optional<proto::SessionState> state(const proto::SessionCode& code) {
    return on_server([&](const server::SessionServer& core) -> std::optional<proto::SessionState> {
      const auto* s = core.session(code);
      if (!s) return std::nullopt;
      return s->state;
    });
  }

 private:
  net::asio::io_context io_;
  net::WsServer srv_;
  std::thread thread_;
};

/// Waits for the next message of the given kind, skipping others.
inline std::optional<proto::Message> await_kind(net::WsClient& c, proto::Kind kind,
                                                std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    auto text = c.receive(left);
    if (!text) {
      if (c.closed()) return std::nullopt;
      continue;
    }
    auto m = proto::decode_message(*text);
    if (m && m->kind() == kind) return *m;
  }
  return std::nullopt;
}

inline void send(net::WsClient& c, const proto::Message& m) { c.send(proto::encode_message(m)); }

inline proto::SessionCode create_session(const net::Endpoint& ep) {
  net::WsClient c;
  c.connect(ep);
  send(c, proto::make_message(proto::CreateSession{}));
  auto m = await_kind(c, proto::Kind::session_created);
  if (!m) throw std::runtime_error("no session_created");
  c.close();
  return m->as<proto::SessionCreated>()->code;
}

struct Joined {
  std::unique_ptr<net::WsClient> ws;
  proto::ClientId id;
  proto::JoinAck ack;
};

inline Joined join(const net::Endpoint& ep, const proto::SessionCode& code, proto::Role role = proto::Role::observer) {
  Joined j{std::make_unique<net::WsClient>(), {}, {}};
  j.ws->connect(ep);
  send(*j.ws, proto::make_message(proto::JoinRequest{role}, code));
  auto m = await_kind(*j.ws, proto::Kind::join_ack);
  if (!m) throw std::runtime_error("no join_ack");
  j.ack = *m->as<proto::JoinAck>();
  j.id = j.ack.clientId;
  return j;
}

}  // namespace tissuelink::testing
