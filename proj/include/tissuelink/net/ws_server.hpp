#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <unordered_map>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "tissuelink/server/session_server.hpp"

namespace tissuelink::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

inline double monotonic_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

/// WebSocket front end for SessionServer. Everything runs on one io_context
/// thread, which is the single executor that serializes session mutations.
class WsServer {
 public:
  WsServer(asio::io_context& io, const tcp::endpoint& at, server::ServerConfig cfg, server::SceneInfo scene,
           std::uint64_t seed = std::random_device{}())
      : io_(io),
        acceptor_(io),
        timer_(io),
        core_(cfg, std::move(scene),
              [this](server::ConnId c, std::string text) { send(c, std::move(text)); },
              [this](server::ConnId c) { close(c); }, seed) {
    acceptor_.open(at.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(at);
    acceptor_.listen();
    tick_period_ = std::max(0.01, std::min(1.0, cfg.heartbeatIntervalSec / 4.0));
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  const server::SessionServer& core() const { return core_; }

  void start() {
    accept();
    schedule_tick();
  }

  void stop() {
    beast::error_code ec;
    acceptor_.close(ec);
    timer_.cancel();
    for (auto& [id, c] : conns_) c->shutdown();
    conns_.clear();
  }

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(WsServer& owner, tcp::socket socket, server::ConnId id)
        : owner_(owner), ws_(std::move(socket)), id_(id) {}

    void start() { read_http(); }

    void send(std::string text) {
      if (closed_) return;
      queue_.push_back(std::move(text));
      if (queue_.size() == 1 && upgraded_) write_next();
    }

    void shutdown() {
      if (closed_) return;
      closed_ = true;
      beast::error_code ec;
      ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
      ws_.next_layer().close(ec);
    }

   private:
    void read_http() {
      auto self = shared_from_this();
      http::async_read(ws_.next_layer(), buffer_, request_, [self](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        self->route();
      });
    }

    void route() {
      if (websocket::is_upgrade(request_)) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        auto self = shared_from_this();
        ws_.async_accept(request_, [self](beast::error_code ec) {
          if (ec) return self->finish();
          self->upgraded_ = true;
          self->owner_.core_.on_open(self->id_, monotonic_seconds());
          if (!self->queue_.empty()) self->write_next();
          self->read_ws();
        });
        return;
      }
      auto res = std::make_shared<http::response<http::string_body>>();
      res->version(request_.version());
      res->keep_alive(false);
      if (request_.method() == http::verb::get && request_.target() == "/healthz") {
        res->result(http::status::ok);
        res->set(http::field::content_type, "application/json");
        res->body() = "{\"status\":\"ok\",\"sessions\":" + std::to_string(owner_.core_.live_sessions()) + "}";
      } else {
        res->result(http::status::not_found);
        res->set(http::field::content_type, "text/plain");
        res->body() = "not found\n";
      }
      res->prepare_payload();
      auto self = shared_from_this();
      http::async_write(ws_.next_layer(), *res, [self, res](beast::error_code, std::size_t) { self->finish(); });
    }

    void read_ws() {
      auto self = shared_from_this();
      ws_.async_read(buffer_, [self](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        const auto text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->owner_.core_.on_message(self->id_, text, monotonic_seconds());
        if (!self->closed_) self->read_ws();
      });
    }

    void write_next() {
      auto self = shared_from_this();
      ws_.text(true);
      ws_.async_write(asio::buffer(queue_.front()), [self](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        self->queue_.pop_front();
        if (!self->queue_.empty()) self->write_next();
      });
    }

    void finish() {
      const bool was_upgraded = upgraded_;
      shutdown();
      upgraded_ = false;
      owner_.forget(id_, was_upgraded);
    }

    WsServer& owner_;
    websocket::stream<tcp::socket> ws_;
    server::ConnId id_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::deque<std::string> queue_;
    bool upgraded_{false};
    bool closed_{false};
  };

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      const auto id = next_id_++;
      auto c = std::make_shared<Connection>(*this, std::move(socket), id);
      conns_[id] = c;
      c->start();
      accept();
    });
  }

  void schedule_tick() {
    timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(tick_period_)));
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      core_.tick(monotonic_seconds());
      schedule_tick();
    });
  }

  void send(server::ConnId id, std::string text) {
    if (auto it = conns_.find(id); it != conns_.end()) it->second->send(std::move(text));
  }

  // Requested by the core (eviction, takeover); the core has already dropped the member.
  void close(server::ConnId id) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    auto c = it->second;
    conns_.erase(it);
    c->shutdown();
    core_.on_close(id, monotonic_seconds());
  }

  void forget(server::ConnId id, bool notify_core) {
    if (conns_.erase(id) && notify_core) core_.on_close(id, monotonic_seconds());
  }

  asio::io_context& io_;
  tcp::acceptor acceptor_;
  asio::steady_timer timer_;
  server::SessionServer core_;
  double tick_period_{1.0};
  server::ConnId next_id_{1};
  std::unordered_map<server::ConnId, std::shared_ptr<Connection>> conns_;
};

}  // namespace tissuelink::net
