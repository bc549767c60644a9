#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace tissuelink::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Endpoint {
  std::string host{"127.0.0.1"};
  std::string port{"8787"};
  std::string target{"/"};
};

/// Accepts ws://host:port[/path] or host:port.
inline std::optional<Endpoint> parse_ws_url(const std::string& url) {
  static const std::regex re(R"(^(?:ws://)?([^:/]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  Endpoint e;
  e.host = m[1];
  if (m[2].matched) e.port = m[2];
  if (m[3].matched) e.target = m[3];
  return e;
}

class ConnectionFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// WebSocket client with its own I/O thread. Incoming text frames queue up
/// for receive(); send() may be called from any thread.
class WsClient {
 public:
  WsClient() : work_(asio::make_work_guard(io_)) {}
  ~WsClient() { close(); }

  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  void connect(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    try {
      tcp::resolver resolver(io_);
      auto results = resolver.resolve(ep.host, ep.port);
      ws_ = std::make_unique<websocket::stream<beast::tcp_stream>>(io_);
      beast::get_lowest_layer(*ws_).expires_after(timeout);
      beast::get_lowest_layer(*ws_).connect(results);
      beast::get_lowest_layer(*ws_).socket().set_option(tcp::no_delay(true));
      ws_->handshake(ep.host + ":" + ep.port, ep.target);
      beast::get_lowest_layer(*ws_).expires_never();
    } catch (const std::exception& e) {
      throw ConnectionFailed(std::string("cannot connect to ws://") + ep.host + ":" + ep.port + ep.target + ": " +
                             e.what());
    }
    ws_->text(true);
    open_ = true;
    read();
    thread_ = std::thread([this] { io_.run(); });
  }

  void send(std::string text) {
    asio::post(io_, [this, t = std::move(text)]() mutable {
      if (!open_) return;
      out_.push_back(std::move(t));
      if (out_.size() == 1) write_next();
    });
  }

  /// Next inbound message, or nullopt on timeout or once closed and drained.
  std::optional<std::string> receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [this] { return !in_.empty() || closed_; });
    if (in_.empty()) return std::nullopt;
    auto s = std::move(in_.front());
    in_.pop_front();
    return s;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  void close() {
    if (!thread_.joinable()) return;
    asio::post(io_, [this] {
      auto done = [this] {
        work_.reset();
        io_.stop();
      };
      if (!open_) return done();
      open_ = false;
      beast::get_lowest_layer(*ws_).expires_after(std::chrono::seconds(1));
      ws_->async_close(websocket::close_code::normal, [done](beast::error_code) { done(); });
    });
    thread_.join();
    mark_closed();
  }

  /// Drops the TCP connection without a close handshake (simulated crash).
  void abort() {
    if (!thread_.joinable()) return;
    asio::post(io_, [this] {
      open_ = false;
      beast::error_code ec;
      beast::get_lowest_layer(*ws_).socket().close(ec);
      work_.reset();
      io_.stop();
    });
    thread_.join();
    mark_closed();
  }

 private:
  void read() {
    ws_->async_read(buffer_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        open_ = false;
        mark_closed();
        return;
      }
      {
        std::lock_guard lock(mu_);
        in_.push_back(beast::buffers_to_string(buffer_.data()));
      }
      buffer_.consume(buffer_.size());
      cv_.notify_all();
      read();
    });
  }

  void write_next() {
    ws_->async_write(asio::buffer(out_.front()), [this](beast::error_code ec, std::size_t) {
      if (ec) {
        out_.clear();
        return;
      }
      out_.pop_front();
      if (!out_.empty()) write_next();
    });
  }

  void mark_closed() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  asio::io_context io_;
  asio::executor_work_guard<asio::io_context::executor_type> work_;
  std::unique_ptr<websocket::stream<beast::tcp_stream>> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> out_;
  bool open_{false};
  std::thread thread_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> in_;
  bool closed_{false};
};

/// Plain HTTP GET; returns (status, body).
inline std::pair<int, std::string> http_get(const Endpoint& ep, const std::string& target) {
  asio::io_context io;
  tcp::resolver resolver(io);
  beast::tcp_stream stream(io);
  stream.expires_after(std::chrono::seconds(5));
  stream.connect(resolver.resolve(ep.host, ep.port));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, ep.host);
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), res.body()};
}

}  // namespace tissuelink::net
