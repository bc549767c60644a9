#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/client/replica.hpp"
#include "tissuelink/gesture/engine.hpp"
#include "tissuelink/gesture/trace.hpp"
#include "tissuelink/json_diff.hpp"
#include "tissuelink/net/ws_client.hpp"
#include "tissuelink/protocol/message.hpp"
#include "tissuelink/scene/scene.hpp"
#include "tissuelink/sim/trace_stats.hpp"

namespace tissuelink::sim {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

enum ExitCode : int { kPass = 0, kAssertFailed = 2, kConnectFailed = 3, kParseError = 4 };

struct SimScenario {
  std::string serverUrl{"ws://127.0.0.1:8787"};
  std::string code;
  std::string tracePath;
  std::string sceneDir;
  double speed{1.0};
  std::optional<std::string> assertPath;
  std::optional<std::string> recordPath;
  int quiescenceMs{500};
  int delayMs{0};  // added before each outgoing delta
  std::string measurementPrefix{"meas"};
};

struct SimReport {
  int exitCode{kPass};
  std::string message;
  protocol::SessionState finalState;
  std::vector<JsonMismatch> mismatches;
  std::size_t framesSent{0};
  std::size_t deltasSent{0};
  std::size_t deltasReceived{0};
  std::size_t staleIgnored{0};
};

/// Joins a session, replays a trace through the gesture engine at trace
/// pace, then waits for quiescence and checks/records the outcome.
inline SimReport run_scenario(const SimScenario& sc, std::ostream& log = std::cerr) {
  SimReport rep;
  auto fail = [&](int code, std::string msg) {
    rep.exitCode = code;
    rep.message = std::move(msg);
    return rep;
  };
  if (!(sc.speed > 0.0)) return fail(kParseError, "speed must be positive");
  auto code = protocol::SessionCode::parse(sc.code);
  if (!code) return fail(kParseError, "session code must be four digits");
  auto endpoint = net::parse_ws_url(sc.serverUrl);
  if (!endpoint) return fail(kParseError, "cannot parse server url '" + sc.serverUrl + "'");

  std::vector<gesture::HandFrame> frames;
  {
    std::ifstream in(sc.tracePath);
    if (!in) return fail(kParseError, "cannot open trace " + sc.tracePath);
    try {
      frames = gesture::read_trace(in);
    } catch (const gesture::TraceError& e) {
      return fail(kParseError, e.what());
    }
  }
  std::optional<scene::Scene> scene;
  try {
    scene = scene::load_scene(sc.sceneDir);
  } catch (const scene::SceneError& e) {
    return fail(kParseError, e.what());
  }
  std::optional<json> expected;
  if (sc.assertPath) {
    std::ifstream in(*sc.assertPath);
    if (!in) return fail(kParseError, "cannot open assert file " + *sc.assertPath);
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail(kParseError, "assert file is not a JSON object");
    expected = std::move(j);
  }

  net::WsClient ws;
  try {
    ws.connect(*endpoint);
  } catch (const net::ConnectionFailed& e) {
    return fail(kConnectFailed, e.what());
  }
  ws.send(protocol::encode_message(protocol::make_message(protocol::JoinRequest{protocol::Role::simulator}, *code)));

  client::Replica replica;
  protocol::ClientId self;
  {
    const auto deadline = Clock::now() + 5s;
    bool joined = false;
    while (!joined) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left <= 0ms) return fail(kConnectFailed, "no join_ack within 5 s");
      auto text = ws.receive(left);
      if (!text) {
        if (ws.closed()) return fail(kConnectFailed, "connection closed during join");
        continue;
      }
      auto m = protocol::decode_message(*text);
      if (!m) continue;
      if (auto* r = m->as<protocol::JoinReject>()) return fail(kConnectFailed, "join rejected: " + r->reason);
      if (auto* ack = m->as<protocol::JoinAck>()) {
        if (ack->catalogChecksum != scene->catalogChecksum)
          return fail(kConnectFailed, "catalog checksum mismatch: server " + ack->catalogChecksum + ", local " +
                                          scene->catalogChecksum);
        self = ack->clientId;
        replica.reset(ack->seq, ack->state);
        joined = true;
      }
    }
  }

  std::vector<std::string> record;
  // Returns true for traffic that counts against quiescence (not heartbeats).
  auto handle = [&](const std::string& text) {
    auto m = protocol::decode_message(text);
    if (!m) return true;
    switch (m->kind()) {
      case protocol::Kind::delta:
        ++rep.deltasReceived;
        if (!replica.apply(m->seq, m->sender.value_or(protocol::ClientId{}), m->as<protocol::DeltaPayload>()->delta,
                           self))
          ++rep.staleIgnored;
        break;
      case protocol::Kind::full_sync:
        replica.reset(m->as<protocol::FullSync>()->seq, m->as<protocol::FullSync>()->state);
        break;
      case protocol::Kind::ping:
        ws.send(protocol::encode_message(protocol::make_message(protocol::Pong{m->as<protocol::Ping>()->nonce})));
        return false;
      case protocol::Kind::error: {
        const auto* e = m->as<protocol::ErrorPayload>();
        log << "server error " << e->code << ": " << e->message << "\n";
        for (const auto& p : e->paths) replica.drop_pending(p);
        break;
      }
      default:
        break;
    }
    return true;
  };
  auto pump_until = [&](Clock::time_point until) {
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(until - Clock::now());
      auto text = ws.receive(std::max(left, 0ms));
      if (text) {
        handle(*text);
        continue;
      }
      if (Clock::now() >= until || ws.closed()) return;
    }
  };

  gesture::GestureConfig cfg;
  cfg.metersPerMicrometer = scene->metadata.metersPerMicrometer;
  cfg.measurementPrefix = sc.measurementPrefix;
  gesture::GestureEngine engine(cfg);

  const auto start = Clock::now();
  const double t0 = frames.empty() ? 0.0 : frames.front().t;
  for (const auto& f : frames) {
    const auto due = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>((f.t - t0) / sc.speed));
    pump_until(due);
    if (ws.closed()) return fail(kConnectFailed, "connection lost during replay");
    const auto view = replica.view();
    auto out = engine.update(f, scene->index, {view.transform, view.selection});
    ++rep.framesSent;
    if (!out) continue;
    for (const auto& e : out->events) record.push_back(e.to_json().dump());
    if (out->delta.empty()) continue;
    json updates = json::array();
    for (const auto& u : out->delta.updates) updates.push_back({{"path", u.path}, {"value", u.value}});
    record.push_back(json{{"t", f.t}, {"delta", updates}}.dump());
    if (sc.delayMs > 0) pump_until(Clock::now() + std::chrono::milliseconds(sc.delayMs));
    replica.note_sent(out->delta);
    ws.send(protocol::encode_message(protocol::make_message(protocol::DeltaPayload{out->delta}, *code, self)));
    ++rep.deltasSent;
  }

  // Quiescence: own writes echoed and no non-heartbeat traffic for the window.
  const auto window = std::chrono::milliseconds(sc.quiescenceMs);
  const auto hard_stop = Clock::now() + 10s + window;
  auto quiet_since = Clock::now();
  for (;;) {
    const auto now = Clock::now();
    if (now - quiet_since >= window && !replica.has_pending()) break;
    if (ws.closed()) break;
    if (now > hard_stop) {
      log << "quiescence not reached within 10 s; some writes were never echoed\n";
      break;
    }
    const auto wait = std::max(std::chrono::duration_cast<std::chrono::milliseconds>(quiet_since + window - now), 10ms);
    if (auto text = ws.receive(wait); text && handle(*text)) quiet_since = Clock::now();
  }
  ws.close();
  rep.finalState = replica.state();

  if (sc.recordPath) {
    std::ofstream out(*sc.recordPath);
    for (const auto& line : record) out << line << '\n';
  }
  if (expected) {
    rep.mismatches = json_diff(*expected, protocol::state_to_json(rep.finalState), 1e-9, true);
    if (!rep.mismatches.empty()) {
      std::ostringstream os;
      os << rep.mismatches.size() << " path(s) differ:";
      for (const auto& m : rep.mismatches)
        os << "\n  " << m.path << ": expected " << m.expected.dump() << ", got " << m.actual.dump();
      return fail(kAssertFailed, os.str());
    }
  }
  rep.message = "ok";
  return rep;
}

}  // namespace tissuelink::sim
