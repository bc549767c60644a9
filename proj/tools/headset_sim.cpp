#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tissuelink/sim/simulator.hpp"

using namespace tissuelink;

int main(int argc, char** argv) {
  CLI::App app{"Replays a recorded hand trace into a live session"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  sim::SimScenario sc;
  std::string assert_path, record_path;
  app.add_option("--url", sc.serverUrl, "Server WebSocket URL");
  app.add_option("--code", sc.code, "Four-digit session code");
  app.add_option("--trace", sc.tracePath, "Hand trace (JSON lines)");
  app.add_option("--scene", sc.sceneDir, "Scene fixture directory (must match the server)");
  app.add_option("--speed", sc.speed, "Playback speed multiplier");
  app.add_option("--assert", assert_path, "Expected final state");
  app.add_option("--record", record_path, "Write the event and delta log here");
  app.add_option("--quiescence-ms", sc.quiescenceMs, "Idle window before the final check")->check(CLI::NonNegativeNumber);
  app.add_option("--delay-ms", sc.delayMs, "Extra delay before each outgoing delta")->check(CLI::NonNegativeNumber);
  app.add_option("--measurement-prefix", sc.measurementPrefix, "Prefix for new measurement ids");

  auto* stats = app.add_subcommand("stats", "Summarize a trace");
  std::string stats_path;
  stats->add_option("trace", stats_path, "Hand trace (JSON lines)")->required();

  auto* create = app.add_subcommand("create", "Open a new session and print its code");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  if (stats->parsed()) {
    std::ifstream in(stats_path);
    if (!in) {
      std::cerr << "cannot open " << stats_path << "\n";
      return 4;
    }
    try {
      std::cout << sim::stats_to_json(sim::trace_stats(gesture::read_trace(in))).dump(2) << "\n";
    } catch (const gesture::TraceError& e) {
      std::cerr << stats_path << ": " << e.what() << "\n";
      return 4;
    }
    return 0;
  }

  if (create->parsed()) {
    auto ep = net::parse_ws_url(sc.serverUrl);
    if (!ep) {
      std::cerr << "cannot parse server url '" << sc.serverUrl << "'\n";
      return 4;
    }
    net::WsClient ws;
    try {
      ws.connect(*ep);
    } catch (const net::ConnectionFailed& e) {
      std::cerr << e.what() << "\n";
      return 3;
    }
    ws.send(protocol::encode_message(protocol::make_message(protocol::CreateSession{})));
    while (auto text = ws.receive(std::chrono::seconds(5))) {
      auto m = protocol::decode_message(*text);
      if (!m) continue;
      if (const auto* c = m->as<protocol::SessionCreated>()) {
        std::cout << c->code.str() << "\n";
        return 0;
      }
      if (const auto* e = m->as<protocol::ErrorPayload>()) {
        std::cerr << "server error " << e->code << ": " << e->message << "\n";
        return 3;
      }
    }
    std::cerr << "no session_created from server\n";
    return 3;
  }

  if (sc.code.empty() || sc.tracePath.empty() || sc.sceneDir.empty()) {
    std::cerr << "--code, --trace and --scene are required\n";
    return 4;
  }
  if (!assert_path.empty()) sc.assertPath = assert_path;
  if (!record_path.empty()) sc.recordPath = record_path;

  const auto rep = sim::run_scenario(sc);
  if (rep.exitCode == sim::kPass)
    std::cout << "pass: " << rep.framesSent << " frames, " << rep.deltasSent << " deltas sent, "
              << rep.deltasReceived << " received\n";
  else
    std::cerr << "fail (" << rep.exitCode << "): " << rep.message << "\n";
  return rep.exitCode;
}
