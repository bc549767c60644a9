#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tissuelink/net/ws_server.hpp"
#include "tissuelink/scene/scene.hpp"

using namespace tissuelink;

int main(int argc, char** argv) {
  CLI::App app{"tissuelink session server"};
  std::string host = "0.0.0.0";
  int port = 8787;
  std::string scene_dir;
  server::ServerConfig cfg;
  app.add_option("--host", host, "Listen address");
  app.add_option("--port", port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  app.add_option("--scene", scene_dir, "Scene fixture directory")->required();
  app.add_option("--heartbeat-sec", cfg.heartbeatIntervalSec, "Ping interval")->check(CLI::PositiveNumber);
  app.add_option("--missed-pongs", cfg.missedPongsLimit, "Silent intervals before eviction")->check(CLI::PositiveNumber);
  app.add_option("--session-grace-sec", cfg.sessionGraceSec, "Empty-session lifetime")->check(CLI::NonNegativeNumber);
  app.add_option("--max-members", cfg.maxMembers, "Members per session")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("TISSUELINK_PORT")) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "TISSUELINK_PORT is not a number: " << env << "\n";
      return 4;
    }
  }

  std::optional<scene::Scene> scene;
  try {
    scene = scene::load_scene(scene_dir);
  } catch (const scene::SceneError& e) {
    std::cerr << "scene: " << e.what() << "\n";
    return 4;
  }
  for (const auto& w : scene->warnings) std::cerr << "scene warning: " << w << "\n";

  net::asio::io_context io;
  try {
    net::WsServer srv(io, {net::asio::ip::make_address(host), static_cast<unsigned short>(port)}, cfg,
                      server::scene_info(*scene));
    srv.start();
    net::asio::signal_set signals(io, SIGINT, SIGTERM);
    signals.async_wait([&](auto, int) { srv.stop(); });
    std::cout << "listening on " << host << ":" << srv.port() << " scene=" << scene->metadata.name
              << " checksum=" << scene->catalogChecksum << std::endl;
    io.run();
  } catch (const std::exception& e) {
    std::cerr << "server: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
