#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/gesture/engine.hpp"
#include "tissuelink/gesture/trace.hpp"

namespace tissuelink::sim {

struct TraceStats {
  std::size_t frames{0};
  double duration{0.0};
  double leftPresence{0.0};
  double rightPresence{0.0};
  std::size_t pinchEngages{0};
};

inline TraceStats trace_stats(const std::vector<gesture::HandFrame>& frames, const gesture::GestureConfig& cfg = {}) {
  TraceStats s;
  s.frames = frames.size();
  if (frames.empty()) return s;
  s.duration = frames.back().t - frames.front().t;
  std::size_t left = 0, right = 0;
  gesture::PinchState pl, pr;
  for (const auto& f : frames) {
    left += f.left.has_value();
    right += f.right.has_value();
    for (auto [pose, st] : {std::pair{&f.left, &pl}, std::pair{&f.right, &pr}}) {
      const bool was = st->pinching;
      *st = *pose ? gesture::pinch_detect((*pose)->index, (*pose)->thumb, *st, f.t, cfg) : gesture::PinchState{};
      s.pinchEngages += st->pinching && !was;
    }
  }
  s.leftPresence = static_cast<double>(left) / static_cast<double>(frames.size());
  s.rightPresence = static_cast<double>(right) / static_cast<double>(frames.size());
  return s;
}

inline nlohmann::json stats_to_json(const TraceStats& s) {
  return {{"frames", s.frames},
          {"duration", s.duration},
          {"leftPresence", s.leftPresence},
          {"rightPresence", s.rightPresence},
          {"pinchEngages", s.pinchEngages}};
}

}  // namespace tissuelink::sim
