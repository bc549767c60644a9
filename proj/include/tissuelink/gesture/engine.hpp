#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/geometry.hpp"
#include "tissuelink/gesture/trace.hpp"
#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/types.hpp"
#include "tissuelink/result.hpp"
#include "tissuelink/scene/scene.hpp"

namespace tissuelink::gesture {

using protocol::Measurement;
using protocol::StateDelta;
using protocol::VolumeTransform;

struct GestureConfig {
  double pinchEngage{0.02};    // m, index-thumb distance
  double pinchRelease{0.03};   // m
  double measureStart{0.015};  // m, index-index distance
  double degenerateGrab{1e-4}; // m, minimum two-hand separation at grab
  double metersPerMicrometer{1e-3};
  std::string measurementPrefix{"meas"};
};

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

/// world = t + R * (scale * metersPerMicrometer * data)
inline Vec3 data_to_world(const Vec3& d, const VolumeTransform& tr, double metersPerMicrometer) {
  return tr.translation + tr.rotation.rotate(d * (tr.scale * metersPerMicrometer));
}

inline Vec3 world_to_data(const Vec3& p, const VolumeTransform& tr, double metersPerMicrometer) {
  return tr.rotation.conjugate().rotate(p - tr.translation) * (1.0 / (tr.scale * metersPerMicrometer));
}

// ---------------------------------------------------------------------------
// Pinch
// ---------------------------------------------------------------------------

struct PinchState {
  bool pinching{false};
  std::optional<double> engagedAt;

  bool operator==(const PinchState&) const = default;
};

/// Hysteresis: engage strictly below `engage`, release strictly above `release`.
inline PinchState pinch_detect(double tipDistance, const PinchState& prev, double t,
                               const GestureConfig& cfg = {}) {
  if (!prev.pinching) {
    if (tipDistance < cfg.pinchEngage) return {true, t};
    return prev;
  }
  if (tipDistance > cfg.pinchRelease) return {};
  return prev;
}

inline PinchState pinch_detect(const Vec3& indexTip, const Vec3& thumbTip, const PinchState& prev,
                               double t, const GestureConfig& cfg = {}) {
  return pinch_detect(distance(indexTip, thumbTip), prev, t, cfg);
}

inline Vec3 pinch_point(const HandPose& h) { return (h.index + h.thumb) * 0.5; }

// ---------------------------------------------------------------------------
// Grabs
// ---------------------------------------------------------------------------

struct GrabOneSnapshot {
  Hand hand{Hand::right};
  Vec3 grab{};
  VolumeTransform t0;
};

struct GrabTwoSnapshot {
  Vec3 gL{};
  Vec3 gR{};
  VolumeTransform t0;
};

inline VolumeTransform one_hand_translate(const GrabOneSnapshot& g, const Vec3& hand) {
  VolumeTransform out = g.t0;
  out.translation = g.t0.translation + (hand - g.grab);
  return out;
}

/// Signed rotation about world +Y taking the XZ projection of u onto that of v.
inline double yaw_between(const Vec3& u3, const Vec3& v3) {
  Vec3 u{u3.x, 0.0, u3.z};
  Vec3 v{v3.x, 0.0, v3.z};
  const double lu = norm(u), lv = norm(v);
  if (lu < 1e-6 || lv < 1e-6) return 0.0;
  u = u * (1.0 / lu);
  v = v * (1.0 / lv);
  return std::atan2(cross(u, v).y, dot(u, v));
}

inline Vec3 rotate_y(double angle, const Vec3& v) {
  if (angle == 0.0) return v;
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

/// Scale about the grab midpoint, yaw about world +Y, then carry the midpoint
/// to the current one. Hands at the grab pose give back t0 exactly.
inline VolumeTransform two_hand_transform(const GrabTwoSnapshot& g, const Vec3& left, const Vec3& right) {
  const auto& t0 = g.t0;
  const double ratio = distance(left, right) / distance(g.gL, g.gR);
  const double scale = std::clamp(ratio * t0.scale, protocol::kMinScale, protocol::kMaxScale);
  const double s = scale / t0.scale;
  const double yaw = yaw_between(g.gR - g.gL, right - left);
  const Vec3 gm = (g.gL + g.gR) * 0.5;
  const Vec3 m = (left + right) * 0.5;
  const Vec3 d = t0.translation - gm;
  VolumeTransform out;
  out.translation = (t0.translation + (m - gm)) + (rotate_y(yaw, d) * s - d);
  out.rotation = Quat{std::cos(yaw / 2.0), 0.0, std::sin(yaw / 2.0), 0.0} * t0.rotation;
  out.scale = scale;
  return out;
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

enum class EventKind {
  HoverChanged,
  SelectionToggled,
  TransformUpdated,
  MeasureStarted,
  MeasureEndpointLocked,
  MeasureFinalized,
  MeasureAborted,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::HoverChanged: return "HoverChanged";
    case EventKind::SelectionToggled: return "SelectionToggled";
    case EventKind::TransformUpdated: return "TransformUpdated";
    case EventKind::MeasureStarted: return "MeasureStarted";
    case EventKind::MeasureEndpointLocked: return "MeasureEndpointLocked";
    case EventKind::MeasureFinalized: return "MeasureFinalized";
    case EventKind::MeasureAborted: return "MeasureAborted";
  }
  return "?";
}

struct GestureEvent {
  double t{0.0};
  EventKind kind{EventKind::HoverChanged};
  std::optional<std::string> entity;  // HoverChanged, SelectionToggled
  bool selected{false};               // SelectionToggled
  VolumeTransform transform;          // TransformUpdated
  Measurement measurement;            // Measure*; only id for MeasureAborted
  Hand hand{Hand::left};              // MeasureEndpointLocked

  nlohmann::json to_json() const {
    nlohmann::json j{{"t", t}, {"kind", to_string(kind)}};
    auto meas = [&] {
      auto m = protocol::values::measurement(measurement);
      m["id"] = measurement.id;
      return m;
    };
    switch (kind) {
      case EventKind::HoverChanged:
        j["entity"] = entity ? nlohmann::json(*entity) : nlohmann::json(nullptr);
        break;
      case EventKind::SelectionToggled:
        j["entity"] = *entity;
        j["selected"] = selected;
        break;
      case EventKind::TransformUpdated:
        j["transform"] = protocol::values::transform(transform);
        break;
      case EventKind::MeasureStarted:
      case EventKind::MeasureFinalized:
        j["measurement"] = meas();
        break;
      case EventKind::MeasureEndpointLocked:
        j["hand"] = to_string(hand);
        j["measurement"] = meas();
        break;
      case EventKind::MeasureAborted:
        j["measurementId"] = measurement.id;
        break;
    }
    return j;
  }
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Shared state the engine reads each frame: the current placement and
/// selection as seen by this client.
struct GestureContext {
  VolumeTransform transform;
  std::set<std::string> selection;
};

struct GestureOutput {
  std::vector<GestureEvent> events;
  StateDelta delta;
};

struct StaleFrame {
  double t;
  double last;
};

namespace mode {
struct Idle {};
struct GrabOne {
  GrabOneSnapshot snap;
};
struct GrabTwo {
  GrabTwoSnapshot snap;
};
struct MeasurePlacing {};
struct MeasureLockedOne {
  Hand locked;
};
}  // namespace mode

using Mode = std::variant<mode::Idle, mode::GrabOne, mode::GrabTwo, mode::MeasurePlacing, mode::MeasureLockedOne>;

/// Sequential reducer from hand frames to gesture events and state deltas.
/// Precedence per frame: active measurement, selection toggle, grab,
/// measurement start, then hover.
class GestureEngine {
 public:
  explicit GestureEngine(GestureConfig cfg = {}) : cfg_(std::move(cfg)) {}

  const GestureConfig& config() const { return cfg_; }
  const Mode& mode() const { return mode_; }
  const std::optional<std::string>& hover() const { return hover_; }
  const PinchState& pinch(Hand h) const { return pinch_[idx(h)]; }

  Result<GestureOutput, StaleFrame> update(const HandFrame& frame, const scene::SpatialIndex& scene,
                                           const GestureContext& ctx) {
    if (last_t_ && !(frame.t > *last_t_)) return fail(StaleFrame{frame.t, *last_t_});
    last_t_ = frame.t;

    GestureOutput out;
    const double t = frame.t;
    std::array<bool, 2> engaged{};
    for (Hand h : kHands) {
      const auto& pose = frame.hand(h);
      auto& p = pinch_[idx(h)];
      const bool was = p.pinching;
      p = pose ? pinch_detect(pose->index, pose->thumb, p, t, cfg_) : PinchState{};
      engaged[idx(h)] = p.pinching && !was;
      if (!p.pinching) consumed_[idx(h)] = false;
    }

    const bool in_grab = std::holds_alternative<mode::GrabOne>(mode_) || std::holds_alternative<mode::GrabTwo>(mode_);
    VolumeTransform tr = in_grab ? chain_ : ctx.transform;

    std::optional<VolumeTransform> transform_update;
    std::optional<std::set<std::string>> selection_update;
    std::optional<std::optional<std::string>> hover_update;
    std::optional<std::pair<std::string, std::optional<Measurement>>> meas_update;

    auto event = [&](EventKind k) -> GestureEvent& {
      out.events.push_back(GestureEvent{});
      out.events.back().t = t;
      out.events.back().kind = k;
      return out.events.back();
    };

    if (measuring()) {
      if (!frame.left || !frame.right) {
        event(EventKind::MeasureAborted).measurement.id = draft_.id;
        meas_update.emplace(draft_.id, std::nullopt);
        mode_ = mode::Idle{};
        for (Hand h : kHands) consumed_[idx(h)] = pinch_[idx(h)].pinching;
      } else {
        const Vec3 dl = world_to_data(frame.left->index, tr, cfg_.metersPerMicrometer);
        const Vec3 dr = world_to_data(frame.right->index, tr, cfg_.metersPerMicrometer);
        bool finalize = false;
        if (std::holds_alternative<mode::MeasurePlacing>(mode_)) {
          draft_ = Measurement::between(draft_.id, dl, dr, false);
          for (Hand h : kHands) {
            if (!engaged[idx(h)]) continue;
            consumed_[idx(h)] = true;
            if (std::holds_alternative<mode::MeasurePlacing>(mode_)) {
              mode_ = mode::MeasureLockedOne{h};
              auto& e = event(EventKind::MeasureEndpointLocked);
              e.hand = h;
              e.measurement = draft_;
            } else {
              finalize = true;
            }
          }
        } else {
          const Hand free = other(std::get<mode::MeasureLockedOne>(mode_).locked);
          if (free == Hand::left) draft_.endpointA = dl;
          else draft_.endpointB = dr;
          draft_ = Measurement::between(draft_.id, draft_.endpointA, draft_.endpointB, false);
          if (engaged[idx(free)]) {
            consumed_[idx(free)] = true;
            finalize = true;
          }
        }
        if (finalize) {
          draft_.finalized = true;
          event(EventKind::MeasureFinalized).measurement = draft_;
          meas_update.emplace(draft_.id, draft_);
          mode_ = mode::Idle{};
        } else if (!last_meas_ || last_meas_->first != draft_.id || last_meas_->second != draft_) {
          meas_update.emplace(draft_.id, draft_);
        }
      }
    } else {
      // Pinch while hovering toggles selection; at most once per frame.
      bool fresh = false;
      for (Hand h : kHands) fresh = fresh || (engaged[idx(h)] && !consumed_[idx(h)]);
      if (hover_ && fresh) {
        auto sel = ctx.selection;
        const bool selected = !sel.count(*hover_);
        if (selected) sel.insert(*hover_);
        else sel.erase(*hover_);
        auto& e = event(EventKind::SelectionToggled);
        e.entity = hover_;
        e.selected = selected;
        selection_update = std::move(sel);
        for (Hand h : kHands)
          if (engaged[idx(h)]) consumed_[idx(h)] = true;
      }

      std::vector<Hand> active;
      for (Hand h : kHands)
        if (frame.hand(h) && pinch_[idx(h)].pinching && !consumed_[idx(h)]) active.push_back(h);
      if (active.size() == 2) {
        if (!std::holds_alternative<mode::GrabTwo>(mode_)) {
          const Vec3 gl = pinch_point(*frame.left), gr = pinch_point(*frame.right);
          if (distance(gl, gr) >= cfg_.degenerateGrab) {
            mode_ = mode::GrabTwo{{gl, gr, tr}};
            chain_ = tr;
          }
        }
      } else if (active.size() == 1) {
        const Hand h = active[0];
        auto* g = std::get_if<mode::GrabOne>(&mode_);
        if (!g || g->snap.hand != h) {
          mode_ = mode::GrabOne{{h, pinch_point(*frame.hand(h)), tr}};
          chain_ = tr;
        }
      } else {
        mode_ = mode::Idle{};
      }

      std::optional<VolumeTransform> next;
      if (auto* g = std::get_if<mode::GrabOne>(&mode_)) {
        next = one_hand_translate(g->snap, pinch_point(*frame.hand(g->snap.hand)));
      } else if (auto* g2 = std::get_if<mode::GrabTwo>(&mode_)) {
        next = two_hand_transform(g2->snap, pinch_point(*frame.left), pinch_point(*frame.right));
      }
      if (next) {
        if (!(*next == tr)) {
          event(EventKind::TransformUpdated).transform = *next;
          transform_update = *next;
        }
        chain_ = *next;
        tr = *next;
      }

      // Measurement start; re-armed only after the fingertips separate again.
      const bool close = frame.left && frame.right &&
                         distance(frame.left->index, frame.right->index) < cfg_.measureStart;
      if (!close) armed_ = true;
      if (std::holds_alternative<mode::Idle>(mode_) && armed_ && close && !pinch_[0].pinching &&
          !pinch_[1].pinching) {
        ++counter_;
        draft_ = Measurement::between(cfg_.measurementPrefix + "-" + std::to_string(counter_),
                                      world_to_data(frame.left->index, tr, cfg_.metersPerMicrometer),
                                      world_to_data(frame.right->index, tr, cfg_.metersPerMicrometer), false);
        mode_ = mode::MeasurePlacing{};
        armed_ = false;
        event(EventKind::MeasureStarted).measurement = draft_;
        meas_update.emplace(draft_.id, draft_);
      }
    }

    if (!measuring()) {
      const scene::EntityMesh* best = nullptr;
      for (Hand h : kHands) {
        const auto& pose = frame.hand(h);
        if (!pose || pinch_[idx(h)].pinching) continue;
        auto hit = scene.query_point(world_to_data(pose->index, tr, cfg_.metersPerMicrometer));
        if (!hit) continue;
        const auto* e = scene.find(*hit);
        if (!best || e->signedVolumeUm3 < best->signedVolumeUm3 ||
            (e->signedVolumeUm3 == best->signedVolumeUm3 && e->entityId < best->entityId))
          best = e;
      }
      std::optional<std::string> hv;
      if (best) hv = best->entityId;
      if (hv != hover_) {
        event(EventKind::HoverChanged).entity = hv;
        hover_update = hv;
        hover_ = hv;
      }
    }

    namespace up = protocol::updates;
    if (transform_update) out.delta.updates.push_back(up::transform(*transform_update));
    if (selection_update) out.delta.updates.push_back(up::selection(*selection_update));
    if (hover_update) out.delta.updates.push_back(up::hover(*hover_update));
    if (meas_update) {
      out.delta.updates.push_back(meas_update->second ? up::measurement(*meas_update->second)
                                                      : up::delete_measurement(meas_update->first));
      last_meas_ = meas_update;
    }
    return out;
  }

 private:
  static constexpr std::array<Hand, 2> kHands{Hand::left, Hand::right};
  static std::size_t idx(Hand h) { return h == Hand::left ? 0 : 1; }

  bool measuring() const {
    return std::holds_alternative<mode::MeasurePlacing>(mode_) ||
           std::holds_alternative<mode::MeasureLockedOne>(mode_);
  }

  GestureConfig cfg_;
  Mode mode_{mode::Idle{}};
  std::array<PinchState, 2> pinch_{};
  std::array<bool, 2> consumed_{};
  std::optional<std::string> hover_;
  std::optional<double> last_t_;
  VolumeTransform chain_;
  Measurement draft_;
  std::optional<std::pair<std::string, std::optional<Measurement>>> last_meas_;
  bool armed_{true};
  int counter_{0};
};

// ---------------------------------------------------------------------------
// Offline replay
// ---------------------------------------------------------------------------

struct ReplayResult {
  std::vector<GestureEvent> events;
  std::vector<StateDelta> deltas;
  protocol::SessionState state;
};

/// Feeds frames through an engine whose context is its own applied output,
/// as a lone client with an echoing server would see it.
inline ReplayResult replay(const std::vector<HandFrame>& frames, const scene::SpatialIndex& scene,
                           const GestureConfig& cfg = {}, protocol::SessionState initial = {}) {
  GestureEngine engine(cfg);
  ReplayResult r;
  r.state = std::move(initial);
  for (const auto& f : frames) {
    auto out = engine.update(f, scene, {r.state.transform, r.state.selection});
    if (!out) continue;
    for (auto& e : out->events) r.events.push_back(std::move(e));
    for (const auto& u : out->delta.updates)
      protocol::detail::write_value(r.state, *protocol::parse_path(u.path), u.value);
    if (!out->delta.empty()) r.deltas.push_back(std::move(out->delta));
  }
  return r;
}

}  // namespace tissuelink::gesture
