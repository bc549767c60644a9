#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissuelink/geometry.hpp"
#include "tissuelink/protocol/message.hpp"
#include "tissuelink/scene/mesh.hpp"

namespace tissuelink::scene {

namespace fs = std::filesystem;

struct ChannelInfo {
  int id{0};
  std::string name;
  bool operator==(const ChannelInfo&) const = default;
};

/// Scene-level metadata. Voxel sizes follow OME-Zarr "scale" semantics:
/// micrometers per voxel along x, y, z.
struct SceneMetadata {
  std::string name;
  Vec3 voxelSizeUm{1.0, 1.0, 1.0};
  std::array<std::int64_t, 3> dimensions{0, 0, 0};
  std::vector<ChannelInfo> channels;
  double metersPerMicrometer{1e-3};
  std::map<std::string, std::string> labels;  // optional entity id -> display label
};

enum class SceneErrorKind { missing_file, metadata_schema, obj_parse, empty_scene, unknown_entity };

class SceneError : public std::runtime_error {
 public:
  SceneError(SceneErrorKind kind, std::string message, int line = 0)
      : std::runtime_error(std::move(message)), kind_(kind), line_(line) {}

  SceneErrorKind kind() const { return kind_; }
  /// 1-based line number for obj_parse errors, 0 otherwise.
  int line() const { return line_; }

 private:
  SceneErrorKind kind_;
  int line_;
};

// ---------------------------------------------------------------------------
// scene.json
// ---------------------------------------------------------------------------

inline SceneMetadata parse_metadata(const nlohmann::json& j) {
  auto bad = [](const std::string& what) {
    return SceneError(SceneErrorKind::metadata_schema, "scene.json: " + what);
  };
  if (!j.is_object()) throw bad("top level must be an object");
  SceneMetadata m;

  if (!j.contains("name") || !j["name"].is_string()) throw bad("'name' must be a string");
  m.name = j["name"].get<std::string>();

  if (!j.contains("voxelSizeUm") || !j["voxelSizeUm"].is_array() || j["voxelSizeUm"].size() != 3)
    throw bad("'voxelSizeUm' must be [x,y,z]");
  for (int i = 0; i < 3; ++i) {
    const auto& e = j["voxelSizeUm"][static_cast<std::size_t>(i)];
    if (!e.is_number() || !(e.get<double>() > 0.0)) throw bad("voxel sizes must be positive");
    m.voxelSizeUm[i] = e.get<double>();
  }

  if (!j.contains("dimensions") || !j["dimensions"].is_array() || j["dimensions"].size() != 3)
    throw bad("'dimensions' must be [nx,ny,nz]");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& e = j["dimensions"][i];
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
      throw bad("dimensions must be non-negative integers");
    m.dimensions[i] = e.get<std::int64_t>();
  }

  if (!j.contains("channels") || !j["channels"].is_array()) throw bad("'channels' must be an array");
  for (const auto& c : j["channels"]) {
    if (!c.is_object() || !c.contains("id") || !c["id"].is_number_integer() ||
        c["id"].get<std::int64_t>() < 0 || c["id"].get<std::int64_t>() > 1'000'000 ||
        !c.contains("name") || !c["name"].is_string())
      throw bad("channel entries must be {\"id\":int>=0,\"name\":str}");
    ChannelInfo info{c["id"].get<int>(), c["name"].get<std::string>()};
    for (const auto& prev : m.channels)
      if (prev.id == info.id) throw bad("duplicate channel id " + std::to_string(info.id));
    m.channels.push_back(std::move(info));
  }

  if (j.contains("metersPerMicrometer")) {
    const auto& e = j["metersPerMicrometer"];
    if (!e.is_number() || !(e.get<double>() > 0.0)) throw bad("'metersPerMicrometer' must be positive");
    m.metersPerMicrometer = e.get<double>();
  }

  if (j.contains("labels")) {
    if (!j["labels"].is_object()) throw bad("'labels' must map entity ids to strings");
    for (const auto& [k, v] : j["labels"].items()) {
      if (!v.is_string()) throw bad("'labels' must map entity ids to strings");
      m.labels[k] = v.get<std::string>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// entities.obj
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses ASCII Wavefront OBJ where every `o <entityId>` group is one entity.
/// Vertex indices are global (1-based, negative = relative); each entity is
/// re-indexed over the vertices its faces reference. Only triangles allowed.
inline std::vector<EntityMesh> parse_obj(std::istream& in) {
  std::vector<Vec3> positions;
  struct Group {
    std::string id;
    std::vector<std::array<std::int64_t, 3>> faces;  // global 0-based
    int line;
  };
  std::vector<Group> groups;
  std::string raw;
  int line_no = 0;
  auto err = [&](const std::string& msg) {
    return SceneError(SceneErrorKind::obj_parse,
                      "entities.obj:" + std::to_string(line_no) + ": " + msg, line_no);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto tok = detail::split_ws(line);
    const auto key = tok[0];
    if (key == "v") {
      if (tok.size() != 4 && tok.size() != 5) throw err("vertex needs 3 coordinates");
      Vec3 p;
      for (int i = 0; i < 3; ++i) {
        auto d = detail::parse_double(tok[static_cast<std::size_t>(i + 1)]);
        if (!d) throw err("bad vertex coordinate '" + std::string(tok[static_cast<std::size_t>(i + 1)]) + "'");
        p[i] = *d;
      }
      positions.push_back(p);
    } else if (key == "o") {
      if (tok.size() != 2) throw err("'o' needs exactly one entity id");
      std::string id(tok[1]);
      for (const auto& g : groups)
        if (g.id == id) throw err("duplicate entity id '" + id + "'");
      groups.push_back({std::move(id), {}, line_no});
    } else if (key == "f") {
      if (groups.empty()) throw err("face before any 'o' group");
      if (tok.size() != 4) throw err("only triangulated faces are supported");
      std::array<std::int64_t, 3> face{};
      for (std::size_t i = 0; i < 3; ++i) {
        auto ref = tok[i + 1].substr(0, tok[i + 1].find('/'));
        std::int64_t idx = 0;
        auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
        if (ec != std::errc{} || ptr != ref.data() + ref.size() || idx == 0)
          throw err("bad face index '" + std::string(tok[i + 1]) + "'");
        const auto n = static_cast<std::int64_t>(positions.size());
        const std::int64_t global = idx > 0 ? idx - 1 : n + idx;
        if (global < 0 || global >= n) throw err("face index out of range");
        face[i] = global;
      }
      groups.back().faces.push_back(face);
    } else if (key == "vn" || key == "vt" || key == "g" || key == "s" || key == "usemtl" ||
               key == "mtllib" || key == "l" || key == "vp") {
      continue;
    } else {
      throw err("unsupported record '" + std::string(key) + "'");
    }
  }

  std::vector<EntityMesh> out;
  for (auto& g : groups) {
    if (g.faces.empty()) {
      line_no = g.line;
      throw err("entity '" + g.id + "' has no faces");
    }
    EntityMesh mesh;
    mesh.entityId = g.id;
    mesh.label = g.id;
    std::map<std::int64_t, std::uint32_t> remap;
    for (const auto& f : g.faces) {
      Triangle t{};
      for (std::size_t i = 0; i < 3; ++i) {
        auto [it, inserted] = remap.try_emplace(f[i], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(positions[static_cast<std::size_t>(f[i])]);
        t[i] = it->second;
      }
      mesh.triangles.push_back(t);
    }
    finalize(mesh);
    out.push_back(std::move(mesh));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog checksum
// ---------------------------------------------------------------------------

/// FNV-1a 64 over entities sorted by id: id bytes, vertex coordinates as
/// little-endian IEEE-754 bits, then triangle indices as little-endian u32.
/// Byte order is fixed explicitly so the value is identical across platforms.
inline std::string catalog_checksum(const std::vector<EntityMesh>& entities) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto byte = [&](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  auto u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  std::vector<const EntityMesh*> sorted;
  for (const auto& e : entities) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->entityId < b->entityId; });
  for (const auto* e : sorted) {
    for (char c : e->entityId) byte(static_cast<std::uint8_t>(c));
    byte(0);
    u64(e->vertices.size());
    for (const auto& v : e->vertices) {
      for (int a = 0; a < 3; ++a) {
        double d = v[a];
        if (d == 0.0) d = 0.0;  // fold -0
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        u64(bits);
      }
    }
    u64(e->triangles.size());
    for (const auto& t : e->triangles)
      for (auto idx : t)
        for (int i = 0; i < 4; ++i) byte(static_cast<std::uint8_t>(idx >> (8 * i)));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Spatial index
// ---------------------------------------------------------------------------

struct EntityStats {
  double volumeUm3;
  Vec3 centroidUm;
  Aabb aabb;
};

/// Bounding-volume hierarchy over entity AABBs. Immutable after build;
/// concurrent queries are safe.
class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<EntityMesh> entities) : entities_(std::move(entities)) {
    std::sort(entities_.begin(), entities_.end(),
              [](const auto& a, const auto& b) { return a.entityId < b.entityId; });
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      by_id_[entities_[i].entityId] = i;
      if (entities_[i].watertight) order_.push_back(i);
    }
    if (!order_.empty()) build(0, order_.size());
  }

  const std::vector<EntityMesh>& entities() const { return entities_; }
  std::size_t size() const { return entities_.size(); }

  const EntityMesh* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entities_[it->second];
  }

  /// Smallest-volume watertight entity containing p (ties: smaller id).
  std::optional<std::string> query_point(const Vec3& p) const {
    const EntityMesh* best = nullptr;
    visit(p, [&](const EntityMesh& e) {
      if (!mesh_contains(e, p)) return;
      if (!best || e.signedVolumeUm3 < best->signedVolumeUm3 ||
          (e.signedVolumeUm3 == best->signedVolumeUm3 && e.entityId < best->entityId))
        best = &e;
    });
    if (!best) return std::nullopt;
    return best->entityId;
  }

  /// Entity whose bounding box is closest to p (0 when inside the box);
  /// ties broken by centroid distance, then id.
  std::optional<std::string> nearest_entity(const Vec3& p) const {
    const EntityMesh* best = nullptr;
    double best_box = 0.0, best_centroid = 0.0;
    for (const auto& e : entities_) {
      const double box = e.aabb.distance_squared(p);
      const double cen = dot(e.centroid - p, e.centroid - p);
      if (!best || box < best_box || (box == best_box && cen < best_centroid)) {
        best = &e;
        best_box = box;
        best_centroid = cen;
      }
    }
    if (!best) return std::nullopt;
    return best->entityId;
  }

  EntityStats entity_stats(std::string_view id) const {
    const auto* e = find(id);
    if (!e) throw SceneError(SceneErrorKind::unknown_entity, "unknown entity '" + std::string(id) + "'");
    return {e->signedVolumeUm3, e->centroid, e->aabb};
  }

 private:
  struct Node {
    Aabb box;
    std::size_t begin;  // into order_
    std::size_t end;
    int left{-1};
    int right{-1};
  };

  int build(std::size_t begin, std::size_t end) {
    Node node{};
    node.begin = begin;
    node.end = end;
    Aabb centers;
    for (std::size_t i = begin; i < end; ++i) {
      node.box.expand(entities_[order_[i]].aabb);
      centers.expand(entities_[order_[i]].aabb.center());
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 2) return index;

    const Vec3 ext = centers.max - centers.min;
    const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double ca = entities_[a].aabb.center()[axis];
                       const double cb = entities_[b].aabb.center()[axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(index)].left = l;
    nodes_[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  template <typename F>
  void visit(const Vec3& p, F&& fn) const {
    if (nodes_.empty()) return;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (!n.box.contains(p)) continue;
      if (n.left < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
          const auto& e = entities_[order_[i]];
          if (e.aabb.contains(p)) fn(e);
        }
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
  }

  std::vector<EntityMesh> entities_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<std::size_t> order_;  // watertight entities only
  std::vector<Node> nodes_;
};

inline double measure_distance(const Vec3& a, const Vec3& b) { return distance(a, b); }

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

struct Scene {
  SceneMetadata metadata;
  SpatialIndex index;
  std::string catalogChecksum;
  std::vector<std::string> warnings;

  std::vector<protocol::CatalogEntry> catalog() const {
    std::vector<protocol::CatalogEntry> out;
    for (const auto& e : index.entities())
      out.push_back({e.entityId, e.label, e.signedVolumeUm3, e.centroid, e.aabb.min, e.aabb.max});
    return out;
  }
};

/// Loads `scene.json` + `entities.obj` from dir.
inline Scene load_scene(const fs::path& dir) {
  const auto meta_path = dir / "scene.json";
  const auto obj_path = dir / "entities.obj";
  for (const auto& p : {meta_path, obj_path})
    if (!fs::is_regular_file(p))
      throw SceneError(SceneErrorKind::missing_file, "missing " + p.string());

  Scene scene;
  {
    std::ifstream in(meta_path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SceneError(SceneErrorKind::metadata_schema, "scene.json: not valid JSON");
    scene.metadata = parse_metadata(j);
  }
  std::vector<EntityMesh> meshes;
  {
    std::ifstream in(obj_path);
    meshes = parse_obj(in);
  }
  if (meshes.empty()) throw SceneError(SceneErrorKind::empty_scene, obj_path.string() + ": no entities");
  for (auto& m : meshes) {
    if (auto it = scene.metadata.labels.find(m.entityId); it != scene.metadata.labels.end())
      m.label = it->second;
    if (!m.watertight)
      scene.warnings.push_back("entity '" + m.entityId + "' is not watertight; excluded from containment queries");
    else if (!(m.signedVolumeUm3 > 0.0))
      scene.warnings.push_back("entity '" + m.entityId + "' has non-positive signed volume (inward-facing?)");
  }
  scene.catalogChecksum = catalog_checksum(meshes);
  scene.index = SpatialIndex(std::move(meshes));
  return scene;
}

}  // namespace tissuelink::scene
