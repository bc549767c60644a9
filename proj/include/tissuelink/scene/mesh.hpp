#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tissuelink/geometry.hpp"

namespace tissuelink::scene {

using Triangle = std::array<std::uint32_t, 3>;

/// Closed triangle mesh of one segmented entity, in scene micrometers.
struct EntityMesh {
  std::string entityId;
  std::string label;
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  // Derived by finalize().
  Aabb aabb;
  double signedVolumeUm3{0.0};
  Vec3 centroid{};
  bool watertight{false};
};

/// Every undirected edge must be used exactly twice, once in each direction.
inline bool is_watertight(const std::vector<Triangle>& tris) {
  if (tris.empty()) return false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : tris) {
    for (int k = 0; k < 3; ++k) {
      const auto a = t[static_cast<std::size_t>(k)];
      const auto b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.count({edge.second, edge.first})) return false;
  }
  return true;
}

/// Computes bounds, signed volume (sum of origin tetrahedra), volumetric
/// centroid and the watertight flag. Meshes with ~zero volume fall back to
/// the vertex mean for the centroid.
inline void finalize(EntityMesh& mesh) {
  mesh.aabb = Aabb{};
  for (const auto& v : mesh.vertices) mesh.aabb.expand(v);

  double six_volume = 0.0;
  Vec3 weighted{};
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const double v6 = dot(a, cross(b, c));
    six_volume += v6;
    weighted += (a + b + c) * v6;
  }
  mesh.signedVolumeUm3 = six_volume / 6.0;
  if (std::abs(six_volume) > 0.0) {
    mesh.centroid = weighted / (4.0 * six_volume);
  } else {
    Vec3 sum{};
    for (const auto& v : mesh.vertices) sum += v;
    mesh.centroid = mesh.vertices.empty() ? Vec3{} : sum / static_cast<double>(mesh.vertices.size());
  }
  mesh.watertight = is_watertight(mesh.triangles);
}

namespace detail {

enum class RayHit { miss, hit, degenerate };

// Moller-Trumbore with explicit degeneracy reporting: grazing an edge or a
// vertex, running inside the triangle's plane, or starting on the surface.
inline RayHit ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                           const Vec3& c, double length_eps) {
  constexpr double kBaryEps = 1e-10;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = cross(dir, e2);
  const double det = dot(e1, p);
  const double scale = norm(e1) * norm(e2);
  if (scale == 0.0) return RayHit::miss;  // collapsed triangle
  const Vec3 s = origin - a;
  if (std::abs(det) <= 1e-12 * scale) {
    // Ray parallel to the plane: only a problem if the origin lies in it.
    const Vec3 n = cross(e1, e2);
    const double plane_dist = std::abs(dot(s, n)) / norm(n);
    return plane_dist <= length_eps ? RayHit::degenerate : RayHit::miss;
  }
  const double inv = 1.0 / det;
  const double u = dot(s, p) * inv;
  if (u < -kBaryEps || u > 1.0 + kBaryEps) return RayHit::miss;
  const Vec3 q = cross(s, e1);
  const double v = dot(dir, q) * inv;
  if (v < -kBaryEps || u + v > 1.0 + kBaryEps) return RayHit::miss;
  const double t = dot(e2, q) * inv;
  if (t < -length_eps) return RayHit::miss;
  if (t <= length_eps) return RayHit::degenerate;
  if (u <= kBaryEps || v <= kBaryEps || u + v >= 1.0 - kBaryEps) return RayHit::degenerate;
  return RayHit::hit;
}

// Axis rays first; the rest are fixed irrational directions used when an
// axis ray grazes an edge (common on axis-aligned boxes).
inline const std::array<Vec3, 7>& cast_directions() {
  static const std::array<Vec3, 7> dirs = [] {
    std::array<Vec3, 7> d{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1},
                          Vec3{0.5773502691896258, 0.6123724356957945, 0.5400617248673217},
                          Vec3{-0.4082482904638631, 0.7071067811865476, 0.3779644730092272},
                          Vec3{0.2672612419124244, -0.5345224838248488, 0.8017837257372732},
                          Vec3{-0.6324555320336759, -0.3162277660168379, -0.7071067811865476}};
    for (std::size_t i = 3; i < d.size(); ++i) d[i] = d[i] / norm(d[i]);
    return d;
  }();
  return dirs;
}

}  // namespace detail

/// Ray-parity containment. A cast that grazes an edge, vertex or plane is
/// discarded and re-cast along the next direction; if every direction is
/// degenerate (the point is on the surface) the last cast's parity stands.
inline bool mesh_contains(const EntityMesh& mesh, const Vec3& p) {
  if (!mesh.aabb.contains(p)) return false;
  const Vec3 extent = mesh.aabb.max - mesh.aabb.min;
  const double length_eps = 1e-12 * std::max(norm(extent), 1e-300);
  bool inside = false;
  for (const auto& dir : detail::cast_directions()) {
    int crossings = 0;
    bool degenerate = false;
    for (const auto& t : mesh.triangles) {
      auto r = detail::ray_triangle(p, dir, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                    mesh.vertices[t[2]], length_eps);
      if (r == detail::RayHit::degenerate) degenerate = true;
      else if (r == detail::RayHit::hit) ++crossings;
    }
    inside = (crossings % 2) == 1;
    if (!degenerate) return inside;
  }
  return inside;
}

}  // namespace tissuelink::scene
