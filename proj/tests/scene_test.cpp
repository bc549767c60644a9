#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "tissuelink/scene/scene.hpp"

using namespace tissuelink;
using namespace tissuelink::scene;

namespace {

const fs::path kScenes = fs::path(TISSUELINK_FIXTURES_DIR) / "scenes";

class TempScene {
 public:
  TempScene() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("tissuelink_scene_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  ~TempScene() { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
};

const char* kMinimalMeta =
    R"({"name":"t","voxelSizeUm":[1,1,1],"dimensions":[1,1,1],"channels":[]})";

const char* kTetra =
    "o tet\n"
    "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
    "f 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

SceneErrorKind load_error(const fs::path& dir, int* line = nullptr) {
  try {
    load_scene(dir);
  } catch (const SceneError& e) {
    if (line) *line = e.line();
    return e.kind();
  }
  ADD_FAILURE() << "expected SceneError";
  return SceneErrorKind::unknown_entity;
}

}  // namespace

TEST(LoadScene, UnitCube) {
  auto s = load_scene(kScenes / "cube");
  ASSERT_EQ(s.index.size(), 1u);
  const auto& e = s.index.entities()[0];
  EXPECT_EQ(e.entityId, "cube_1");
  EXPECT_EQ(e.label, "cube_1");
  EXPECT_EQ(e.signedVolumeUm3, 1.0);
  EXPECT_NEAR(e.centroid.x, 0.5, 1e-15);
  EXPECT_NEAR(e.centroid.y, 0.5, 1e-15);
  EXPECT_NEAR(e.centroid.z, 0.5, 1e-15);
  EXPECT_TRUE(e.watertight);
  EXPECT_TRUE(s.warnings.empty());
}

TEST(LoadScene, MetadataEcho) {
  auto s = load_scene(kScenes / "cube");
  EXPECT_EQ(s.metadata.voxelSizeUm, (Vec3{0.5, 0.5, 2.0}));
  EXPECT_EQ(s.metadata.name, "unit-cube");
  ASSERT_EQ(s.metadata.channels.size(), 2u);
  EXPECT_EQ(s.metadata.channels[1], (ChannelInfo{1, "CD31"}));
  EXPECT_EQ(s.metadata.metersPerMicrometer, 1.0);
}

TEST(LoadScene, DefaultsAndLabels) {
  TempScene t;
  t.write("scene.json",
          R"({"name":"t","voxelSizeUm":[1,1,1],"dimensions":[1,1,1],"channels":[],"labels":{"tet":"Tetrahedron"}})");
  t.write("entities.obj", kTetra);
  auto s = load_scene(t.dir());
  EXPECT_EQ(s.metadata.metersPerMicrometer, 1e-3);
  EXPECT_EQ(s.index.entities()[0].label, "Tetrahedron");
  EXPECT_NEAR(s.index.entities()[0].signedVolumeUm3, 1.0 / 6.0, 1e-15);
}

TEST(LoadScene, FaceIndexForms) {
  TempScene t;
  t.write("scene.json", kMinimalMeta);
  t.write("entities.obj",
          "o tet\n"
          "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nvt 0 0\n"
          "f 1/1/1 3/1/1 2/1/1\nf -4 -3 -1\nf 1//1 4//1 3//1\nf 2 3 4\n");
  auto s = load_scene(t.dir());
  EXPECT_TRUE(s.index.entities()[0].watertight);
  EXPECT_NEAR(s.index.entities()[0].signedVolumeUm3, 1.0 / 6.0, 1e-15);
}

TEST(LoadScene, Errors) {
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    EXPECT_EQ(load_error(t.dir()), SceneErrorKind::missing_file);
  }
  {
    TempScene t;
    t.write("scene.json", R"({"name":"t","voxelSizeUm":[1,1],"dimensions":[1,1,1],"channels":[]})");
    t.write("entities.obj", kTetra);
    EXPECT_EQ(load_error(t.dir()), SceneErrorKind::metadata_schema);
  }
  {
    TempScene t;
    t.write("scene.json", "{not json");
    t.write("entities.obj", kTetra);
    EXPECT_EQ(load_error(t.dir()), SceneErrorKind::metadata_schema);
  }
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    t.write("entities.obj", "o a\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n");
    int line = 0;
    EXPECT_EQ(load_error(t.dir(), &line), SceneErrorKind::obj_parse);
    EXPECT_EQ(line, 6);
  }
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    t.write("entities.obj", "o a\nv 0 0 zero\n");
    int line = 0;
    EXPECT_EQ(load_error(t.dir(), &line), SceneErrorKind::obj_parse);
    EXPECT_EQ(line, 2);
  }
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    t.write("entities.obj", "o a\nv 0 0 0\nf 1 1 9\n");
    int line = 0;
    EXPECT_EQ(load_error(t.dir(), &line), SceneErrorKind::obj_parse);
    EXPECT_EQ(line, 3);
  }
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    t.write("entities.obj", std::string(kTetra) + "o tet\n");
    EXPECT_EQ(load_error(t.dir()), SceneErrorKind::obj_parse);
  }
  {
    TempScene t;
    t.write("scene.json", kMinimalMeta);
    t.write("entities.obj", "# nothing\nv 0 0 0\n");
    EXPECT_EQ(load_error(t.dir()), SceneErrorKind::empty_scene);
  }
}

TEST(LoadScene, OpenMeshLoadsWithWarning) {
  TempScene t;
  t.write("scene.json", kMinimalMeta);
  t.write("entities.obj", "o open\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\n");
  auto s = load_scene(t.dir());
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_FALSE(s.index.entities()[0].watertight);
  EXPECT_FALSE(s.index.query_point({0.1, 0.1, 0.1}).has_value());
}

TEST(Checksum, StableAndOrderIndependent) {
  auto a = load_scene(kScenes / "demo");
  auto b = load_scene(kScenes / "demo");
  EXPECT_EQ(a.catalogChecksum, b.catalogChecksum);
  EXPECT_EQ(a.catalogChecksum.size(), 16u);

  auto meshes = a.index.entities();
  std::reverse(meshes.begin(), meshes.end());
  EXPECT_EQ(catalog_checksum(meshes), a.catalogChecksum);

  meshes[0].vertices[0].x += 1e-9;
  EXPECT_NE(catalog_checksum(meshes), a.catalogChecksum);
  EXPECT_NE(load_scene(kScenes / "cube").catalogChecksum, a.catalogChecksum);
}

TEST(Checksum, KnownValueForTetrahedron) {
  // Independent FNV-1a over the documented byte layout.
  std::istringstream in(kTetra);
  auto meshes = parse_obj(in);
  // Vertices are re-indexed in first-reference order: file 1,3,2,4 -> 0,1,2,3.
  ASSERT_EQ(meshes[0].vertices[1], (Vec3{0, 1, 0}));
  std::vector<std::uint8_t> bytes{'t', 'e', 't', 0};
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put(4, 8);
  const double coords[] = {0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1};
  for (double d : coords) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put(bits, 8);
  }
  put(4, 8);
  const std::uint32_t idx[] = {0, 1, 2, 0, 2, 3, 0, 3, 1, 2, 1, 3};
  for (auto i : idx) put(i, 4);
  std::uint64_t h = 14695981039346656037ULL;
  for (auto b : bytes) h = (h ^ b) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  EXPECT_EQ(catalog_checksum(meshes), std::string(buf));
}

TEST(QueryPoint, OutsideAndCentroid) {
  auto s = load_scene(kScenes / "cube");
  EXPECT_FALSE(s.index.query_point({2, 2, 2}).has_value());
  EXPECT_FALSE(s.index.query_point({-0.5, 0.5, 0.5}).has_value());
  EXPECT_EQ(s.index.query_point({0.5, 0.5, 0.5}), "cube_1");
  // rays from here run along the split diagonals of box faces
  EXPECT_EQ(s.index.query_point({0.25, 0.25, 0.25}), "cube_1");
  EXPECT_EQ(s.index.query_point({0.5, 0.5, 0.999}), "cube_1");
}

TEST(QueryPoint, IcosphereAgreesWithAnalyticSphere) {
  auto s = load_scene(kScenes / "icosphere");
  const double r = 10.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  int checked = 0, mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const double d = norm(p);
    if (std::abs(d - r) <= 0.02 * r) continue;
    ++checked;
    const bool inside = s.index.query_point(p).has_value();
    if (inside != (d < r)) ++mismatches;
  }
  EXPECT_GT(checked, 9000);
  EXPECT_EQ(mismatches, 0);
}

TEST(QueryPoint, IcosphereVolumeWithinTwoPercent) {
  auto s = load_scene(kScenes / "icosphere");
  const double analytic = 4.0 / 3.0 * M_PI * 1000.0;
  const double v = s.index.entity_stats("sphere").volumeUm3;
  EXPECT_LT(std::abs(v - analytic) / analytic, 0.02);
}

TEST(QueryPoint, NestedReturnsInner) {
  auto s = load_scene(kScenes / "nested_cubes");
  EXPECT_EQ(s.index.query_point({5, 5, 5}), "inner");
  EXPECT_EQ(s.index.query_point({1, 1, 1}), "outer");
  EXPECT_FALSE(s.index.query_point({11, 5, 5}).has_value());
}

TEST(QueryPoint, DemoSceneNesting) {
  auto s = load_scene(kScenes / "demo");
  EXPECT_EQ(s.index.query_point({300, 300, 50}), "glom_1_core");
  EXPECT_EQ(s.index.query_point({300, 320, 50}), "glom_1");
  EXPECT_EQ(s.index.query_point({50, 50, 50}), "cube_1");
  EXPECT_FALSE(s.index.query_point({500, 500, 50}).has_value());
}

TEST(QueryPoint, ResultLiesInsideAabb) {
  auto s = load_scene(kScenes / "demo");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 400.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng) / 4.0};
    if (auto id = s.index.query_point(p)) {
      EXPECT_TRUE(s.index.find(*id)->aabb.contains(p));
    }
  }
}

TEST(QueryPoint, IndependentOfBuildOrder) {
  auto s = load_scene(kScenes / "demo");
  auto meshes = s.index.entities();
  std::reverse(meshes.begin(), meshes.end());
  SpatialIndex other(meshes);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 350.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng) / 3.0};
    EXPECT_EQ(s.index.query_point(p), other.query_point(p));
  }
}

TEST(EntityStats, TranslatedCube) {
  auto base = load_scene(kScenes / "cube").index.entity_stats("cube_1");
  auto moved = load_scene(kScenes / "translated_cube").index.entity_stats("cube_1");
  EXPECT_DOUBLE_EQ(moved.volumeUm3, base.volumeUm3);
  EXPECT_NEAR(moved.centroidUm.x, 10.5, 1e-12);
  EXPECT_NEAR(moved.centroidUm.y, -4.5, 1e-12);
  EXPECT_NEAR(moved.centroidUm.z, 3.5, 1e-12);
  EXPECT_EQ(moved.aabb.min, (Vec3{10, -5, 3}));
}

TEST(EntityStats, UnknownEntity) {
  auto s = load_scene(kScenes / "cube");
  try {
    s.index.entity_stats("nope");
    FAIL();
  } catch (const SceneError& e) {
    EXPECT_EQ(e.kind(), SceneErrorKind::unknown_entity);
  }
}

TEST(NearestEntity, PicksClosestBox) {
  auto s = load_scene(kScenes / "demo");
  EXPECT_EQ(s.index.nearest_entity({-5, 50, 50}), "cube_1");
  EXPECT_EQ(s.index.nearest_entity({360, 300, 50}), "glom_1");
}

TEST(MeasureDistance, Examples) {
  EXPECT_EQ(measure_distance({0, 0, 0}, {3, 4, 0}), 5.0);
  EXPECT_EQ(measure_distance({1.5, -2, 7}, {1.5, -2, 7}), 0.0);
}

TEST(MeasureDistance, MatchesExtendedPrecision) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    long double s = 0;
    for (int k = 0; k < 3; ++k) {
      const long double d = static_cast<long double>(a[k]) - static_cast<long double>(b[k]);
      s += d * d;
    }
    const double oracle = static_cast<double>(std::sqrt(s));
    EXPECT_NEAR(measure_distance(a, b), oracle, 4e-16 * oracle);
  }
}
