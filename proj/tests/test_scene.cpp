#include "pglue/scene.hpp"

#include "pglue/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace pglue;
using namespace pglue::testing;

namespace {

Keyframe flat_keyframe(int w, int h, ObjectId label) {
  Keyframe kf;
  kf.points = PointMap(w, h);
  kf.mask = SegmentMask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      kf.points.set(x, y, Vec3(x * 0.1, y * 0.1, 1.0));
      kf.mask.set(x, y, label);
    }
  }
  return kf;
}

void paint(Keyframe& kf, ObjectId label, int x0, int y0, int w, int h) {
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) kf.mask.set(x, y, label);
  }
}

}  // namespace

TEST_CASE("single full-frame label yields one identity-pose track") {
  std::vector<Keyframe> frames{flat_keyframe(16, 16, 3)};
  const auto tracks = build_objects(frames);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].object_id == 3);
  REQUIRE(tracks[0].primitives.size() == 1);
  CHECK(tracks[0].primitives[0].pixel_count == 256);
  CHECK(tracks[0].primitives[0].pose.is_identity(0.0));
}

TEST_CASE("tracks follow label presence across frames") {
  std::vector<Keyframe> frames;
  for (int k = 0; k < 3; ++k) {
    Keyframe kf = flat_keyframe(32, 32, 0);
    paint(kf, 1, 0, 0, 12, 12);
    if (k >= 1) paint(kf, 2, 16, 16, 12, 12);
    frames.push_back(std::move(kf));
  }
  const auto tracks = build_objects(frames);
  REQUIRE(tracks.size() == 3);  // background 0 plus labels 1 and 2
  const auto& one = tracks[1];
  const auto& two = tracks[2];
  CHECK(one.primitives.size() == 3);
  CHECK(two.primitives.size() == 2);
  CHECK(two.primitives.front().keyframe_index == 1);
  CHECK(one.primitives.back().pose.is_identity(0.0));
  CHECK(two.primitives.back().pose.is_identity(0.0));
}

TEST_CASE("occlusion gaps leave holes in the track") {
  std::vector<Keyframe> frames;
  for (int k = 0; k < 5; ++k) {
    Keyframe kf = flat_keyframe(32, 32, 0);
    if (k != 3) paint(kf, 7, 4, 4, 10, 10);  // invisible at frame 3
    frames.push_back(std::move(kf));
  }
  const auto tracks = build_objects(frames);
  const ObjectTrack* seven = nullptr;
  for (const auto& t : tracks) {
    if (t.object_id == 7) seven = &t;
  }
  REQUIRE(seven != nullptr);
  std::vector<int> observed;
  for (const auto& p : seven->primitives) observed.push_back(p.keyframe_index);
  CHECK(observed == std::vector<int>{0, 1, 2, 4});
}

TEST_CASE("primitives below the minimum pixel count are dropped") {
  std::vector<Keyframe> frames;
  Keyframe kf = flat_keyframe(32, 32, 0);
  paint(kf, 5, 0, 0, 7, 7);  // 49 pixels, below the default 64
  frames.push_back(std::move(kf));
  const auto tracks = build_objects(frames);
  for (const auto& t : tracks) CHECK(t.object_id != 5);
}

TEST_CASE("a scene with nothing but dust is empty") {
  std::vector<Keyframe> frames;
  Keyframe kf;
  kf.points = PointMap(8, 8);
  kf.mask = SegmentMask(8, 8);
  kf.points.set(1, 1, Vec3(0, 0, 1));
  kf.mask.set(1, 1, 2);
  frames.push_back(std::move(kf));
  CHECK_THROWS_AS(build_objects(frames), EmptySceneError);
}

TEST_CASE("primitive_points matches a brute-force scan") {
  Rng rng(200);
  SceneData scene;
  Keyframe kf = flat_keyframe(24, 24, 0);
  // random blobby label field
  for (int i = 0; i < 150; ++i) {
    const int x = static_cast<int>(rng.below(24));
    const int y = static_cast<int>(rng.below(24));
    kf.mask.set(x, y, 9);
    if (rng.uniform() < 0.2) kf.points.set_invalid(x, y);
  }
  scene.keyframes.push_back(kf);
  Primitive prim;
  prim.object_id = 9;
  prim.keyframe_index = 0;
  const auto got = primitive_points(scene, prim);

  std::size_t expected = 0;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (kf.mask.at(x, y) == 9 && kf.points.is_valid(x, y)) {
        ++expected;
        bool found = false;
        for (const auto& pp : got) {
          if (pp.x == x && pp.y == y && (pp.point - kf.points.at(x, y)).norm() == 0.0) found = true;
        }
        CHECK(found);
      }
    }
  }
  CHECK(got.size() == expected);
}

TEST_CASE("primitive with no valid labeled pixels yields an empty cut") {
  SceneData scene;
  Keyframe kf = flat_keyframe(8, 8, 0);
  scene.keyframes.push_back(kf);
  Primitive prim;
  prim.object_id = 42;  // never painted
  prim.keyframe_index = 0;
  CHECK(primitive_points(scene, prim).empty());
}

TEST_CASE("full-frame label with all-valid map cuts every pixel") {
  SceneData scene;
  scene.keyframes.push_back(flat_keyframe(8, 8, 1));
  Primitive prim;
  prim.object_id = 1;
  prim.keyframe_index = 0;
  CHECK(primitive_points(scene, prim).size() == 64);
}

TEST_CASE("well-formed scene validates clean") {
  SceneData scene;
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.correspondences.emplace_back(16, 16, 0);
  scene.objects = build_objects(scene.keyframes);
  CHECK(validate_scene(scene).empty());
}

TEST_CASE("missing correspondence pair is named in diagnostics") {
  SceneData scene;
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.correspondences.emplace_back(16, 16, 0);  // pair (1, 2) missing
  scene.objects = build_objects(scene.keyframes);
  const auto diagnostics = validate_scene(scene);
  REQUIRE(!diagnostics.empty());
  bool named = false;
  for (const auto& d : diagnostics) {
    if (d.code == "correspondence_count" && d.message.find("(1, 2)") != std::string::npos) named = true;
  }
  CHECK(named);
}

TEST_CASE("duplicated keyframe index inside a track is flagged") {
  SceneData scene;
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.correspondences.emplace_back(16, 16, 0);
  scene.objects = build_objects(scene.keyframes);
  scene.objects[0].primitives[1].keyframe_index = 0;  // duplicate of the first
  const auto diagnostics = validate_scene(scene);
  bool flagged = false;
  for (const auto& d : diagnostics) {
    if (d.code == "track_order") flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("static track with a non-identity pose is flagged") {
  SceneData scene;
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.keyframes.push_back(flat_keyframe(16, 16, 1));
  scene.correspondences.emplace_back(16, 16, 0);
  scene.objects = build_objects(scene.keyframes);
  scene.objects[0].is_static = true;
  scene.objects[0].primitives[0].pose = Pose(Mat3::Identity(), Vec3(1, 0, 0));
  const auto diagnostics = validate_scene(scene);
  bool flagged = false;
  for (const auto& d : diagnostics) {
    if (d.code == "static_pose") flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("per-frame label grids partition the covered pixels") {
  // By construction a label grid assigns each pixel at most one label; the
  // partition property reduces to covered + uncovered = all pixels.
  Keyframe kf = flat_keyframe(16, 16, 0);
  paint(kf, 1, 0, 0, 8, 16);
  std::size_t covered = 0, uncovered = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (kf.mask.at(x, y) == kUncoveredLabel) {
        ++uncovered;
      } else {
        ++covered;
      }
    }
  }
  CHECK(covered + uncovered == 256);
}
