#include "pglue/dataio.hpp"

#include "pglue/errors.hpp"
#include "pglue/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace pglue;
using namespace pglue::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pglue_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthConfig small_config() {
  SynthConfig c;
  c.seed = 21;
  c.keyframe_count = 3;
  c.width = 48;
  c.height = 48;
  c.background_z = 3.0;
  SynthObjectSpec obj;
  obj.id = 1;
  obj.shape = ObjectShape::kBox;
  obj.size = 0.6;
  obj.center = Vec3(0.0, 0.0, 2.0);
  obj.region_x = 8;
  obj.region_y = 8;
  obj.region_w = 14;
  obj.region_h = 14;
  obj.twist_per_frame = Twist(Vec3(0.08, 0.02, 0.0), Vec3::Zero());
  c.objects.push_back(obj);
  return c;
}

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file(a) == read_file(b); }

}  // namespace

TEST_CASE("scene save/load roundtrip is lossless") {
  const fs::path dir = temp_dir("roundtrip_a");
  const fs::path dir2 = temp_dir("roundtrip_b");
  auto [scene, gt] = generate(small_config());
  save_scene(scene, dir);
  const SceneData loaded = load_scene(dir);
  save_scene(loaded, dir2);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      CHECK(same_bytes(entry.path(), dir2 / entry.path().filename()));
    }
  }
  CHECK(loaded.keyframe_count() == scene.keyframe_count());
  CHECK(loaded.objects.size() == scene.objects.size());
}

TEST_CASE("manifest with missing flow file is rejected") {
  const fs::path dir = temp_dir("missing_flow");
  auto [scene, gt] = generate(small_config());
  save_scene(scene, dir);
  fs::remove(dir / "flow_0001.flo2");
  CHECK_THROWS_AS(load_scene(dir), ManifestError);
}

TEST_CASE("manifest declaring more keyframes than present is rejected") {
  const fs::path dir = temp_dir("count_mismatch");
  auto [scene, gt] = generate(small_config());
  save_scene(scene, dir);
  // Rewrite keyframe_count only; inventories stay at 3 entries.
  std::ifstream in(dir / "manifest");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"keyframe_count\": 3");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"keyframe_count\": 4");
  std::ofstream out(dir / "manifest", std::ios::trunc);
  out << text;
  out.close();
  CHECK_THROWS_AS(load_scene(dir), ManifestError);
}

TEST_CASE("NaN at a masked-invalid pixel is tolerated, at a valid pixel rejected") {
  const fs::path dir = temp_dir("nan_policy");
  auto [scene, gt] = generate(small_config());
  scene.keyframes[0].points.set_invalid(3, 3);
  scene.keyframes[0].points.points()[scene.keyframes[0].points.index(3, 3)] =
      Vec3(std::nan(""), 0.0, 0.0);
  save_scene(scene, dir);
  CHECK_NOTHROW(load_scene(dir));

  // Same NaN at a pixel that stays valid.
  auto [scene2, gt2] = generate(small_config());
  scene2.keyframes[0].points.points()[scene2.keyframes[0].points.index(4, 4)] =
      Vec3(std::nan(""), 0.0, 0.0);
  const fs::path dir2 = temp_dir("nan_policy_bad");
  save_scene(scene2, dir2);
  CHECK_THROWS_AS(load_scene(dir2), ValidationError);
}

TEST_CASE("confidence is zeroed where flow leaves the image") {
  const fs::path dir = temp_dir("flow_clip");
  auto [scene, gt] = generate(small_config());
  auto& field = scene.correspondences[0];
  field.flow[field.index(2, 2)] = Vec2(-10.0, 0.0);  // points outside
  field.confidence[field.index(2, 2)] = 0.9;
  save_scene(scene, dir);
  const SceneData loaded = load_scene(dir);
  CHECK(loaded.correspondences[0].confidence[field.index(2, 2)] == 0.0);
}

TEST_CASE("every header corruption is rejected") {
  const fs::path dir = temp_dir("fuzz");
  auto [scene, gt] = generate(small_config());
  save_scene(scene, dir);

  std::vector<fs::path> binaries;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename() != "manifest") binaries.push_back(entry.path());
  }
  REQUIRE(!binaries.empty());

  Rng rng(303);
  int rejected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const fs::path& victim = binaries[rng.below(binaries.size())];
    const auto original = read_file(victim);
    auto corrupted = original;
    const std::size_t byte = rng.below(16);  // somewhere in the header
    const unsigned char flip = static_cast<unsigned char>(1 + rng.below(255));
    corrupted[byte] = static_cast<unsigned char>(corrupted[byte] ^ flip);
    write_file(victim, corrupted);
    try {
      (void)load_scene(dir);
    } catch (const FormatError&) {
      ++rejected;
    } catch (const ManifestError&) {
      ++rejected;
    } catch (const ValidationError&) {
      ++rejected;
    }
    write_file(victim, original);
  }
  CHECK(rejected == 100);  // zero silent accepts
}

TEST_CASE("reconstruction save/load roundtrip preserves payload bytes") {
  const fs::path dir = temp_dir("recon_a");
  const fs::path dir2 = temp_dir("recon_b");
  auto [scene, gt] = generate(small_config());

  SceneReconstruction recon;
  recon.target_time = 2;
  for (int k = 0; k < 3; ++k) {
    WarpedMap wm;
    wm.source_frame = k;
    wm.points = scene.keyframes[k].points;
    wm.provenance.assign(scene.keyframes[k].mask.labels().begin(), scene.keyframes[k].mask.labels().end());
    recon.warped.push_back(std::move(wm));
  }
  save_reconstruction(recon, dir);
  const auto loaded = load_reconstruction(dir);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].target_time == 2);
  REQUIRE(loaded[0].warped.size() == 3);
  save_reconstruction(loaded[0], dir2);
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(same_bytes(entry.path(), dir2 / entry.path().filename()));
  }
}

TEST_CASE("empty reconstruction writes a manifest with zero entries") {
  const fs::path dir = temp_dir("recon_empty");
  save_reconstruction(std::vector<SceneReconstruction>{}, dir);
  const auto loaded = load_reconstruction(dir);
  CHECK(loaded.empty());
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    (void)entry;
    ++files;
  }
  CHECK(files == 1);  // just the manifest
}

TEST_CASE("ground truth roundtrips through its mirror directory") {
  const fs::path dir = temp_dir("gt_roundtrip");
  const fs::path dir2 = temp_dir("gt_roundtrip_b");
  auto [scene, gt] = generate(small_config());
  save_ground_truth(gt, dir);
  const GroundTruth loaded = load_ground_truth(dir);
  save_ground_truth(loaded, dir2);
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(same_bytes(entry.path(), dir2 / entry.path().filename()));
  }
  CHECK(loaded.keyframe_count == gt.keyframe_count);
  REQUIRE(loaded.objects.size() == gt.objects.size());
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    CHECK(loaded.objects[i].id == gt.objects[i].id);
    CHECK(loaded.objects[i].is_static == gt.objects[i].is_static);
    for (int k = 0; k < gt.keyframe_count; ++k) {
      CHECK(max_abs_diff(loaded.objects[i].poses[k].matrix(), gt.objects[i].poses[k].matrix()) == 0.0);
    }
  }
}

TEST_CASE("solved poses roundtrip through poses.json") {
  const fs::path dir = temp_dir("poses_roundtrip");
  auto [scene, gt] = generate(small_config());
  Rng rng(404);
  scene.objects[1].primitives[0].pose = random_pose(rng);
  scene.objects[1].primitives[1].pose = random_pose(rng);
  scene.objects[1].parent = 0;
  scene.objects[1].extrapolated[5] = random_pose(rng);
  scene.objects[0].is_static = true;
  save_poses(scene, dir, "some/scene");

  auto [fresh, gt2] = generate(small_config());
  const std::string ref = load_poses(fresh, dir);
  CHECK(ref == "some/scene");
  CHECK(fresh.objects[0].is_static);
  REQUIRE(fresh.objects[1].parent.has_value());
  CHECK(*fresh.objects[1].parent == 0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(max_abs_diff(fresh.objects[1].primitives[i].pose.matrix(),
                       scene.objects[1].primitives[i].pose.matrix()) == 0.0);
  }
  CHECK(max_abs_diff(fresh.objects[1].extrapolated[5].matrix(), scene.objects[1].extrapolated[5].matrix()) == 0.0);
}
