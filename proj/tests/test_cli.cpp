// Exercises the installed binary end to end through std::system; the
// binary path arrives via the PGLUE_BIN environment variable set by ctest.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* bin = std::getenv("PGLUE_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PGLUE_BIN must point at the pglue binary");
  return bin;
}

int run(const std::string& args) {
  const int status = std::system((binary() + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pglue_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in, ("missing file: " + path.string()).c_str());
  return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string file_text(const fs::path& path) {
  const auto bytes = file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

/// Shared solved canonical scene for the CLI tests.
struct CliFixture {
  fs::path scene = temp_dir("scene");
  fs::path solved = temp_dir("solved");

  CliFixture() {
    REQUIRE(run("synth --preset standard --resolution 64 --out " + scene.string()) == 0);
    REQUIRE(run("glue --scene " + scene.string() + " --out " + solved.string()) == 0);
  }
};

CliFixture& fixture() {
  static CliFixture fx;
  return fx;
}

}  // namespace

TEST_CASE("glue on the canonical scene reports one static and four dynamic objects") {
  const std::string report = file_text(fixture().solved / "report.json");
  int static_count = 0, dynamic_count = 0;
  std::size_t pos = 0;
  while ((pos = report.find("\"static\":", pos)) != std::string::npos) {
    pos += 9;
    while (pos < report.size() && report[pos] == ' ') ++pos;
    if (report.compare(pos, 4, "true") == 0) {
      ++static_count;
    } else {
      ++dynamic_count;
    }
  }
  CHECK(static_count == 1);
  CHECK(dynamic_count == 4);
}

TEST_CASE("missing manifest exits with the format error code") {
  const fs::path empty = temp_dir("no_manifest");
  const fs::path out = temp_dir("no_manifest_out");
  CHECK(run("glue --scene " + empty.string() + " --out " + out.string()) == 11);
}

TEST_CASE("iteration override shows up in the report") {
  const fs::path out = temp_dir("low_iters");
  REQUIRE(run("glue --scene " + fixture().scene.string() + " --out " + out.string() + " --max-iters 2") == 0);
  const std::string report = file_text(out / "report.json");
  CHECK(report.find("\"termination\": \"max_iterations\"") != std::string::npos);
  CHECK(report.find("\"iterations\": 2") != std::string::npos);
}

TEST_CASE("remap of a static scene to the last keyframe is byte-identical to its input") {
  // A purely static scene: one box plus background, no motion.
  const fs::path scene = temp_dir("static_scene");
  const fs::path solved = temp_dir("static_solved");
  const fs::path recon = temp_dir("static_recon");
  {
    std::ofstream cfg(scene / "config.json");
    cfg << R"({"seed": 9, "keyframe_count": 3, "width": 48, "height": 48,
               "objects": [{"id": 1, "shape": "box", "size": 0.5, "center": [0, 0, 2],
                            "region": [10, 10, 14, 14]}]})";
  }
  REQUIRE(run("synth --config " + (scene / "config.json").string() + " --out " + scene.string()) == 0);
  REQUIRE(run("glue --scene " + scene.string() + " --out " + solved.string()) == 0);
  REQUIRE(run("remap --solved " + solved.string() + " --time 2 --out " + recon.string()) == 0);
  for (int k = 0; k < 3; ++k) {
    char src[32], dst[48];
    std::snprintf(src, sizeof(src), "frame_%04d.pts", k);
    std::snprintf(dst, sizeof(dst), "warp_%04d_to_0002.pts", k);
    CHECK(file_bytes(scene / src) == file_bytes(recon / dst));
  }
}

TEST_CASE("all-times remap emits one reconstruction per keyframe") {
  const fs::path recon = temp_dir("all_times");
  REQUIRE(run("remap --solved " + fixture().solved.string() + " --all-times --out " + recon.string()) == 0);
  int maps = 0;
  for (const auto& entry : fs::directory_iterator(recon)) {
    if (entry.path().extension() == ".pts") ++maps;
  }
  CHECK(maps == 10 * 10);  // every (source, target) pair
}

TEST_CASE("occluded object reappears at the final time through its parent") {
  const fs::path recon = temp_dir("permanence");
  REQUIRE(run("remap --solved " + fixture().solved.string() + " --time 9 --out " + recon.string()) == 0);
  // source frame 3 observed the object; its provenance-4 pixels must carry
  // valid warped geometry at time 9 even though the object vanished at 7.
  const auto prov = file_bytes(recon / "warp_0003_to_0009.msk");
  const auto val = file_bytes(recon / "warp_0003_to_0009.val");
  const std::size_t npx = 64 * 64;
  REQUIRE(prov.size() == 16 + 2 * npx);
  REQUIRE(val.size() == 16 + npx);
  int present = 0;
  for (std::size_t i = 0; i < npx; ++i) {
    const std::uint16_t label = static_cast<std::uint8_t>(prov[16 + 2 * i]) |
                                (static_cast<std::uint8_t>(prov[16 + 2 * i + 1]) << 8);
    if (label == 4 && val[16 + i] != 0) ++present;
  }
  CHECK(present > 50);
}

TEST_CASE("eval scores the solved canonical scene near one and echoes the threshold") {
  const fs::path report = temp_dir("eval_out") / "eval.json";
  REQUIRE(run("eval --solved " + fixture().solved.string() + " --threshold 0.01 --report " +
              report.string()) == 0);
  const std::string text = file_text(report);
  CHECK(text.find("\"threshold\": 0.01") != std::string::npos);
  const auto pos = text.find("\"fscore\":");
  REQUIRE(pos != std::string::npos);
  const double fscore = std::stod(text.substr(pos + 9));
  CHECK(fscore >= 0.99);
}

TEST_CASE("the unsolved baseline scores strictly lower") {
  const fs::path solved = temp_dir("baseline_solved");
  const fs::path report = temp_dir("baseline_out") / "eval.json";
  REQUIRE(run("glue --scene " + fixture().scene.string() + " --out " + solved.string() +
              " --max-iters 0") == 0);
  REQUIRE(run("eval --solved " + solved.string() + " --report " + report.string()) == 0);
  const std::string text = file_text(report);
  const auto pos = text.find("\"fscore\":");
  REQUIRE(pos != std::string::npos);
  const double fscore = std::stod(text.substr(pos + 9));
  CHECK(fscore < 0.99);
}

TEST_CASE("synth is deterministic and validates its config") {
  const fs::path a = temp_dir("synth_a");
  const fs::path b = temp_dir("synth_b");
  REQUIRE(run("synth --preset three-body --out " + a.string()) == 0);
  REQUIRE(run("synth --preset three-body --out " + b.string()) == 0);
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.is_regular_file()) {
      CHECK(file_bytes(entry.path()) == file_bytes(b / entry.path().filename()));
    }
  }
  CHECK(run("synth --preset nonsense --out " + temp_dir("synth_bad").string()) == 14);
}

TEST_CASE("glue output is byte-identical across runs and worker counts") {
  const CliFixture& fx = fixture();
  const fs::path base = fx.solved;
  for (const int workers : {1, 4, 8}) {
    const fs::path out = temp_dir("det_w" + std::to_string(workers));
    REQUIRE(run("--workers " + std::to_string(workers) + " glue --scene " + fx.scene.string() +
                " --out " + out.string()) == 0);
    CHECK(file_bytes(out / "report.json") == file_bytes(base / "report.json"));
    CHECK(file_bytes(out / "poses.json") == file_bytes(base / "poses.json"));
  }
}
