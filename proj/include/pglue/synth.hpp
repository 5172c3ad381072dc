// Procedural piecewise-rigid scene generator with scripted trajectories.
//
// Objects are 2.5D height-field patches attached to pixel rectangles of the
// image grid; the rectangle shifts by the integer-rounded image displacement
// of the object so flows stay exact. Everything is derived from the seed so
// identical configs produce byte-identical datasets.

#ifndef PGLUE_SYNTH_HPP
#define PGLUE_SYNTH_HPP

#include "pglue/dataio.hpp"
#include "pglue/scene.hpp"

#include <filesystem>
#include <utility>

namespace pglue {

enum class ObjectShape { kBox, kSphereShell, kPlanarPatch };

struct SynthObjectSpec {
  ObjectId id = 0;
  ObjectShape shape = ObjectShape::kBox;
  double size = 1.0;   // full lateral extent, scene units
  Vec3 center{Vec3::Zero()};
  int region_x = 0, region_y = 0, region_w = 16, region_h = 16;  // base rect
  Twist twist_per_frame;          // used when scripted_poses is empty
  std::vector<Pose> scripted_poses;
  std::vector<std::pair<int, int>> visible_intervals;  // inclusive; empty = always
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int keyframe_count = 2;
  int width = 64;
  int height = 64;
  double pixels_per_unit = 24.0;
  double noise_std_frac = 0.0;     // point noise std as fraction of object diameter
  double outlier_fraction = 0.0;   // fraction of flows replaced by random ones
  bool background_plane = true;
  ObjectId background_id = 0;
  double background_z = 4.0;
  std::vector<SynthObjectSpec> objects;
};

/// Generates the scene and its ground truth. Throws ConfigError for
/// overlapping pixel regions, out-of-bounds regions or an empty object set.
std::pair<SceneData, GroundTruth> generate(const SynthConfig& config);

/// The canonical acceptance scene: background plane plus four foreground
/// objects (translating, rotating, screw motion, and a co-rigid companion of
/// the rotating one that disappears after frame 6), 10 keyframes. The
/// resolution parameter scales the pixel grid; geometry is unchanged.
SynthConfig standard_benchmark(int resolution = 128);

/// Three co-moving bodies where only the front one stays visible; the item
/// touches the body, the body touches the front, so the item's parent must
/// be found through the contact chain.
SynthConfig three_body_benchmark();

/// Reads a SynthConfig from a JSON file.
SynthConfig parse_synth_config(const std::filesystem::path& path);

/// Generates and writes scene + ground truth into a directory.
void generate_to_directory(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace pglue

#endif  // PGLUE_SYNTH_HPP
