// Scene directory formats.
//
// Binary arrays use a 16-byte little-endian header:
//   bytes 0..3   magic "PGA1"
//   bytes 4..5   element type code (u16): 1 = float32, 2 = uint16, 3 = uint8
//   bytes 6..9   height (u32)
//   bytes 10..13 width  (u32)
//   bytes 14..15 channels (u16)
// followed by the row-major payload. The manifest is a JSON document at the
// directory root; every binary file it lists must match its declared shape.
//
// Scene layout: manifest, frame_%04d.pts (f32 HxWx3), frame_%04d.msk
// (u16 HxW), frame_%04d.val (u8 HxW), flow_%04d.flo2 (f32 HxWx2),
// conf_%04d.cnf (f32 HxW), optional gt/ mirror carrying clean geometry,
// dynamic-part masks and scripted per-object poses.

#ifndef PGLUE_DATAIO_HPP
#define PGLUE_DATAIO_HPP

#include "pglue/scene.hpp"

#include <filesystem>
#include <vector>

namespace pglue {

/// Scripted ground truth for a synthetic scene: per-object world pose at
/// every frame plus clean observation-time geometry and dynamic-part masks.
struct GroundTruth {
  struct Object {
    ObjectId id = 0;
    bool is_static = false;
    std::vector<Pose> poses;  // world motion, one per keyframe
  };

  int width = 0;
  int height = 0;
  int keyframe_count = 0;
  std::vector<Object> objects;
  std::vector<PointMap> clean;                     // per keyframe, noise-free
  std::vector<std::vector<std::uint8_t>> dynamic;  // per keyframe, H*W flags

  const Object* object(ObjectId id) const {
    for (const auto& o : objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }
};

/// One source keyframe warped to the reconstruction's target time.
struct WarpedMap {
  int source_frame = 0;
  PointMap points;
  std::vector<ObjectId> provenance;  // per-pixel object id (source labels)
};

/// All observed geometry expressed at one timestamp.
struct SceneReconstruction {
  int target_time = 0;
  std::vector<WarpedMap> warped;  // one per source keyframe
};

/// Loads and fully validates a scene directory. Throws FormatError,
/// ManifestError, ValidationError or EmptySceneError.
SceneData load_scene(const std::filesystem::path& dir);

/// Writes a scene directory; load_scene(save_scene(s)) reproduces the
/// float32 payloads bit-exactly.
void save_scene(const SceneData& scene, const std::filesystem::path& dir);

/// Ground-truth mirror under <scene>/gt.
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);
GroundTruth load_ground_truth(const std::filesystem::path& dir);

/// Reconstruction directories: one pointmap/validity/provenance triple per
/// (source keyframe, target timestamp) pair plus a manifest.
void save_reconstruction(const std::vector<SceneReconstruction>& recons, const std::filesystem::path& dir);
void save_reconstruction(const SceneReconstruction& recon, const std::filesystem::path& dir);
std::vector<SceneReconstruction> load_reconstruction(const std::filesystem::path& dir);

/// Solved pose sets (poses.json): per object the static/singular flags,
/// observed poses, extrapolated poses world and the optional parent.
void save_poses(const SceneData& scene, const std::filesystem::path& dir, const std::string& scene_ref);
/// Applies a saved pose set onto a loaded scene; returns the recorded
/// scene_ref path.
std::string load_poses(SceneData& scene, const std::filesystem::path& dir);

}  // namespace pglue

#endif  // PGLUE_DATAIO_HPP
