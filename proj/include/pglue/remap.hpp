// Time remapping: express every observed pointmap at any requested
// timestamp through composed per-primitive poses.

#ifndef PGLUE_REMAP_HPP
#define PGLUE_REMAP_HPP

#include "pglue/dataio.hpp"
#include "pglue/scene.hpp"

namespace pglue {

/// Relative transform carrying frame p geometry of one object to frame q:
/// inverse(pose at q) * pose at p. Both endpoints must have a pose
/// (observed or extrapolated); throws MissingPoseError otherwise.
Pose warp_transform(const ObjectTrack& obj, int frame_p, int frame_q);

/// Warps every keyframe's valid geometry to timestamp q. Static objects and
/// uncovered pixels map identically; pixels whose object lacks a pose at
/// either endpoint are marked invalid with provenance retained.
SceneReconstruction remap_scene(const SceneData& scene, int target_time, int workers = 1);

}  // namespace pglue

#endif  // PGLUE_REMAP_HPP
