#include "pglue/remap.hpp"

#include "pglue/errors.hpp"
#include "pglue/parallel.hpp"

#include <map>

namespace pglue {

Pose warp_transform(const ObjectTrack& obj, int frame_p, int frame_q) {
  const auto pose_p = obj.pose_at(frame_p);
  if (!pose_p) {
    throw MissingPoseError("object " + std::to_string(obj.object_id) + " has no pose at frame " +
                           std::to_string(frame_p));
  }
  const auto pose_q = obj.pose_at(frame_q);
  if (!pose_q) {
    throw MissingPoseError("object " + std::to_string(obj.object_id) + " has no pose at frame " +
                           std::to_string(frame_q));
  }
  if (frame_p == frame_q) return Pose::identity();  // self-warp, exactly
  return pose_q->inverse() * *pose_p;
}

namespace {

WarpedMap warp_keyframe(const SceneData& scene, int source, int target) {
  const Keyframe& kf = scene.keyframes[source];
  const int w = kf.points.width();
  const int h = kf.points.height();

  WarpedMap out;
  out.source_frame = source;
  out.points = PointMap(w, h);
  out.provenance.assign(kf.mask.labels().begin(), kf.mask.labels().end());

  if (source == target) {
    out.points = kf.points;  // identity warp of own frame, bit-exact
    return out;
  }

  // Per-label warp, resolved once per keyframe. nullopt = copy unchanged
  // (static / uncovered); missing entry = no pose, pixel dropped.
  std::map<ObjectId, std::optional<Pose>> warp_for;
  for (const auto& track : scene.objects) {
    if (track.is_static) {
      warp_for[track.object_id] = std::nullopt;
      continue;
    }
    if (track.primitive_at(source) && track.pose_at(target)) {
      warp_for[track.object_id] = warp_transform(track, source, target);
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!kf.points.is_valid(x, y)) {
        out.points.set_invalid(x, y);
        continue;
      }
      const ObjectId label = kf.mask.at(x, y);
      if (label == kUncoveredLabel) {
        out.points.set(x, y, kf.points.at(x, y));  // uncovered pixels are static
        continue;
      }
      const auto it = warp_for.find(label);
      if (it == warp_for.end()) {
        out.points.set_invalid(x, y);  // no pose at an endpoint; keep provenance
        continue;
      }
      if (!it->second) {
        out.points.set(x, y, kf.points.at(x, y));
      } else {
        out.points.set(x, y, it->second->act(kf.points.at(x, y)));
      }
    }
  }
  return out;
}

}  // namespace

SceneReconstruction remap_scene(const SceneData& scene, int target_time, int workers) {
  if (target_time < 0 || target_time >= scene.keyframe_count()) {
    throw MissingPoseError("target time " + std::to_string(target_time) + " outside keyframe range");
  }
  SceneReconstruction recon;
  recon.target_time = target_time;
  recon.warped.resize(scene.keyframes.size());
  parallel_chunks(scene.keyframes.size(), workers, [&](std::size_t k) {
    recon.warped[k] = warp_keyframe(scene, static_cast<int>(k), target_time);
  });
  return recon;
}

}  // namespace pglue
