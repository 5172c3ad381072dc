#include "pglue/scene.hpp"

#include "pglue/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace pglue {

const Primitive* ObjectTrack::primitive_at(int frame) const {
  auto it = std::lower_bound(primitives.begin(), primitives.end(), frame,
                             [](const Primitive& p, int f) { return p.keyframe_index < f; });
  if (it != primitives.end() && it->keyframe_index == frame) return &*it;
  return nullptr;
}

Primitive* ObjectTrack::primitive_at(int frame) {
  return const_cast<Primitive*>(static_cast<const ObjectTrack*>(this)->primitive_at(frame));
}

std::optional<Pose> ObjectTrack::pose_at(int frame) const {
  if (const Primitive* p = primitive_at(frame)) return p->pose;
  auto it = extrapolated.find(frame);
  if (it != extrapolated.end()) return it->second;
  return std::nullopt;
}

const ObjectTrack* SceneData::track_for(ObjectId id) const {
  for (const auto& t : objects) {
    if (t.object_id == id) return &t;
  }
  return nullptr;
}

ObjectTrack* SceneData::track_for(ObjectId id) {
  return const_cast<ObjectTrack*>(static_cast<const SceneData*>(this)->track_for(id));
}

double SceneData::scene_scale() const {
  if (cached_scale_ >= 0.0) return cached_scale_;
  Vec3 centroid = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& kf : keyframes) {
    const auto& valid = kf.points.validity();
    const auto& pts = kf.points.points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (valid[i]) {
        centroid += pts[i];
        ++n;
      }
    }
  }
  if (n == 0) {
    cached_scale_ = 1.0;
    return cached_scale_;
  }
  centroid /= static_cast<double>(n);
  std::vector<double> dist;
  dist.reserve(n);
  for (const auto& kf : keyframes) {
    const auto& valid = kf.points.validity();
    const auto& pts = kf.points.points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (valid[i]) dist.push_back((pts[i] - centroid).norm());
    }
  }
  auto mid = dist.begin() + dist.size() / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  cached_scale_ = *mid;
  if (cached_scale_ <= 0.0) cached_scale_ = 1.0;
  return cached_scale_;
}

std::vector<ObjectTrack> build_objects(const std::vector<Keyframe>& keyframes, int min_pixels) {
  std::map<ObjectId, ObjectTrack> tracks;
  for (int k = 0; k < static_cast<int>(keyframes.size()); ++k) {
    const auto& kf = keyframes[k];
    std::map<ObjectId, int> counts;
    for (int y = 0; y < kf.mask.height(); ++y) {
      for (int x = 0; x < kf.mask.width(); ++x) {
        const ObjectId id = kf.mask.at(x, y);
        if (id == kUncoveredLabel) continue;
        if (!kf.points.is_valid(x, y)) continue;
        ++counts[id];
      }
    }
    for (const auto& [id, count] : counts) {
      if (count < min_pixels) continue;
      ObjectTrack& track = tracks.try_emplace(id).first->second;
      track.object_id = id;
      Primitive prim;
      prim.object_id = id;
      prim.keyframe_index = k;
      prim.pixel_count = count;
      track.primitives.push_back(prim);
    }
  }
  if (tracks.empty()) {
    throw EmptySceneError("no object with at least " + std::to_string(min_pixels) +
                          " labeled valid pixels in any keyframe");
  }
  std::vector<ObjectTrack> out;
  out.reserve(tracks.size());
  for (auto& [id, track] : tracks) {
    out.push_back(std::move(track));  // ascending id; primitives already in frame order
  }
  return out;
}

std::vector<PixelPoint> primitive_points(const SceneData& scene, const Primitive& prim) {
  std::vector<PixelPoint> out;
  const Keyframe& kf = scene.keyframes.at(prim.keyframe_index);
  for (int y = 0; y < kf.mask.height(); ++y) {
    for (int x = 0; x < kf.mask.width(); ++x) {
      if (kf.mask.at(x, y) != prim.object_id) continue;
      if (!kf.points.is_valid(x, y)) continue;
      out.push_back({x, y, kf.points.at(x, y)});
    }
  }
  return out;
}

namespace {

void check_track(const SceneData& scene, const ObjectTrack& track, std::vector<Diagnostic>& out) {
  std::ostringstream tag;
  tag << "object " << track.object_id;
  if (track.primitives.empty()) {
    out.push_back({"empty_track", tag.str() + ": track has no primitives"});
    return;
  }
  for (std::size_t i = 0; i + 1 < track.primitives.size(); ++i) {
    if (track.primitives[i].keyframe_index >= track.primitives[i + 1].keyframe_index) {
      std::ostringstream msg;
      msg << tag.str() << ": keyframe indices not strictly increasing at position " << i
          << " (" << track.primitives[i].keyframe_index << " >= "
          << track.primitives[i + 1].keyframe_index << ")";
      out.push_back({"track_order", msg.str()});
    }
  }
  for (const auto& prim : track.primitives) {
    if (prim.object_id != track.object_id) {
      out.push_back({"track_identity", tag.str() + ": primitive carries a different object id"});
    }
    if (prim.keyframe_index < 0 || prim.keyframe_index >= scene.keyframe_count()) {
      out.push_back({"track_range", tag.str() + ": primitive keyframe out of range"});
      continue;
    }
    int count = 0;
    const Keyframe& kf = scene.keyframes[prim.keyframe_index];
    for (int y = 0; y < kf.mask.height(); ++y) {
      for (int x = 0; x < kf.mask.width(); ++x) {
        if (kf.mask.at(x, y) == track.object_id && kf.points.is_valid(x, y)) ++count;
      }
    }
    if (count != prim.pixel_count) {
      std::ostringstream msg;
      msg << tag.str() << ": pixel_count " << prim.pixel_count << " at frame "
          << prim.keyframe_index << " but mask owns " << count << " valid pixels";
      out.push_back({"pixel_count", msg.str()});
    }
  }
  if (!track.primitives.back().pose.is_identity(1e-12)) {
    out.push_back({"gauge", tag.str() + ": last observed primitive pose is not identity"});
  }
  if (track.is_static) {
    for (const auto& prim : track.primitives) {
      if (!prim.pose.is_identity(1e-12)) {
        out.push_back({"static_pose", tag.str() + ": static track with non-identity pose"});
        break;
      }
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_scene(const SceneData& scene) {
  std::vector<Diagnostic> out;
  if (scene.keyframes.empty()) {
    out.push_back({"no_keyframes", "scene has no keyframes"});
    return out;
  }
  const int w = scene.width();
  const int h = scene.height();
  for (int k = 0; k < scene.keyframe_count(); ++k) {
    const Keyframe& kf = scene.keyframes[k];
    std::ostringstream tag;
    tag << "keyframe " << k;
    if (kf.points.width() != w || kf.points.height() != h || kf.mask.width() != w || kf.mask.height() != h) {
      out.push_back({"resolution", tag.str() + ": resolution differs from keyframe 0"});
      continue;
    }
    const auto& pts = kf.points.points();
    const auto& valid = kf.points.validity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (valid[i] && !pts[i].allFinite()) {
        std::ostringstream msg;
        msg << tag.str() << ": non-finite point at valid pixel (" << i % w << ", " << i / w << ")";
        out.push_back({"nonfinite_point", msg.str()});
        break;  // one per frame is enough to fail
      }
    }
  }

  if (scene.correspondences.size() + 1 != scene.keyframes.size()) {
    for (std::size_t k = 0; k + 1 < scene.keyframes.size(); ++k) {
      const bool present = std::any_of(scene.correspondences.begin(), scene.correspondences.end(),
                                       [&](const CorrespondenceField& f) {
                                         return f.source_frame == static_cast<int>(k);
                                       });
      if (!present) {
        std::ostringstream msg;
        msg << "missing correspondence field for pair (" << k << ", " << k + 1 << ")";
        out.push_back({"correspondence_count", msg.str()});
      }
    }
    if (scene.correspondences.size() + 1 > scene.keyframes.size()) {
      out.push_back({"correspondence_count", "more correspondence fields than keyframe pairs"});
    }
  } else {
    for (std::size_t k = 0; k < scene.correspondences.size(); ++k) {
      const auto& f = scene.correspondences[k];
      if (f.source_frame != static_cast<int>(k)) {
        std::ostringstream msg;
        msg << "correspondence field " << k << " claims source frame " << f.source_frame;
        out.push_back({"correspondence_order", msg.str()});
      }
      if (f.width != w || f.height != h) {
        std::ostringstream msg;
        msg << "correspondence field " << k << ": resolution differs from keyframes";
        out.push_back({"resolution", msg.str()});
      }
      for (double c : f.confidence) {
        if (!(c >= 0.0 && c <= 1.0)) {
          std::ostringstream msg;
          msg << "correspondence field " << k << ": confidence outside [0, 1]";
          out.push_back({"confidence_range", msg.str()});
          break;
        }
      }
    }
  }

  // Every label referenced by a mask must appear in exactly one track.
  std::map<ObjectId, int> track_count;
  for (const auto& track : scene.objects) ++track_count[track.object_id];
  for (const auto& [id, count] : track_count) {
    if (count > 1) {
      std::ostringstream msg;
      msg << "object " << id << " appears in " << count << " tracks";
      out.push_back({"duplicate_track", msg.str()});
    }
  }
  std::map<ObjectId, int> labeled;  // label -> max per-frame valid pixel count
  for (const auto& kf : scene.keyframes) {
    std::map<ObjectId, int> counts;
    for (int y = 0; y < kf.mask.height(); ++y) {
      for (int x = 0; x < kf.mask.width(); ++x) {
        const ObjectId id = kf.mask.at(x, y);
        if (id == kUncoveredLabel) continue;
        if (!kf.points.is_valid(x, y)) continue;
        ++counts[id];
      }
    }
    for (const auto& [id, c] : counts) labeled[id] = std::max(labeled[id], c);
  }
  for (const auto& [id, count] : labeled) {
    if (count >= kMinPrimitivePixels && track_count.find(id) == track_count.end()) {
      std::ostringstream msg;
      msg << "label " << id << " referenced by masks but not covered by any track";
      out.push_back({"unreferenced_label", msg.str()});
    }
  }

  for (const auto& track : scene.objects) check_track(scene, track, out);
  return out;
}

}  // namespace pglue
