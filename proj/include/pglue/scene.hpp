// Scene data model: per-keyframe pointmaps and segment masks, per-pair
// correspondence fields, and object tracks (temporally ordered chains of
// primitives sharing one identity).

#ifndef PGLUE_SCENE_HPP
#define PGLUE_SCENE_HPP

#include "pglue/se3.hpp"
#include "pglue/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pglue {

/// H x W grid of world-frame 3D points with per-pixel validity.
class PointMap {
 public:
  PointMap() = default;
  PointMap(int width, int height)
      : width_(width), height_(height), points_(static_cast<std::size_t>(width) * height, Vec3::Zero()),
        valid_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return points_.size(); }

  bool is_valid(int x, int y) const { return valid_[index(x, y)] != 0; }
  const Vec3& at(int x, int y) const { return points_[index(x, y)]; }

  void set(int x, int y, const Vec3& p) {
    points_[index(x, y)] = p;
    valid_[index(x, y)] = 1;
  }
  void set_invalid(int x, int y) {
    points_[index(x, y)].setZero();
    valid_[index(x, y)] = 0;
  }

  // Raw access for IO.
  const std::vector<Vec3>& points() const { return points_; }
  std::vector<Vec3>& points() { return points_; }
  const std::vector<std::uint8_t>& validity() const { return valid_; }
  std::vector<std::uint8_t>& validity() { return valid_; }

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Vec3> points_;
  std::vector<std::uint8_t> valid_;
};

/// H x W grid of object labels; kUncoveredLabel marks uncovered pixels.
class SegmentMask {
 public:
  SegmentMask() = default;
  SegmentMask(int width, int height)
      : width_(width), height_(height),
        labels_(static_cast<std::size_t>(width) * height, kUncoveredLabel) {}

  int width() const { return width_; }
  int height() const { return height_; }

  ObjectId at(int x, int y) const { return labels_[index(x, y)]; }
  void set(int x, int y, ObjectId id) { labels_[index(x, y)] = id; }

  const std::vector<ObjectId>& labels() const { return labels_; }
  std::vector<ObjectId>& labels() { return labels_; }

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ObjectId> labels_;
};

/// Dense 2D flow from keyframe k to k+1 plus per-pixel confidence in [0,1].
struct CorrespondenceField {
  int width = 0;
  int height = 0;
  int source_frame = 0;
  std::vector<Vec2> flow;            // pixel offsets
  std::vector<double> confidence;    // [0, 1]

  CorrespondenceField() = default;
  CorrespondenceField(int w, int h, int src)
      : width(w), height(h), source_frame(src),
        flow(static_cast<std::size_t>(w) * h, Vec2::Zero()),
        confidence(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// One keyframe: geometry plus segmentation.
struct Keyframe {
  PointMap points;
  SegmentMask mask;
};

/// One object's observation at one keyframe. The pose maps this primitive's
/// points into the coordinate frame of the object's last observed primitive.
struct Primitive {
  ObjectId object_id = 0;
  int keyframe_index = 0;
  int pixel_count = 0;  // labeled, valid pixels
  Pose pose;            // identity at the last observed keyframe (gauge)
};

/// Temporally ordered chain of primitives sharing one identity.
struct ObjectTrack {
  ObjectId object_id = 0;
  std::vector<Primitive> primitives;  // strictly increasing keyframe_index
  bool is_static = false;
  bool singular = false;  // solver gave up; poses left at identity
  std::optional<ObjectId> parent;
  std::map<int, Pose> extrapolated;  // synthetic poses past t_end via parent

  int first_frame() const { return primitives.front().keyframe_index; }
  int last_frame() const { return primitives.back().keyframe_index; }

  const Primitive* primitive_at(int frame) const;
  Primitive* primitive_at(int frame);

  /// Pose at a frame: observed primitive pose, else extrapolated, else none.
  std::optional<Pose> pose_at(int frame) const;
};

/// The full immutable input to the backend.
struct SceneData {
  std::vector<Keyframe> keyframes;
  std::vector<CorrespondenceField> correspondences;  // keyframes.size() - 1
  std::vector<ObjectTrack> objects;
  std::string scene_unit = "arbitrary";

  int width() const { return keyframes.empty() ? 0 : keyframes.front().points.width(); }
  int height() const { return keyframes.empty() ? 0 : keyframes.front().points.height(); }
  int keyframe_count() const { return static_cast<int>(keyframes.size()); }

  const ObjectTrack* track_for(ObjectId id) const;
  ObjectTrack* track_for(ObjectId id);

  /// Median distance of all valid points to their common centroid. Used to
  /// resolve scale-relative solver defaults. Cached after first call.
  double scene_scale() const;

 private:
  mutable double cached_scale_ = -1.0;
};

/// Structured description of one invariant violation.
struct Diagnostic {
  std::string code;
  std::string message;
};

/// Minimum labeled valid pixels for a primitive to be kept; smaller segments
/// produce ill-conditioned normal equations.
inline constexpr int kMinPrimitivePixels = 64;

/// Groups per-keyframe segments into object tracks. One track per distinct
/// label, primitives ordered by time, last observed primitive at identity
/// pose. Primitives owning fewer than min_pixels labeled valid pixels are
/// dropped. Throws EmptySceneError when nothing survives.
std::vector<ObjectTrack> build_objects(const std::vector<Keyframe>& keyframes,
                                       int min_pixels = kMinPrimitivePixels);

/// All (pixel index, world point) pairs a primitive owns: valid pixels whose
/// label equals the primitive's object at its keyframe.
struct PixelPoint {
  int x = 0;
  int y = 0;
  Vec3 point{Vec3::Zero()};
};
std::vector<PixelPoint> primitive_points(const SceneData& scene, const Primitive& prim);

/// Checks every SceneData/ObjectTrack invariant; empty result means valid.
std::vector<Diagnostic> validate_scene(const SceneData& scene);

}  // namespace pglue

#endif  // PGLUE_SCENE_HPP
