#include "pglue/motion_seg.hpp"

#include "pglue/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pglue {

OrientedBoundingBox fit_obb(const std::vector<Vec3>& points) {
  OrientedBoundingBox box;
  if (points.empty()) {
    box.half_extents = Vec3::Constant(1e-9);
    return box;
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  box.center = centroid;

  bool degenerate = true;
  for (const auto& p : points) {
    if ((p - points.front()).norm() > 0.0) {
      degenerate = false;
      break;
    }
  }
  if (degenerate) {
    box.half_extents = Vec3::Constant(1e-9);
    return box;
  }

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes;  // eigenvalues come ascending; we want descending spread
  axes.col(0) = eig.eigenvectors().col(2);
  axes.col(1) = eig.eigenvectors().col(1);
  axes.col(2) = eig.eigenvectors().col(0);
  if (axes.determinant() < 0.0) axes.col(2) = -axes.col(2);
  box.axes = axes;

  Vec3 extents = Vec3::Zero();
  for (const auto& p : points) {
    const Vec3 local = axes.transpose() * (p - centroid);
    extents = extents.cwiseMax(local.cwiseAbs());
  }
  box.half_extents = extents.cwiseMax(1e-9);
  return box;
}

bool in_contact(const OrientedBoundingBox& a, const OrientedBoundingBox& b, double alpha) {
  const Vec3 ea = alpha * a.half_extents;
  const Vec3 eb = alpha * b.half_extents;
  const Vec3 d = b.center - a.center;

  // Gottschalk's separating-axis test: face axes of both boxes plus the
  // nine edge cross products; near-parallel cross products are skipped.
  std::vector<Vec3> axes;
  axes.reserve(15);
  for (int i = 0; i < 3; ++i) axes.push_back(a.axes.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(b.axes.col(i));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 cross = a.axes.col(i).cross(b.axes.col(j));
      if (cross.norm() > 1e-12) axes.push_back(cross.normalized());
    }
  }

  for (const auto& axis : axes) {
    const double ra = ea.x() * std::abs(axis.dot(a.axes.col(0))) + ea.y() * std::abs(axis.dot(a.axes.col(1))) +
                      ea.z() * std::abs(axis.dot(a.axes.col(2)));
    const double rb = eb.x() * std::abs(axis.dot(b.axes.col(0))) + eb.y() * std::abs(axis.dot(b.axes.col(1))) +
                      eb.z() * std::abs(axis.dot(b.axes.col(2)));
    if (std::abs(axis.dot(d)) > ra + rb) return false;
  }
  return true;
}

double velocity_distance(const Pose& v, const Pose& w, const MotionSegConfig& config, double scene_scale) {
  const Twist tau = log_se3(v.inverse() * w);
  const double st = config.resolved_sigma_tau(scene_scale);
  const double sp = config.sigma_psi;
  return std::sqrt(tau.rho.squaredNorm() / (st * st) + tau.phi.squaredNorm() / (sp * sp));
}

std::map<int, Pose> velocity_samples(const ObjectTrack& track) {
  std::map<int, Pose> out;
  for (std::size_t i = 1; i < track.primitives.size(); ++i) {
    const Primitive& prev = track.primitives[i - 1];
    const Primitive& cur = track.primitives[i];
    if (cur.keyframe_index == prev.keyframe_index + 1) {
      out[cur.keyframe_index] = cur.pose.inverse() * prev.pose;
    }
  }
  return out;
}

namespace {

int last_co_observed(const ObjectTrack& a, const ObjectTrack& b) {
  int best = -1;
  for (const auto& pa : a.primitives) {
    if (b.primitive_at(pa.keyframe_index)) best = std::max(best, pa.keyframe_index);
  }
  return best;
}

}  // namespace

std::map<ObjectId, ObjectId> assign_parents(SceneData& scene, const MotionSegConfig& config) {
  std::map<ObjectId, ObjectId> out;
  const int last_frame = scene.keyframe_count() - 1;
  const double scale = scene.scene_scale();
  const std::size_t count = scene.objects.size();

  std::vector<char> needs_parent(count, 0);
  bool any = false;
  for (std::size_t i = 0; i < count; ++i) {
    const ObjectTrack& track = scene.objects[i];
    if (!track.is_static && track.last_frame() < last_frame) {
      needs_parent[i] = 1;
      any = true;
    }
  }
  if (!any) return out;

  // Contact graph, one edge per pair at its last co-observed timestamp.
  std::vector<OrientedBoundingBox> box_cache;
  std::vector<std::pair<ObjectId, int>> box_keys;
  auto obb_at = [&](std::size_t oi, int frame) {
    const ObjectTrack& track = scene.objects[oi];
    for (std::size_t c = 0; c < box_keys.size(); ++c) {
      if (box_keys[c].first == track.object_id && box_keys[c].second == frame) return box_cache[c];
    }
    const Primitive* prim = track.primitive_at(frame);
    std::vector<Vec3> pts;
    if (prim) {
      for (const auto& pp : primitive_points(scene, *prim)) pts.push_back(pp.point);
    }
    box_keys.emplace_back(track.object_id, frame);
    box_cache.push_back(fit_obb(pts));
    return box_cache.back();
  };

  std::vector<std::vector<std::size_t>> adjacency(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      const int frame = last_co_observed(scene.objects[i], scene.objects[j]);
      if (frame < 0) continue;
      if (in_contact(obb_at(i, frame), obb_at(j, frame), config.alpha)) {
        adjacency[i].push_back(j);
        adjacency[j].push_back(i);
      }
    }
  }

  std::vector<std::map<int, Pose>> velocities(count);
  for (std::size_t i = 0; i < count; ++i) velocities[i] = velocity_samples(scene.objects[i]);

  for (std::size_t ci = 0; ci < count; ++ci) {
    if (!needs_parent[ci]) continue;
    ObjectTrack& child = scene.objects[ci];

    // Transitive closure over the contact graph.
    std::vector<char> reached(count, 0);
    reached[ci] = 1;
    std::vector<std::size_t> stack{ci};
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for (std::size_t next : adjacency[cur]) {
        if (!reached[next]) {
          reached[next] = 1;
          stack.push_back(next);
        }
      }
    }

    double best_distance = std::numeric_limits<double>::infinity();
    const ObjectTrack* best = nullptr;
    for (std::size_t pi = 0; pi < count; ++pi) {
      if (pi == ci || !reached[pi]) continue;
      const ObjectTrack& candidate = scene.objects[pi];
      if (candidate.last_frame() != last_frame) continue;  // parent must stay observed

      double sum = 0.0;
      int shared = 0;
      for (const auto& [frame, vel] : velocities[ci]) {
        const auto it = velocities[pi].find(frame);
        if (it == velocities[pi].end()) continue;
        sum += velocity_distance(vel, it->second, config, scale);
        ++shared;
      }
      if (shared == 0) continue;
      const double mean = sum / shared;
      if (mean >= config.distance_threshold) continue;
      if (mean < best_distance ||
          (mean == best_distance && best && candidate.object_id < best->object_id)) {
        best_distance = mean;
        best = &candidate;
      }
    }
    if (best) {
      child.parent = best->object_id;
      out[child.object_id] = best->object_id;
    }
  }
  return out;
}

Pose extrapolate_pose(const ObjectTrack& obj, const ObjectTrack& parent, int frame) {
  const auto at_end = parent.pose_at(obj.last_frame());
  if (!at_end) {
    throw MissingPoseError("parent " + std::to_string(parent.object_id) + " has no pose at frame " +
                           std::to_string(obj.last_frame()));
  }
  const auto at_frame = parent.pose_at(frame);
  if (!at_frame) {
    throw MissingPoseError("parent " + std::to_string(parent.object_id) + " has no pose at frame " +
                           std::to_string(frame));
  }
  return at_end->inverse() * *at_frame;
}

void extrapolate_tracks(SceneData& scene) {
  const int last_frame = scene.keyframe_count() - 1;
  for (auto& track : scene.objects) {
    if (!track.parent) continue;
    const ObjectTrack* parent = scene.track_for(*track.parent);
    if (!parent) continue;
    track.extrapolated.clear();
    for (int t = track.last_frame() + 1; t <= last_frame; ++t) {
      if (!parent->pose_at(t) || !parent->pose_at(track.last_frame())) continue;
      track.extrapolated[t] = extrapolate_pose(track, *parent, t);
    }
  }
}

}  // namespace pglue
