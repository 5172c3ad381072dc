// Object permanence machinery: oriented bounding box contact, gauge-free
// velocity clustering, parent assignment over the transitive contact graph
// and motion extrapolation for objects that vanish before the sequence ends.

#ifndef PGLUE_MOTION_SEG_HPP
#define PGLUE_MOTION_SEG_HPP

#include "pglue/scene.hpp"

#include <map>
#include <optional>

namespace pglue {

struct OrientedBoundingBox {
  Vec3 center{Vec3::Zero()};
  Mat3 axes{Mat3::Identity()};      // columns, descending spread, right-handed
  Vec3 half_extents{Vec3::Zero()};  // positive
};

struct MotionSegConfig {
  double alpha = 1.1;                    // extent inflation for contact
  std::optional<double> sigma_tau;       // default 0.02 * scene_scale
  double sigma_psi = 0.1;                // radians
  double distance_threshold = 3.0;       // Mahalanobis gate

  double resolved_sigma_tau(double scene_scale) const {
    return sigma_tau ? *sigma_tau : 0.02 * scene_scale;
  }
};

/// Covariance-fitted box: axes are covariance eigenvectors, extents the
/// maximum absolute coordinate about the centroid, so every input point is
/// contained. Fewer than two distinct points yield a point-box with epsilon
/// extents.
OrientedBoundingBox fit_obb(const std::vector<Vec3>& points);

/// Separating-axis test over the 15 candidate axes with half extents scaled
/// by alpha.
bool in_contact(const OrientedBoundingBox& a, const OrientedBoundingBox& b, double alpha);

/// Mahalanobis distance between two velocities: with tau = log(V^-1 W),
/// sqrt(|tau_rho|^2 / sigma_tau^2 + |tau_phi|^2 / sigma_psi^2).
double velocity_distance(const Pose& v, const Pose& w, const MotionSegConfig& config, double scene_scale);

/// Velocity samples of a track: pose(t)^-1 * pose(t-1) at every frame t
/// where both t and t-1 are observed. Invariant under left gauge change of
/// the pose chain.
std::map<int, Pose> velocity_samples(const ObjectTrack& track);

/// For every dynamic object that becomes unobserved before the final
/// keyframe, picks a parent among objects reachable through the contact
/// graph (edges evaluated at each pair's last co-observed timestamp) that
/// stay observed to the end: the one with minimal mean velocity distance
/// over co-observed samples, gated by distance_threshold, ties broken by
/// lowest id. Writes track.parent; the relation is a forest.
std::map<ObjectId, ObjectId> assign_parents(SceneData& scene, const MotionSegConfig& config);

/// Synthetic pose for an unobserved frame t > obj t_end: the object's warp
/// t_end -> t is inherited from the parent, i.e. the returned pose is
/// inverse(parent pose at t_end) * parent pose at t. Throws
/// MissingPoseError when the parent lacks either endpoint.
Pose extrapolate_pose(const ObjectTrack& obj, const ObjectTrack& parent, int frame);

/// Fills extrapolated poses for all parented tracks up to the last
/// keyframe; frames where the parent has no pose are skipped.
void extrapolate_tracks(SceneData& scene);

}  // namespace pglue

#endif  // PGLUE_MOTION_SEG_HPP
