// Reconstruction scoring: Sim(3) alignment anchored on the last keyframe,
// precision/recall/F-score at a distance threshold over dynamic parts, and
// fixed-length chunking for long sequences.

#ifndef PGLUE_EVAL_HPP
#define PGLUE_EVAL_HPP

#include "pglue/dataio.hpp"
#include "pglue/scene.hpp"

#include <string>
#include <vector>

namespace pglue {

struct EvalConfig {
  double threshold = 0.01;  // scene units; 1 cm for metric scenes
  int chunk_length = 150;
  bool dynamic_only = true;
  int workers = 1;
};

/// Closed-form least-squares Sim(3) aligning src onto dst (minimizes
/// sum |s R src_i + t - dst_i|^2). Throws DegenerateConfigurationError for
/// fewer than 3 pairs or collinear sources.
SimTransform umeyama_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

struct ScorePR {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

/// Precision: fraction of predicted points within threshold of some ground
/// truth point. Recall: fraction of ground truth points within threshold of
/// some predicted point. Queries run through a uniform-grid spatial index
/// whose results match brute force exactly.
ScorePR score(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, const EvalConfig& config);

/// Everything needed to score one chunk; kept separate so tests can
/// transform the prediction before scoring.
struct ChunkPrediction {
  int begin_frame = 0;
  int end_frame = 0;  // inclusive; also the remap target
  std::vector<Vec3> cloud;        // warped, dynamic-filtered predicted points
  std::vector<Vec3> anchor_pred;  // last-keyframe pixel pairs for alignment
  std::vector<Vec3> anchor_gt;
  std::vector<Vec3> gt_cloud;     // ground truth carried to the chunk end
};

ChunkPrediction build_chunk_prediction(const SceneData& scene, const GroundTruth& gt, const EvalConfig& config,
                                       int begin_frame, int end_frame);

struct ChunkScore {
  int begin_frame = 0;
  int end_frame = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  SimTransform alignment;
};

ChunkScore score_chunk(const ChunkPrediction& pred, const EvalConfig& config);

struct EvalResult {
  double precision = 0.0;  // unweighted mean over chunks
  double recall = 0.0;
  double fscore = 0.0;
  std::vector<ChunkScore> chunks;
  SimTransform alignment;  // of the final chunk

  std::string to_json(const EvalConfig& config) const;
  std::string to_table() const;
};

/// Full protocol: chunk the sequence, remap each chunk to its last
/// keyframe, align on that keyframe's pointmap pairs, filter to dynamic
/// parts and score the union of warped pointmaps.
EvalResult evaluate_sequence(const SceneData& scene, const GroundTruth& gt, const EvalConfig& config);

}  // namespace pglue

#endif  // PGLUE_EVAL_HPP
