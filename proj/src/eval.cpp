#include "pglue/eval.hpp"

#include "pglue/errors.hpp"
#include "pglue/parallel.hpp"
#include "pglue/remap.hpp"

#include <Eigen/SVD>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace pglue {

using json = nlohmann::json;

SimTransform umeyama_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size()) throw DegenerateConfigurationError("alignment lists differ in length");
  const std::size_t n = src.size();
  if (n < 3) throw DegenerateConfigurationError("alignment needs at least 3 pairs");

  Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double sigma2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ds = src[i] - mu_src;
    cov += (dst[i] - mu_dst) * ds.transpose();
    sigma2 += ds.squaredNorm();
  }
  cov /= static_cast<double>(n);
  sigma2 /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (d(1) <= 1e-12 * std::max(d(0), 1e-300)) {
    throw DegenerateConfigurationError("alignment sources are collinear or coincident");
  }

  Vec3 sign = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;

  SimTransform out;
  out.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.scale = d.dot(sign) / sigma2;
  out.translation = mu_dst - out.scale * (out.rotation * mu_src);
  return out;
}

namespace {

/// Uniform-grid index answering "is any point within r of the query". Cell
/// size equals the query radius, so scanning the 27 neighbouring cells is
/// exhaustive; membership tests use the same squared-distance comparison a
/// brute-force scan would.
class RadiusGrid {
 public:
  RadiusGrid(const std::vector<Vec3>& points, double radius) : points_(points), radius_(radius) {
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
  }

  bool any_within(const Vec3& q) const {
    const double r2 = radius_ * radius_;
    const std::int64_t cx = coord(q.x());
    const std::int64_t cy = coord(q.y());
    const std::int64_t cz = coord(q.z());
    for (std::int64_t dz = -1; dz <= 1; ++dz) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (const std::size_t i : it->second) {
            if ((points_[i] - q).squaredNorm() <= r2) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / radius_)); }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    const std::uint64_t m = (1ull << 21) - 1;
    return ((static_cast<std::uint64_t>(x) & m) << 42) | ((static_cast<std::uint64_t>(y) & m) << 21) |
           (static_cast<std::uint64_t>(z) & m);
  }
  std::uint64_t key(const Vec3& p) const { return pack(coord(p.x()), coord(p.y()), coord(p.z())); }

  const std::vector<Vec3>& points_;
  double radius_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

std::size_t count_covered(const std::vector<Vec3>& queries, const RadiusGrid& grid, int workers) {
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = chunk_count_for(queries.size(), kChunk);
  std::vector<std::size_t> partial(chunks, 0);
  parallel_chunks(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(queries.size(), begin + kChunk);
    std::size_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (grid.any_within(queries[i])) ++hits;
    }
    partial[c] = hits;
  });
  std::size_t total = 0;
  for (const std::size_t h : partial) total += h;
  return total;
}

double fscore_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

ScorePR score(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, const EvalConfig& config) {
  if (pred.empty() || gt.empty()) throw EmptyCloudError("cannot score an empty point cloud");
  ScorePR out;
  {
    const RadiusGrid gt_grid(gt, config.threshold);
    out.precision = static_cast<double>(count_covered(pred, gt_grid, config.workers)) / pred.size();
  }
  {
    const RadiusGrid pred_grid(pred, config.threshold);
    out.recall = static_cast<double>(count_covered(gt, pred_grid, config.workers)) / gt.size();
  }
  out.fscore = fscore_of(out.precision, out.recall);
  return out;
}

ChunkPrediction build_chunk_prediction(const SceneData& scene, const GroundTruth& gt, const EvalConfig& config,
                                       int begin_frame, int end_frame) {
  ChunkPrediction out;
  out.begin_frame = begin_frame;
  out.end_frame = end_frame;

  const SceneReconstruction recon = remap_scene(scene, end_frame, config.workers);
  const int w = scene.width();
  const int h = scene.height();

  for (int k = begin_frame; k <= end_frame; ++k) {
    const WarpedMap& wm = recon.warped[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!wm.points.is_valid(x, y)) continue;
        if (config.dynamic_only && !gt.dynamic[k][wm.points.index(x, y)]) continue;
        out.cloud.push_back(wm.points.at(x, y));
      }
    }
  }

  // Alignment pairs come from the last keyframe's pointmaps alone.
  const WarpedMap& anchor = recon.warped[end_frame];
  const PointMap& gt_anchor = gt.clean[end_frame];
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!anchor.points.is_valid(x, y) || !gt_anchor.is_valid(x, y)) continue;
      out.anchor_pred.push_back(anchor.points.at(x, y));
      out.anchor_gt.push_back(gt_anchor.at(x, y));
    }
  }

  // Ground-truth side: every frame's clean geometry carried to the chunk
  // end by the scripted motion of the pixel's object (labels are shared
  // with the observed scene; the gt mirror is pixel-aligned).
  for (int k = begin_frame; k <= end_frame; ++k) {
    const PointMap& clean = gt.clean[k];
    const SegmentMask& mask = scene.keyframes[k].mask;
    std::map<ObjectId, Pose> warp_for;
    for (const auto& o : gt.objects) {
      warp_for[o.id] = o.poses[end_frame] * o.poses[k].inverse();
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = clean.index(x, y);
        if (!clean.is_valid(x, y)) continue;
        if (config.dynamic_only && !gt.dynamic[k][i]) continue;
        const ObjectId label = mask.at(x, y);
        const auto it = warp_for.find(label);
        if (it == warp_for.end()) {
          out.gt_cloud.push_back(clean.at(x, y));  // uncovered pixels are static
        } else {
          out.gt_cloud.push_back(it->second.act(clean.at(x, y)));
        }
      }
    }
  }
  return out;
}

ChunkScore score_chunk(const ChunkPrediction& pred, const EvalConfig& config) {
  ChunkScore out;
  out.begin_frame = pred.begin_frame;
  out.end_frame = pred.end_frame;
  out.alignment = umeyama_align(pred.anchor_pred, pred.anchor_gt);

  std::vector<Vec3> aligned;
  aligned.reserve(pred.cloud.size());
  for (const auto& p : pred.cloud) aligned.push_back(out.alignment.act(p));

  const ScorePR pr = score(aligned, pred.gt_cloud, config);
  out.precision = pr.precision;
  out.recall = pr.recall;
  out.fscore = pr.fscore;
  return out;
}

EvalResult evaluate_sequence(const SceneData& scene, const GroundTruth& gt, const EvalConfig& config) {
  EvalResult out;
  const int n = scene.keyframe_count();
  for (int begin = 0; begin < n; begin += config.chunk_length) {
    const int end = std::min(n - 1, begin + config.chunk_length - 1);
    const ChunkPrediction pred = build_chunk_prediction(scene, gt, config, begin, end);
    out.chunks.push_back(score_chunk(pred, config));
    if (end == n - 1) break;
  }
  for (const auto& c : out.chunks) {
    out.precision += c.precision;
    out.recall += c.recall;
    out.fscore += c.fscore;
  }
  const double count = static_cast<double>(out.chunks.size());
  out.precision /= count;
  out.recall /= count;
  out.fscore /= count;
  out.alignment = out.chunks.back().alignment;
  return out;
}

std::string EvalResult::to_json(const EvalConfig& config) const {
  json j;
  j["threshold"] = config.threshold;
  j["chunk_length"] = config.chunk_length;
  j["dynamic_only"] = config.dynamic_only;
  j["precision"] = precision;
  j["recall"] = recall;
  j["fscore"] = fscore;
  json chunk_list = json::array();
  for (const auto& c : chunks) {
    json jc;
    jc["begin"] = c.begin_frame;
    jc["end"] = c.end_frame;
    jc["precision"] = c.precision;
    jc["recall"] = c.recall;
    jc["fscore"] = c.fscore;
    jc["alignment_scale"] = c.alignment.scale;
    chunk_list.push_back(jc);
  }
  j["chunks"] = chunk_list;
  return j.dump(2) + "\n";
}

std::string EvalResult::to_table() const {
  std::ostringstream out;
  out << "chunk\tfscore\tprecision\trecall\n";
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out << i << "\t" << chunks[i].fscore << "\t" << chunks[i].precision << "\t" << chunks[i].recall << "\n";
  }
  out << "avg\t" << fscore << "\t" << precision << "\t" << recall << "\n";
  return out.str();
}

}  // namespace pglue
