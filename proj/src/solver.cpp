#include "pglue/solver.hpp"

#include "pglue/errors.hpp"
#include "pglue/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>

namespace pglue {

using json = nlohmann::json;

namespace {

constexpr std::size_t kChunkPixels = 8192;

std::optional<Vec3> sample_points_bilinear(const PointMap& pm, double qx, double qy) {
  const int w = pm.width();
  const int h = pm.height();
  if (!(qx >= 0.0 && qx <= w - 1.0 && qy >= 0.0 && qy <= h - 1.0)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(qx));
  const int y0 = static_cast<int>(std::floor(qy));
  const double fx = qx - x0;
  const double fy = qy - y0;
  const double weights[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  const int offsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  Vec3 acc = Vec3::Zero();
  for (int c = 0; c < 4; ++c) {
    if (weights[c] == 0.0) continue;
    const int x = x0 + offsets[c][0];
    const int y = y0 + offsets[c][1];
    if (!pm.is_valid(x, y)) return std::nullopt;  // interpolation across invalid points
    acc += weights[c] * pm.at(x, y);
  }
  return acc;
}

std::optional<Vec2> sample_flow_bilinear(const CorrespondenceField& f, double qx, double qy) {
  if (!(qx >= 0.0 && qx <= f.width - 1.0 && qy >= 0.0 && qy <= f.height - 1.0)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(qx));
  const int y0 = static_cast<int>(std::floor(qy));
  const double fx = qx - x0;
  const double fy = qy - y0;
  const double weights[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  const int offsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  Vec2 flow = Vec2::Zero();
  for (int c = 0; c < 4; ++c) {
    if (weights[c] == 0.0) continue;
    flow += weights[c] * f.flow[f.index(x0 + offsets[c][0], y0 + offsets[c][1])];
  }
  return flow;
}

double sample_confidence_bilinear(const CorrespondenceField& f, double qx, double qy) {
  const int x0 = static_cast<int>(std::floor(qx));
  const int y0 = static_cast<int>(std::floor(qy));
  const double fx = qx - x0;
  const double fy = qy - y0;
  const double weights[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  const int offsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  double conf = 0.0;
  for (int c = 0; c < 4; ++c) {
    if (weights[c] == 0.0) continue;
    conf += weights[c] * f.confidence[f.index(x0 + offsets[c][0], y0 + offsets[c][1])];
  }
  return conf;
}

ObjectId sample_label_nearest(const SegmentMask& mask, double qx, double qy) {
  const int x = static_cast<int>(std::lround(qx));
  const int y = static_cast<int>(std::lround(qy));
  return mask.at(x, y);
}

struct WarpSample {
  Vec3 point;
  ObjectId label;
  double weight;
};

/// Follows flow fields from frame i to frame j (j > i), multiplying step
/// confidences, then samples geometry and label at the final position.
std::optional<WarpSample> warp_pixel(const SceneData& scene, int frame_i, int frame_j, int x, int y) {
  double qx = x;
  double qy = y;
  double conf = 1.0;
  for (int t = frame_i; t < frame_j; ++t) {
    const CorrespondenceField& f = scene.correspondences[t];
    if (t == frame_i) {
      conf *= f.confidence[f.index(x, y)];
      qx += f.flow[f.index(x, y)].x();
      qy += f.flow[f.index(x, y)].y();
    } else {
      const auto flow = sample_flow_bilinear(f, qx, qy);
      if (!flow) return std::nullopt;
      conf *= sample_confidence_bilinear(f, qx, qy);
      qx += flow->x();
      qy += flow->y();
    }
  }
  const Keyframe& target = scene.keyframes[frame_j];
  if (!(qx >= 0.0 && qx <= target.points.width() - 1.0 && qy >= 0.0 && qy <= target.points.height() - 1.0)) {
    return std::nullopt;
  }
  const auto point = sample_points_bilinear(target.points, qx, qy);
  if (!point) return std::nullopt;
  return WarpSample{*point, sample_label_nearest(target.mask, qx, qy), conf};
}

double huber_rho(double a, double delta) {
  return a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
}

}  // namespace

WarpedTargets warp_targets(const SceneData& scene, int pair_index) {
  if (pair_index < 0 || pair_index >= static_cast<int>(scene.correspondences.size())) {
    throw MissingPoseError("no correspondence field for pair " + std::to_string(pair_index));
  }
  const int w = scene.width();
  const int h = scene.height();
  WarpedTargets out;
  out.source_frame = pair_index;
  out.target_frame = pair_index + 1;
  out.points.assign(static_cast<std::size_t>(w) * h, Vec3::Zero());
  out.labels.assign(static_cast<std::size_t>(w) * h, kUncoveredLabel);
  out.weights.assign(static_cast<std::size_t>(w) * h, 0.0);

  const SegmentMask& source_mask = scene.keyframes[pair_index].mask;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const auto sample = warp_pixel(scene, pair_index, pair_index + 1, x, y);
      if (!sample) continue;
      out.points[i] = sample->point;
      out.labels[i] = sample->label;
      out.weights[i] = sample->label == source_mask.at(x, y) ? sample->weight : 0.0;
    }
  }
  return out;
}

ResidualTerm build_residual_term(const SceneData& scene, const ObjectTrack& track, int frame_i, int frame_j) {
  ResidualTerm term;
  term.object_id = track.object_id;
  term.frame_i = frame_i;
  term.frame_j = frame_j;
  const Keyframe& src = scene.keyframes.at(frame_i);
  for (int y = 0; y < src.mask.height(); ++y) {
    for (int x = 0; x < src.mask.width(); ++x) {
      if (src.mask.at(x, y) != track.object_id) continue;
      if (!src.points.is_valid(x, y)) continue;
      const auto sample = warp_pixel(scene, frame_i, frame_j, x, y);
      if (!sample || sample->weight <= 0.0) continue;
      if (sample->label != track.object_id) continue;
      term.source_points.push_back(src.points.at(x, y));
      term.target_points.push_back(sample->point);
      term.weights.push_back(std::min(sample->weight, 1.0));
    }
  }
  return term;
}

Vec3 residual(const Pose& t_i, const Pose& t_j, const Vec3& x_i, const Vec3& x_hat_j) {
  return (t_j.inverse() * t_i).act(x_i) - x_hat_j;
}

ResidualJacobians residual_jacobians(const Pose& z, const Vec3& x_i) {
  ResidualJacobians out;
  const Mat3& r = z.rotation();
  out.j_ti.leftCols<3>() = r;
  out.j_ti.rightCols<3>() = -r * hat(x_i);
  out.j_tj.leftCols<3>() = -Mat3::Identity();
  out.j_tj.rightCols<3>() = hat(z.act(x_i));
  return out;
}

double huber_weight(double residual_norm, double delta) {
  return residual_norm <= delta ? 1.0 : delta / residual_norm;
}

namespace {

/// Residual pairs of one dynamic object: consecutive observed primitives.
struct PairProblem {
  int prim_i = 0;  // indices into track.primitives
  int prim_j = 0;
  ResidualTerm term;
};

struct ObjectProblem {
  ObjectTrack* track = nullptr;
  std::vector<PairProblem> pairs;
  std::vector<PairDiagnostic> skipped;
  std::vector<std::size_t> pixel_counts;
};

ObjectProblem build_object_problem(const SceneData& scene, ObjectTrack& track, const SolverConfig& config) {
  ObjectProblem problem;
  problem.track = &track;
  for (std::size_t a = 0; a + 1 < track.primitives.size(); ++a) {
    const int frame_i = track.primitives[a].keyframe_index;
    const int frame_j = track.primitives[a + 1].keyframe_index;
    ResidualTerm term = build_residual_term(scene, track, frame_i, frame_j);
    if (term.size() < static_cast<std::size_t>(config.min_correspondences_per_pair)) {
      problem.skipped.push_back({frame_i, frame_j, term.size(),
                                 "below min_correspondences_per_pair (" +
                                     std::to_string(config.min_correspondences_per_pair) + ")"});
      continue;
    }
    problem.pixel_counts.push_back(term.size());
    PairProblem pair;
    pair.prim_i = static_cast<int>(a);
    pair.prim_j = static_cast<int>(a + 1);
    pair.term = std::move(term);
    problem.pairs.push_back(std::move(pair));
  }
  return problem;
}

/// True when every primitive is linked to the gauge-fixed last primitive
/// through kept pairs; otherwise part of the chain is unconstrained.
bool chain_connected(const ObjectProblem& problem) {
  const int count = static_cast<int>(problem.track->primitives.size());
  std::vector<char> reached(count, 0);
  reached[count - 1] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& pair : problem.pairs) {
      if (reached[pair.prim_i] != reached[pair.prim_j]) {
        reached[pair.prim_i] = reached[pair.prim_j] = 1;
        changed = true;
      }
    }
  }
  return std::all_of(reached.begin(), reached.end(), [](char c) { return c != 0; });
}

struct ChunkAccum {
  Mat6 h_ii = Mat6::Zero();
  Mat6 h_ij = Mat6::Zero();
  Mat6 h_jj = Mat6::Zero();
  Vec6 g_i = Vec6::Zero();
  Vec6 g_j = Vec6::Zero();
  double cost = 0.0;
};

struct ChunkTask {
  const PairProblem* pair = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
  Pose z;  // T_j^-1 * T_i at current poses
  bool j_free = false;
};

void accumulate_chunk(const ChunkTask& task, double delta, ChunkAccum& acc) {
  const Mat3 rot = task.z.rotation();
  const Vec3 trans = task.z.translation();
  const ResidualTerm& term = task.pair->term;
  for (std::size_t t = task.begin; t < task.end; ++t) {
    const Vec3& x = term.source_points[t];
    const double w = term.weights[t];
    const Vec3 zx = rot * x + trans;
    const Vec3 r = zx - term.target_points[t];
    const double a = w * r.norm();
    acc.cost += huber_rho(a, delta);
    const double s = w * w * huber_weight(a, delta);

    Mat36 j_i;
    j_i.leftCols<3>() = rot;
    j_i.rightCols<3>() = -rot * hat(x);
    acc.h_ii.noalias() += s * j_i.transpose() * j_i;
    acc.g_i.noalias() += s * j_i.transpose() * r;
    if (task.j_free) {
      Mat36 j_j;
      j_j.leftCols<3>() = -Mat3::Identity();
      j_j.rightCols<3>() = hat(zx);
      acc.h_ij.noalias() += s * j_i.transpose() * j_j;
      acc.h_jj.noalias() += s * j_j.transpose() * j_j;
      acc.g_j.noalias() += s * j_j.transpose() * r;
    }
  }
}

struct Assembled {
  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  double cost = 0.0;
};

/// H, gradient and cost for one object at the given free-pose state.
/// Chunk boundaries depend only on term sizes; chunk partials are reduced
/// in index order, so results do not depend on the worker count.
Assembled assemble(const ObjectProblem& problem, const std::vector<Pose>& poses, double delta, int workers) {
  const int free_count = static_cast<int>(poses.size()) - 1;
  Assembled out;
  out.h = Eigen::MatrixXd::Zero(6 * free_count, 6 * free_count);
  out.g = Eigen::VectorXd::Zero(6 * free_count);

  std::vector<ChunkTask> tasks;
  for (const auto& pair : problem.pairs) {
    const Pose z = poses[pair.prim_j].inverse() * poses[pair.prim_i];
    const bool j_free = pair.prim_j < free_count;
    const std::size_t chunks = chunk_count_for(pair.term.size(), kChunkPixels);
    for (std::size_t c = 0; c < chunks; ++c) {
      ChunkTask task;
      task.pair = &pair;
      task.begin = c * kChunkPixels;
      task.end = std::min(pair.term.size(), task.begin + kChunkPixels);
      task.z = z;
      task.j_free = j_free;
      tasks.push_back(task);
    }
  }

  std::vector<ChunkAccum> partials(tasks.size());
  parallel_chunks(tasks.size(), workers, [&](std::size_t t) { accumulate_chunk(tasks[t], delta, partials[t]); });

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const ChunkTask& task = tasks[t];
    const ChunkAccum& acc = partials[t];
    const int bi = 6 * task.pair->prim_i;
    out.h.block<6, 6>(bi, bi) += acc.h_ii;
    out.g.segment<6>(bi) += acc.g_i;
    out.cost += acc.cost;
    if (task.j_free) {
      const int bj = 6 * task.pair->prim_j;
      out.h.block<6, 6>(bj, bj) += acc.h_jj;
      out.h.block<6, 6>(bi, bj) += acc.h_ij;
      out.h.block<6, 6>(bj, bi) += acc.h_ij.transpose();
      out.g.segment<6>(bj) += acc.g_j;
    }
  }
  return out;
}

std::vector<Pose> apply_update(const std::vector<Pose>& poses, const Eigen::VectorXd& tau) {
  std::vector<Pose> out = poses;
  const int free_count = static_cast<int>(poses.size()) - 1;
  for (int a = 0; a < free_count; ++a) {
    out[a] = oplus(poses[a], Twist::from_vector(tau.segment<6>(6 * a)));
  }
  return out;
}

void solve_object(ObjectProblem& problem, const SolverConfig& config, double delta,
                  ObjectReport& report) {
  ObjectTrack& track = *problem.track;
  const int prim_count = static_cast<int>(track.primitives.size());
  const int free_count = prim_count - 1;

  auto mark_singular = [&](const std::string&) {
    track.singular = true;
    for (auto& prim : track.primitives) prim.pose = Pose::identity();
    report.singular = true;
    report.termination = "singular";
  };

  if (free_count < 1 || problem.pairs.empty() || !chain_connected(problem)) {
    mark_singular("disconnected pose chain");
    return;
  }

  std::vector<Pose> poses(prim_count, Pose::identity());
  Assembled current = assemble(problem, poses, delta, config.workers);
  report.initial_cost = current.cost;
  report.cost_history.push_back(current.cost);

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(current.h);
    const double max_eig = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    if (eig.eigenvalues().minCoeff() < 1e-12 * std::max(max_eig, 1.0)) {
      mark_singular("rank-deficient normal equations");
      report.initial_cost = report.final_cost = current.cost;
      return;
    }
  }

  const double diag_floor = 1e-12 * std::max(current.h.diagonal().maxCoeff(), 1.0);
  report.termination = "max_iterations";
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    double lambda = config.damping;
    bool accepted = false;
    Eigen::VectorXd tau;
    Assembled candidate_state;
    std::vector<Pose> candidate;
    const int attempts = config.fixed_iteration_budget ? 1 : 10;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      Eigen::MatrixXd damped = current.h;
      if (lambda > 0.0) damped.diagonal() += lambda * current.h.diagonal().cwiseMax(diag_floor);
      tau = Eigen::LDLT<Eigen::MatrixXd>(damped).solve(-current.g);
      if (tau.allFinite()) {
        candidate = apply_update(poses, tau);
        candidate_state = assemble(problem, candidate, delta, config.workers);
        if (candidate_state.cost <= current.cost) {
          accepted = true;
          break;
        }
      }
      lambda = lambda <= 0.0 ? 1e-8 : lambda * 10.0;
    }
    if (config.fixed_iteration_budget) {
      // Fixed budget: every iteration counts; a step that cannot improve
      // the cost is discarded and the state carried forward.
      if (accepted) {
        poses = std::move(candidate);
        current = std::move(candidate_state);
      }
      report.cost_history.push_back(current.cost);
      report.iterations = iter;
      continue;
    }
    if (!accepted) {
      report.termination = "stalled";
      break;
    }
    poses = std::move(candidate);
    current = std::move(candidate_state);
    report.cost_history.push_back(current.cost);
    report.iterations = iter;
    if (tau.lpNorm<Eigen::Infinity>() < config.update_norm_tolerance) {
      report.termination = "converged";
      break;
    }
  }

  for (int a = 0; a < prim_count; ++a) track.primitives[a].pose = poses[a];
  report.final_cost = current.cost;
}

}  // namespace

void classify_static(SceneData& scene, const SolverConfig& config) {
  const double threshold = config.resolved_static_threshold(scene.scene_scale());
  for (auto& track : scene.objects) {
    std::vector<std::pair<double, double>> norms;  // (residual norm, weight)
    double total_weight = 0.0;
    for (std::size_t a = 0; a + 1 < track.primitives.size(); ++a) {
      const ResidualTerm term = build_residual_term(scene, track, track.primitives[a].keyframe_index,
                                                    track.primitives[a + 1].keyframe_index);
      for (std::size_t t = 0; t < term.size(); ++t) {
        const double norm = (term.source_points[t] - term.target_points[t]).norm();
        norms.emplace_back(norm, term.weights[t]);
        total_weight += term.weights[t];
      }
    }
    bool is_static = true;
    if (total_weight > 0.0) {
      std::sort(norms.begin(), norms.end());
      double acc = 0.0;
      double median = norms.back().first;
      for (const auto& [norm, weight] : norms) {
        acc += weight;
        if (acc >= 0.5 * total_weight) {
          median = norm;
          break;
        }
      }
      is_static = median < threshold;
    }
    track.is_static = is_static;
    if (is_static) {
      for (auto& prim : track.primitives) prim.pose = Pose::identity();
    }
  }
}

SolveReport solve(SceneData& scene, const SolverConfig& config) {
  const double delta = config.resolved_huber_delta(scene.scene_scale());
  SolveReport report;
  for (auto& track : scene.objects) {
    ObjectReport object_report;
    object_report.object_id = track.object_id;
    object_report.is_static = track.is_static;
    if (track.is_static) {
      object_report.termination = "static";
      report.objects.push_back(std::move(object_report));
      continue;
    }
    ObjectProblem problem = build_object_problem(scene, track, config);
    object_report.pixel_counts = problem.pixel_counts;
    object_report.skipped_pairs = problem.skipped;
    solve_object(problem, config, delta, object_report);
    report.total_initial_cost += object_report.initial_cost;
    report.total_final_cost += object_report.final_cost;
    report.objects.push_back(std::move(object_report));
  }
  return report;
}

std::string SolveReport::to_json() const {
  json j;
  j["total_initial_cost"] = total_initial_cost;
  j["total_final_cost"] = total_final_cost;
  json objs = json::array();
  for (const auto& o : objects) {
    json jo;
    jo["object_id"] = o.object_id;
    jo["static"] = o.is_static;
    jo["singular"] = o.singular;
    jo["iterations"] = o.iterations;
    jo["initial_cost"] = o.initial_cost;
    jo["final_cost"] = o.final_cost;
    jo["termination"] = o.termination;
    jo["cost_history"] = o.cost_history;
    jo["pixel_counts"] = o.pixel_counts;
    json skipped = json::array();
    for (const auto& s : o.skipped_pairs) {
      json js;
      js["frame_i"] = s.frame_i;
      js["frame_j"] = s.frame_j;
      js["correspondences"] = s.correspondences;
      js["reason"] = s.reason;
      skipped.push_back(js);
    }
    jo["skipped_pairs"] = skipped;
    if (o.parent) {
      jo["parent"] = *o.parent;
    } else {
      jo["parent"] = nullptr;
    }
    json extra = json::array();
    for (const auto& [frame, pose] : o.extrapolated) {
      json je;
      je["frame"] = frame;
      const Mat4 m = pose.matrix();
      json a = json::array();
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
      }
      je["pose"] = a;
      extra.push_back(je);
    }
    jo["extrapolated"] = extra;
    objs.push_back(jo);
  }
  j["objects"] = objs;
  return j.dump(2) + "\n";
}

}  // namespace pglue
