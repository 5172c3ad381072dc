// pglue: batch pipeline for piecewise-rigid scene gluing.
//
// Subcommands: synth (generate a scene), glue (estimate per-primitive
// poses), remap (warp observations to a timestamp), eval (score against
// ground truth), info (inspect a scene directory).
//
// Exit codes: 0 success, 10 io, 11 format, 12 manifest, 13 validation,
// 14 config, 15 empty scene, 16 missing pose, 17 degenerate alignment,
// 18 empty cloud, 19 angle near pi, 70 internal; CLI11 parse errors keep
// their own codes.

#include "pglue/dataio.hpp"
#include "pglue/errors.hpp"
#include "pglue/eval.hpp"
#include "pglue/motion_seg.hpp"
#include "pglue/remap.hpp"
#include "pglue/solver.hpp"
#include "pglue/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pglue;

namespace {

struct CommonOpts {
  int workers = 1;
};

struct GlueOpts {
  std::string scene_dir;
  std::string out_dir;
  SolverConfig solver;
  MotionSegConfig motion;
};

struct RemapOpts {
  std::string solved_dir;
  std::string scene_dir;  // optional override of the recorded reference
  std::string out_dir;
  int target_time = -1;
  bool all_times = false;
};

struct EvalOpts {
  std::string solved_dir;
  std::string scene_dir;
  std::string gt_dir;
  std::string report_path;
  EvalConfig config;
};

struct SynthOpts {
  std::string preset;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double noise = -1.0;
  double outliers = -1.0;
  int resolution = 0;
};

SceneData load_solved_scene(const std::string& solved_dir, const std::string& scene_override,
                            std::string* scene_dir_out = nullptr) {
  std::string scene_dir = scene_override;
  if (scene_dir.empty()) {
    std::ifstream in(fs::path(solved_dir) / "poses.json");
    if (!in) throw FormatError("missing poses.json in " + solved_dir);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("unparsable poses.json: " + std::string(e.what()));
    }
    scene_dir = j.value("scene", "");
    if (scene_dir.empty()) throw FormatError("poses.json lacks a scene reference; pass --scene");
  }
  SceneData scene = load_scene(scene_dir);
  load_poses(scene, solved_dir);
  if (scene_dir_out) *scene_dir_out = scene_dir;
  return scene;
}

int cmd_glue(const GlueOpts& opts) {
  SceneData scene = load_scene(opts.scene_dir);
  classify_static(scene, opts.solver);
  SolveReport report = solve(scene, opts.solver);
  assign_parents(scene, opts.motion);
  extrapolate_tracks(scene);

  for (auto& obj : report.objects) {
    const ObjectTrack* track = scene.track_for(obj.object_id);
    obj.parent = track->parent;
    for (const auto& [frame, pose] : track->extrapolated) obj.extrapolated.emplace_back(frame, pose);
  }

  fs::create_directories(opts.out_dir);
  save_poses(scene, opts.out_dir, fs::absolute(opts.scene_dir).string());
  std::ofstream out(fs::path(opts.out_dir) / "report.json", std::ios::trunc);
  if (!out) throw IoError("cannot write report.json in " + opts.out_dir);
  out << report.to_json();

  int static_count = 0, dynamic_count = 0, singular_count = 0;
  for (const auto& obj : report.objects) {
    if (obj.is_static) {
      ++static_count;
    } else {
      ++dynamic_count;
    }
    if (obj.singular) ++singular_count;
  }
  std::cout << "glued " << report.objects.size() << " objects (" << static_count << " static, "
            << dynamic_count << " dynamic";
  if (singular_count > 0) std::cout << ", " << singular_count << " singular";
  std::cout << "); total cost " << report.total_initial_cost << " -> " << report.total_final_cost << "\n";
  return 0;
}

int cmd_remap(const RemapOpts& opts, int workers) {
  SceneData scene = load_solved_scene(opts.solved_dir, opts.scene_dir);
  std::vector<SceneReconstruction> recons;
  if (opts.all_times) {
    for (int q = 0; q < scene.keyframe_count(); ++q) recons.push_back(remap_scene(scene, q, workers));
  } else {
    if (opts.target_time < 0) throw ConfigError("remap needs --time or --all-times");
    recons.push_back(remap_scene(scene, opts.target_time, workers));
  }
  save_reconstruction(recons, opts.out_dir);
  std::cout << "wrote " << recons.size() << " reconstruction(s) to " << opts.out_dir << "\n";
  return 0;
}

int cmd_eval(const EvalOpts& opts) {
  std::string scene_dir;
  SceneData scene = load_solved_scene(opts.solved_dir, opts.scene_dir, &scene_dir);
  const std::string gt_dir = opts.gt_dir.empty() ? (fs::path(scene_dir) / "gt").string() : opts.gt_dir;
  const GroundTruth gt = load_ground_truth(gt_dir);
  const EvalResult result = evaluate_sequence(scene, gt, opts.config);

  if (!opts.report_path.empty()) {
    const fs::path parent = fs::path(opts.report_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(opts.report_path, std::ios::trunc);
    if (!out) throw IoError("cannot write report: " + opts.report_path);
    out << result.to_json(opts.config);
  }
  std::cout << "threshold " << opts.config.threshold << ", chunks " << result.chunks.size() << "\n";
  std::cout << result.to_table();
  std::cout << "fscore " << result.fscore << "\n";
  return 0;
}

int cmd_synth(const SynthOpts& opts) {
  SynthConfig config;
  if (!opts.config_path.empty()) {
    config = parse_synth_config(opts.config_path);
  } else if (opts.preset == "standard" || opts.preset.empty()) {
    config = standard_benchmark(opts.resolution > 0 ? opts.resolution : 128);
  } else if (opts.preset == "three-body") {
    config = three_body_benchmark();
  } else {
    throw ConfigError("unknown preset '" + opts.preset + "' (expected standard or three-body)");
  }
  if (opts.seed_set) config.seed = opts.seed;
  if (opts.noise >= 0.0) config.noise_std_frac = opts.noise;
  if (opts.outliers >= 0.0) config.outlier_fraction = opts.outliers;
  generate_to_directory(config, opts.out_dir);
  std::cout << "wrote synthetic scene (" << config.width << "x" << config.height << ", "
            << config.keyframe_count << " keyframes, seed " << config.seed << ") to " << opts.out_dir << "\n";
  return 0;
}

int cmd_info(const std::string& scene_dir) {
  const SceneData scene = load_scene(scene_dir);
  std::cout << "resolution " << scene.width() << "x" << scene.height() << ", " << scene.keyframe_count()
            << " keyframes, unit " << scene.scene_unit << "\n";
  std::cout << "scene scale " << scene.scene_scale() << "\n";
  std::cout << "objects:\n";
  for (const auto& track : scene.objects) {
    std::cout << "  id " << track.object_id << ": frames " << track.first_frame() << ".."
              << track.last_frame() << ", " << track.primitives.size() << " primitives\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piecewise-rigid scene gluing pipeline"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "read options from an INI/TOML file (defaults < file < flags)");

  CommonOpts common;
  app.add_option("--workers", common.workers, "worker threads (results are worker-count independent)")
      ->envname("PGLUE_WORKERS");

  GlueOpts glue;
  auto* glue_cmd = app.add_subcommand("glue", "estimate per-primitive poses");
  glue_cmd->add_option("--scene", glue.scene_dir, "scene directory")->required();
  glue_cmd->add_option("--out", glue.out_dir, "output directory")->required();
  glue_cmd->add_option("--max-iters", glue.solver.max_iterations, "Gauss-Newton iteration cap")
      ->envname("PGLUE_MAX_ITERS");
  glue_cmd->add_option("--tol", glue.solver.update_norm_tolerance, "update infinity-norm stop tolerance")
      ->envname("PGLUE_TOL");
  double huber = -1.0, static_thresh = -1.0, sigma_tau = -1.0;
  glue_cmd->add_option("--huber-delta", huber, "Huber knee, scene units (default 0.01 * scene scale)")
      ->envname("PGLUE_HUBER_DELTA");
  glue_cmd->add_option("--static-thresh", static_thresh,
                       "static residual threshold (default 0.005 * scene scale)")
      ->envname("PGLUE_STATIC_THRESH");
  glue_cmd->add_option("--min-corr", glue.solver.min_correspondences_per_pair,
                       "minimum correspondences per pair")
      ->envname("PGLUE_MIN_CORR");
  glue_cmd->add_option("--damping", glue.solver.damping, "initial diagonal damping")
      ->envname("PGLUE_DAMPING");
  glue_cmd->add_flag("--fixed-budget", glue.solver.fixed_iteration_budget,
                     "run all iterations with no early termination");
  glue_cmd->add_option("--alpha", glue.motion.alpha, "OBB inflation for contact")->envname("PGLUE_ALPHA");
  glue_cmd->add_option("--sigma-tau", sigma_tau, "velocity translation sigma (default 0.02 * scene scale)")
      ->envname("PGLUE_SIGMA_TAU");
  glue_cmd->add_option("--sigma-psi", glue.motion.sigma_psi, "velocity rotation sigma, radians")
      ->envname("PGLUE_SIGMA_PSI");
  glue_cmd->add_option("--dist-thresh", glue.motion.distance_threshold, "velocity clustering gate")
      ->envname("PGLUE_DIST_THRESH");

  RemapOpts remap;
  auto* remap_cmd = app.add_subcommand("remap", "warp all observations to a timestamp");
  remap_cmd->add_option("--solved", remap.solved_dir, "directory written by glue")->required();
  remap_cmd->add_option("--scene", remap.scene_dir, "scene directory (overrides the recorded path)");
  remap_cmd->add_option("--out", remap.out_dir, "output directory")->required();
  remap_cmd->add_option("--time", remap.target_time, "target keyframe index");
  remap_cmd->add_flag("--all-times", remap.all_times, "emit one reconstruction per keyframe");

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("eval", "score a solved scene against ground truth");
  eval_cmd->add_option("--solved", eval.solved_dir, "directory written by glue")->required();
  eval_cmd->add_option("--scene", eval.scene_dir, "scene directory (overrides the recorded path)");
  eval_cmd->add_option("--gt", eval.gt_dir, "ground-truth directory (default <scene>/gt)");
  eval_cmd->add_option("--report", eval.report_path, "write the result as JSON here");
  eval_cmd->add_option("--threshold", eval.config.threshold, "distance threshold, scene units")
      ->envname("PGLUE_THRESHOLD");
  eval_cmd->add_option("--chunk-len", eval.config.chunk_length, "frames per evaluation chunk")
      ->envname("PGLUE_CHUNK_LEN");
  bool include_static = false;
  eval_cmd->add_flag("--include-static", include_static, "score static parts too");

  SynthOpts synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene");
  auto* preset_opt = synth_cmd->add_option("--preset", synth.preset, "standard or three-body");
  synth_cmd->add_option("--config", synth.config_path, "synth config JSON")->excludes(preset_opt);
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
  auto* seed_opt = synth_cmd->add_option("--seed", synth.seed, "override the preset seed")
                       ->envname("PGLUE_SEED");
  synth_cmd->add_option("--noise", synth.noise, "point noise std as fraction of object diameter");
  synth_cmd->add_option("--outliers", synth.outliers, "fraction of flows replaced by random ones");
  synth_cmd->add_option("--resolution", synth.resolution, "standard preset resolution");

  std::string info_dir;
  auto* info_cmd = app.add_subcommand("info", "inspect a scene directory");
  info_cmd->add_option("--scene", info_dir, "scene directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (glue_cmd->parsed()) {
      glue.solver.workers = common.workers;
      if (huber >= 0.0) glue.solver.huber_delta = huber;
      if (static_thresh >= 0.0) glue.solver.static_residual_threshold = static_thresh;
      if (sigma_tau >= 0.0) glue.motion.sigma_tau = sigma_tau;
      return cmd_glue(glue);
    }
    if (remap_cmd->parsed()) return cmd_remap(remap, common.workers);
    if (eval_cmd->parsed()) {
      eval.config.dynamic_only = !include_static;
      eval.config.workers = common.workers;
      return cmd_eval(eval);
    }
    if (synth_cmd->parsed()) {
      synth.seed_set = seed_opt->count() > 0;
      return cmd_synth(synth);
    }
    if (info_cmd->parsed()) return cmd_info(info_dir);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 10;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 11;
  } catch (const ManifestError& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return 12;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 13;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 14;
  } catch (const EmptySceneError& e) {
    std::cerr << "empty scene: " << e.what() << "\n";
    return 15;
  } catch (const MissingPoseError& e) {
    std::cerr << "missing pose: " << e.what() << "\n";
    return 16;
  } catch (const DegenerateConfigurationError& e) {
    std::cerr << "degenerate configuration: " << e.what() << "\n";
    return 17;
  } catch (const EmptyCloudError& e) {
    std::cerr << "empty cloud: " << e.what() << "\n";
    return 18;
  } catch (const AngleNearPiError& e) {
    std::cerr << "angle near pi: " << e.what() << "\n";
    return 19;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
