#include "pglue/synth.hpp"

#include "pglue/errors.hpp"
#include "pglue/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pglue {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kOutlierStream = 2;

struct BuiltObject {
  const SynthObjectSpec* spec = nullptr;
  std::vector<Pose> poses;              // world motion per frame
  std::vector<Vec3> rest;               // material points, base-region order
  std::vector<std::pair<int, int>> offsets;  // region shift per frame
  double diameter = 0.0;
  bool is_static = true;

  bool visible_at(int frame) const {
    if (spec->visible_intervals.empty()) return true;
    for (const auto& [a, b] : spec->visible_intervals) {
      if (frame >= a && frame <= b) return true;
    }
    return false;
  }
};

double height_profile(ObjectShape shape, double ax, double ay) {
  switch (shape) {
    case ObjectShape::kBox:
      return (std::abs(ax) < 0.7 && std::abs(ay) < 0.7) ? 0.5 : 0.0;
    case ObjectShape::kSphereShell: {
      const double r2 = ax * ax + ay * ay;
      return 0.5 * std::sqrt(std::max(0.05, 1.0 - r2));
    }
    case ObjectShape::kPlanarPatch:
      return 0.2 * ax + 0.1 * ay;
  }
  return 0.0;
}

BuiltObject build_object(const SynthObjectSpec& spec, int keyframe_count, double ppu) {
  BuiltObject obj;
  obj.spec = &spec;

  if (!spec.scripted_poses.empty()) {
    if (static_cast<int>(spec.scripted_poses.size()) != keyframe_count) {
      throw ConfigError("object " + std::to_string(spec.id) + ": scripted pose count differs from keyframe count");
    }
    obj.poses = spec.scripted_poses;
  } else {
    const Pose step = exp_se3(spec.twist_per_frame);
    Pose p = Pose::identity();
    for (int k = 0; k < keyframe_count; ++k) {
      obj.poses.push_back(p);
      p = step * p;
    }
  }
  for (const auto& p : obj.poses) {
    if (!p.is_identity(1e-15)) obj.is_static = false;
  }

  const double half = spec.size / 2.0;
  obj.rest.reserve(static_cast<std::size_t>(spec.region_w) * spec.region_h);
  for (int v = 0; v < spec.region_h; ++v) {
    for (int u = 0; u < spec.region_w; ++u) {
      const double ax = spec.region_w > 1 ? 2.0 * u / (spec.region_w - 1) - 1.0 : 0.0;
      const double ay = spec.region_h > 1 ? 2.0 * v / (spec.region_h - 1) - 1.0 : 0.0;
      obj.rest.push_back(spec.center + Vec3(half * ax, half * ay, half * height_profile(spec.shape, ax, ay)));
    }
  }

  Vec3 lo = obj.rest.front(), hi = obj.rest.front();
  for (const auto& p : obj.rest) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  obj.diameter = (hi - lo).norm();

  const Vec3 c0 = obj.poses.front().act(spec.center);
  for (int k = 0; k < keyframe_count; ++k) {
    const Vec3 ck = obj.poses[k].act(spec.center);
    obj.offsets.emplace_back(static_cast<int>(std::lround(ppu * (ck.x() - c0.x()))),
                             static_cast<int>(std::lround(ppu * (ck.y() - c0.y()))));
  }
  return obj;
}

}  // namespace

std::pair<SceneData, GroundTruth> generate(const SynthConfig& config) {
  if (config.keyframe_count < 1) throw ConfigError("keyframe_count must be at least 1");
  if (config.width < 1 || config.height < 1) throw ConfigError("resolution must be positive");
  if (config.objects.empty() && !config.background_plane) throw ConfigError("no objects configured");
  if (config.outlier_fraction < 0.0 || config.outlier_fraction >= 1.0) {
    throw ConfigError("outlier_fraction must be in [0, 1)");
  }

  const int w = config.width;
  const int h = config.height;
  const int n = config.keyframe_count;
  const std::size_t npx = static_cast<std::size_t>(w) * h;

  std::vector<BuiltObject> objects;
  for (const auto& spec : config.objects) {
    if (spec.size <= 0.0) throw ConfigError("object " + std::to_string(spec.id) + ": size must be positive");
    if (config.background_plane && spec.id == config.background_id) {
      throw ConfigError("object id collides with background id");
    }
    objects.push_back(build_object(spec, n, config.pixels_per_unit));
  }

  double mean_diameter = 1.0;
  if (!objects.empty()) {
    mean_diameter = 0.0;
    for (const auto& o : objects) mean_diameter += o.diameter;
    mean_diameter /= static_cast<double>(objects.size());
  }

  // Ownership per frame; overlapping claims are a config error.
  // owner index: -1 background/uncovered, otherwise index into objects.
  std::vector<std::vector<int>> owner(n, std::vector<int>(npx, -1));
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const auto& obj = objects[oi];
    const auto& spec = *obj.spec;
    for (int k = 0; k < n; ++k) {
      if (!obj.visible_at(k)) continue;
      const auto [dx, dy] = obj.offsets[k];
      const int x0 = spec.region_x + dx;
      const int y0 = spec.region_y + dy;
      if (x0 < 0 || y0 < 0 || x0 + spec.region_w > w || y0 + spec.region_h > h) {
        std::ostringstream msg;
        msg << "object " << spec.id << " leaves the image at frame " << k;
        throw ConfigError(msg.str());
      }
      for (int v = 0; v < spec.region_h; ++v) {
        for (int u = 0; u < spec.region_w; ++u) {
          int& slot = owner[k][static_cast<std::size_t>(y0 + v) * w + (x0 + u)];
          if (slot != -1) {
            std::ostringstream msg;
            msg << "objects " << objects[slot].spec->id << " and " << spec.id
                << " overlap at frame " << k;
            throw ConfigError(msg.str());
          }
          slot = static_cast<int>(oi);
        }
      }
    }
  }

  auto background_point = [&](int x, int y) {
    return Vec3((x + 0.5 - w / 2.0) / config.pixels_per_unit,
                (y + 0.5 - h / 2.0) / config.pixels_per_unit, config.background_z);
  };

  SceneData scene;
  GroundTruth gt;
  gt.width = w;
  gt.height = h;
  gt.keyframe_count = n;
  scene.keyframes.resize(n);
  gt.clean.assign(n, PointMap(w, h));
  gt.dynamic.assign(n, std::vector<std::uint8_t>(npx, 0));

  // Per-frame noise magnitudes feed the correspondence confidences.
  std::vector<std::vector<double>> noise_mag(n, std::vector<double>(npx, 0.0));

  for (int k = 0; k < n; ++k) {
    Keyframe& kf = scene.keyframes[k];
    kf.points = PointMap(w, h);
    kf.mask = SegmentMask(w, h);
    Rng noise_rng(stream_seed(config.seed, static_cast<std::uint64_t>(k), kNoiseStream));

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const int oi = owner[k][i];
        Vec3 clean_point;
        ObjectId label;
        double sigma;
        if (oi >= 0) {
          const auto& obj = objects[oi];
          const auto [dx, dy] = obj.offsets[k];
          const int u = x - obj.spec->region_x - dx;
          const int v = y - obj.spec->region_y - dy;
          clean_point = obj.poses[k].act(obj.rest[static_cast<std::size_t>(v) * obj.spec->region_w + u]);
          label = obj.spec->id;
          sigma = config.noise_std_frac * obj.diameter;
          if (!obj.is_static) gt.dynamic[k][i] = 1;
        } else if (config.background_plane) {
          clean_point = background_point(x, y);
          label = config.background_id;
          sigma = config.noise_std_frac * mean_diameter;
        } else {
          kf.points.set_invalid(x, y);
          kf.mask.set(x, y, kUncoveredLabel);
          continue;
        }
        gt.clean[k].set(x, y, clean_point);
        Vec3 noise = Vec3::Zero();
        if (sigma > 0.0) noise = Vec3(sigma * noise_rng.normal(), sigma * noise_rng.normal(), sigma * noise_rng.normal());
        noise_mag[k][i] = noise.norm();
        kf.points.set(x, y, clean_point + noise);
        kf.mask.set(x, y, label);
      }
    }
  }

  for (int k = 0; k + 1 < n; ++k) {
    CorrespondenceField field(w, h, k);
    Rng outlier_rng(stream_seed(config.seed, static_cast<std::uint64_t>(k), kOutlierStream));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const int oi = owner[k][i];
        if (oi < 0 && !config.background_plane) continue;  // uncovered: zero flow, zero confidence

        const bool outlier = config.outlier_fraction > 0.0 && outlier_rng.uniform() < config.outlier_fraction;
        if (outlier) {
          const double tx = outlier_rng.uniform(0.0, w - 1.0);
          const double ty = outlier_rng.uniform(0.0, h - 1.0);
          field.flow[i] = Vec2(tx - x, ty - y);
          field.confidence[i] = outlier_rng.uniform(0.0, 0.2);
          continue;
        }

        Vec2 flow = Vec2::Zero();
        if (oi >= 0) {
          const auto& obj = objects[oi];
          flow = Vec2(obj.offsets[k + 1].first - obj.offsets[k].first,
                      obj.offsets[k + 1].second - obj.offsets[k].second);
        }
        field.flow[i] = flow;
        const double tx = x + flow.x();
        const double ty = y + flow.y();
        if (tx < 0.0 || tx > w - 1.0 || ty < 0.0 || ty > h - 1.0) {
          field.confidence[i] = 0.0;
        } else {
          const std::size_t ti = static_cast<std::size_t>(std::lround(ty)) * w +
                                 static_cast<std::size_t>(std::lround(tx));
          field.confidence[i] = 1.0 / (1.0 + noise_mag[k + 1][ti]);
        }
      }
    }
    scene.correspondences.push_back(std::move(field));
  }

  scene.objects = build_objects(scene.keyframes);

  for (const auto& obj : objects) {
    GroundTruth::Object go;
    go.id = obj.spec->id;
    go.is_static = obj.is_static;
    go.poses = obj.poses;
    gt.objects.push_back(std::move(go));
  }
  if (config.background_plane) {
    GroundTruth::Object go;
    go.id = config.background_id;
    go.is_static = true;
    go.poses.assign(n, Pose::identity());
    gt.objects.push_back(std::move(go));
  }
  std::sort(gt.objects.begin(), gt.objects.end(),
            [](const GroundTruth::Object& a, const GroundTruth::Object& b) { return a.id < b.id; });

  return {std::move(scene), std::move(gt)};
}

SynthConfig standard_benchmark(int resolution) {
  if (resolution < 64) throw ConfigError("standard benchmark needs at least 64 pixels");
  const double s = resolution / 128.0;
  auto px = [&](double v) { return static_cast<int>(std::lround(v * s)); };

  SynthConfig c;
  c.seed = 7;
  c.keyframe_count = 10;
  c.width = resolution;
  c.height = resolution;
  c.pixels_per_unit = 24.0 * s;
  c.background_plane = true;
  c.background_id = 0;
  c.background_z = 4.0;

  SynthObjectSpec translating;
  translating.id = 1;
  translating.shape = ObjectShape::kBox;
  translating.size = 1.0;
  translating.center = Vec3(-2.3, 0.6, 2.2);
  translating.region_x = px(8);
  translating.region_y = px(66);
  translating.region_w = px(26);
  translating.region_h = px(26);
  translating.twist_per_frame = Twist(Vec3(0.12, 0.03, 0.05), Vec3::Zero());
  c.objects.push_back(translating);

  // Rotation about the vertical axis through the object's own centre:
  // rho = c x omega makes the centroid a fixed point of the screw.
  const Vec3 spin_center(1.0, -1.8, 2.6);
  const Vec3 spin_omega(0.0, 0.0, 0.15);
  SynthObjectSpec rotating;
  rotating.id = 2;
  rotating.shape = ObjectShape::kSphereShell;
  rotating.size = 1.1;
  rotating.center = spin_center;
  rotating.region_x = px(78);
  rotating.region_y = px(12);
  rotating.region_w = px(30);
  rotating.region_h = px(30);
  rotating.twist_per_frame = Twist(spin_center.cross(spin_omega), spin_omega);
  c.objects.push_back(rotating);

  const Vec3 screw_axis = Vec3(0.25, 0.2, 0.95).normalized();
  const Vec3 screw_center(-2.0, -1.7, 3.0);
  const Vec3 screw_omega = 0.12 * screw_axis;
  SynthObjectSpec screw;
  screw.id = 3;
  screw.shape = ObjectShape::kBox;
  screw.size = 0.9;
  screw.center = screw_center;
  screw.region_x = px(14);
  screw.region_y = px(10);
  screw.region_w = px(26);
  screw.region_h = px(26);
  screw.twist_per_frame = Twist(screw_center.cross(screw_omega) + 0.05 * screw_axis, screw_omega);
  c.objects.push_back(screw);

  // Rides the same world motion as the rotating object and vanishes after
  // frame 6; motion grouping has to carry it to the end of the sequence.
  SynthObjectSpec companion;
  companion.id = 4;
  companion.shape = ObjectShape::kBox;
  companion.size = 0.5;
  companion.center = spin_center + Vec3(0.42, 0.28, 0.12);
  companion.region_x = px(84);
  companion.region_y = px(86);
  companion.region_w = px(20);
  companion.region_h = px(20);
  companion.twist_per_frame = rotating.twist_per_frame;
  companion.visible_intervals = {{0, 6}};
  c.objects.push_back(companion);

  return c;
}

SynthConfig three_body_benchmark() {
  SynthConfig c;
  c.seed = 11;
  c.keyframe_count = 8;
  c.width = 96;
  c.height = 96;
  c.pixels_per_unit = 24.0;
  c.background_plane = true;
  c.background_id = 0;
  c.background_z = 3.0;

  const Twist shared(Vec3(0.10, 0.0, 0.015), Vec3::Zero());

  SynthObjectSpec front;  // stays visible to the end
  front.id = 1;
  front.shape = ObjectShape::kBox;
  front.size = 0.5;
  front.center = Vec3(0.0, -0.68, 2.0);
  front.region_x = 10;
  front.region_y = 10;
  front.region_w = 24;
  front.region_h = 24;
  front.twist_per_frame = shared;
  c.objects.push_back(front);

  SynthObjectSpec body;  // touches both, vanishes at frame 6
  body.id = 2;
  body.shape = ObjectShape::kBox;
  body.size = 0.8;
  body.center = Vec3(0.0, 0.0, 2.0);
  body.region_x = 44;
  body.region_y = 10;
  body.region_w = 26;
  body.region_h = 26;
  body.twist_per_frame = shared;
  body.visible_intervals = {{0, 5}};
  c.objects.push_back(body);

  SynthObjectSpec item;  // touches only the body, vanishes at frame 4
  item.id = 3;
  item.shape = ObjectShape::kSphereShell;
  item.size = 0.3;
  item.center = Vec3(0.0, 0.2, 2.0);
  item.region_x = 10;
  item.region_y = 48;
  item.region_w = 20;
  item.region_h = 20;
  item.twist_per_frame = shared;
  item.visible_intervals = {{0, 3}};
  c.objects.push_back(item);

  return c;
}

namespace {

ObjectShape shape_from_string(const std::string& s) {
  if (s == "box") return ObjectShape::kBox;
  if (s == "sphere-shell") return ObjectShape::kSphereShell;
  if (s == "planar-patch") return ObjectShape::kPlanarPatch;
  throw ConfigError("unknown shape '" + s + "' (expected box, sphere-shell or planar-patch)");
}

}  // namespace

SynthConfig parse_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("unparsable config " + path.string() + ": " + e.what());
  }
  SynthConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{1});
    c.keyframe_count = j.at("keyframe_count").get<int>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.pixels_per_unit = j.value("pixels_per_unit", 24.0);
    c.noise_std_frac = j.value("noise_std_frac", 0.0);
    c.outlier_fraction = j.value("outlier_fraction", 0.0);
    c.background_plane = j.value("background_plane", true);
    c.background_id = j.value("background_id", ObjectId{0});
    c.background_z = j.value("background_z", 4.0);
    for (const auto& jo : j.value("objects", json::array())) {
      SynthObjectSpec s;
      s.id = jo.at("id").get<ObjectId>();
      s.shape = shape_from_string(jo.value("shape", "box"));
      s.size = jo.value("size", 1.0);
      const auto& ctr = jo.at("center");
      s.center = Vec3(ctr.at(0).get<double>(), ctr.at(1).get<double>(), ctr.at(2).get<double>());
      const auto& region = jo.at("region");
      s.region_x = region.at(0).get<int>();
      s.region_y = region.at(1).get<int>();
      s.region_w = region.at(2).get<int>();
      s.region_h = region.at(3).get<int>();
      if (jo.contains("twist_per_frame")) {
        const auto& tw = jo.at("twist_per_frame");
        s.twist_per_frame = Twist(Vec3(tw.at(0).get<double>(), tw.at(1).get<double>(), tw.at(2).get<double>()),
                                  Vec3(tw.at(3).get<double>(), tw.at(4).get<double>(), tw.at(5).get<double>()));
      }
      for (const auto& iv : jo.value("visible_intervals", json::array())) {
        s.visible_intervals.emplace_back(iv.at(0).get<int>(), iv.at(1).get<int>());
      }
      c.objects.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError("config field error in " + path.string() + ": " + e.what());
  }
  return c;
}

void generate_to_directory(const SynthConfig& config, const std::filesystem::path& dir) {
  auto [scene, gt] = generate(config);
  save_ground_truth(gt, dir / "gt");
  save_scene(scene, dir);
}

}  // namespace pglue
