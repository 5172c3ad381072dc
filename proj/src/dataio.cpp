#include "pglue/dataio.hpp"

#include "pglue/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace pglue {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'G', 'A', '1'};
constexpr std::uint16_t kTypeF32 = 1;
constexpr std::uint16_t kTypeU16 = 2;
constexpr std::uint16_t kTypeU8 = 3;

std::size_t element_size(std::uint16_t type) {
  switch (type) {
    case kTypeF32: return 4;
    case kTypeU16: return 2;
    case kTypeU8: return 1;
    default: return 0;
  }
}

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_array(const fs::path& path, std::uint16_t type, std::uint32_t height, std::uint32_t width,
                 std::uint16_t channels, const void* data) {
  std::string header;
  header.reserve(16);
  header.append(kMagic, 4);
  put_u16(header, type);
  put_u32(header, height);
  put_u32(header, width);
  put_u16(header, channels);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const std::size_t bytes = element_size(type) * height * width * channels;
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Reads an array whose shape the manifest pins down; any header
/// disagreement is a hard error.
std::vector<unsigned char> read_array(const fs::path& path, std::uint16_t type, std::uint32_t height,
                                      std::uint32_t width, std::uint16_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("inventory file missing: " + path.string());
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16) throw FormatError("truncated header: " + path.string());
  if (std::memcmp(header, kMagic, 4) != 0) throw FormatError("bad magic: " + path.string());
  const std::uint16_t ftype = get_u16(header + 4);
  const std::uint32_t fh = get_u32(header + 6);
  const std::uint32_t fw = get_u32(header + 10);
  const std::uint16_t fc = get_u16(header + 14);
  if (ftype != type) throw FormatError("element type mismatch: " + path.string());
  if (fh != height || fw != width || fc != channels) {
    throw FormatError("shape disagrees with manifest: " + path.string());
  }
  const std::size_t bytes = element_size(type) * height * width * channels;
  std::vector<unsigned char> payload(bytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw FormatError("truncated payload: " + path.string());
  in.get();
  if (!in.eof()) throw FormatError("trailing bytes: " + path.string());
  return payload;
}

std::string frame_name(const char* prefix, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%04d%s", prefix, index, ext);
  return buf;
}

json read_manifest(const fs::path& dir, const char* expected_format) {
  const fs::path path = dir / "manifest";
  std::ifstream in(path);
  if (!in) throw FormatError("missing manifest: " + path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw FormatError("unparsable manifest: " + path.string() + ": " + e.what());
  }
  if (m.value("format", "") != expected_format) {
    throw FormatError("manifest format is not " + std::string(expected_format) + ": " + path.string());
  }
  return m;
}

void write_manifest(const json& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << m.dump(2) << "\n";
}

std::vector<float> pointmap_to_f32(const PointMap& pm) {
  std::vector<float> out(pm.size() * 3);
  for (std::size_t i = 0; i < pm.size(); ++i) {
    out[3 * i + 0] = static_cast<float>(pm.points()[i].x());
    out[3 * i + 1] = static_cast<float>(pm.points()[i].y());
    out[3 * i + 2] = static_cast<float>(pm.points()[i].z());
  }
  return out;
}

void f32_to_pointmap(const std::vector<unsigned char>& raw, PointMap& pm) {
  const float* f = reinterpret_cast<const float*>(raw.data());
  for (std::size_t i = 0; i < pm.size(); ++i) {
    pm.points()[i] = Vec3(f[3 * i], f[3 * i + 1], f[3 * i + 2]);
  }
}

json pose_to_json(const Pose& p) {
  const Mat4 m = p.matrix();
  json a = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  }
  return a;
}

Pose pose_from_json(const json& a) {
  if (!a.is_array() || a.size() != 16) throw FormatError("pose entry is not a 16-element array");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = a[4 * r + c].get<double>();
  }
  return Pose::from_matrix(m);
}

std::vector<std::string> name_list(const json& m, const char* key, std::size_t expected, const fs::path& dir) {
  if (!m.contains(key) || !m[key].is_array()) {
    throw ManifestError("manifest misses file list '" + std::string(key) + "' in " + dir.string());
  }
  std::vector<std::string> names = m[key].get<std::vector<std::string>>();
  if (names.size() != expected) {
    throw ManifestError("manifest lists " + std::to_string(names.size()) + " entries under '" + key +
                        "', expected " + std::to_string(expected) + " in " + dir.string());
  }
  return names;
}

}  // namespace

SceneData load_scene(const fs::path& dir) {
  const json m = read_manifest(dir, "pglue-scene");
  int width = 0, height = 0, count = 0;
  try {
    width = m.at("width").get<int>();
    height = m.at("height").get<int>();
    count = m.at("keyframe_count").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest misses resolution/count: ") + e.what());
  }
  if (width <= 0 || height <= 0 || count <= 0) throw FormatError("non-positive resolution or keyframe count");

  const auto pts_names = name_list(m, "pointmaps", count, dir);
  const auto msk_names = name_list(m, "masks", count, dir);
  const auto val_names = name_list(m, "validity", count, dir);
  const auto flow_names = name_list(m, "flows", count - 1, dir);
  const auto conf_names = name_list(m, "confidences", count - 1, dir);

  SceneData scene;
  scene.scene_unit = m.value("scene_unit", "arbitrary");
  scene.keyframes.resize(count);
  const std::size_t npx = static_cast<std::size_t>(width) * height;

  for (int k = 0; k < count; ++k) {
    Keyframe& kf = scene.keyframes[k];
    kf.points = PointMap(width, height);
    kf.mask = SegmentMask(width, height);

    const auto raw_pts = read_array(dir / pts_names[k], kTypeF32, height, width, 3);
    f32_to_pointmap(raw_pts, kf.points);

    const auto raw_msk = read_array(dir / msk_names[k], kTypeU16, height, width, 1);
    const std::uint16_t* labels = reinterpret_cast<const std::uint16_t*>(raw_msk.data());
    std::copy(labels, labels + npx, kf.mask.labels().begin());

    const auto raw_val = read_array(dir / val_names[k], kTypeU8, height, width, 1);
    for (std::size_t i = 0; i < npx; ++i) {
      kf.points.validity()[i] = raw_val[i] ? 1 : 0;
      if (!raw_val[i]) kf.points.points()[i].setZero();
    }
  }

  for (int k = 0; k + 1 < count; ++k) {
    CorrespondenceField field(width, height, k);
    const auto raw_flow = read_array(dir / flow_names[k], kTypeF32, height, width, 2);
    const float* f = reinterpret_cast<const float*>(raw_flow.data());
    for (std::size_t i = 0; i < npx; ++i) field.flow[i] = Vec2(f[2 * i], f[2 * i + 1]);

    const auto raw_conf = read_array(dir / conf_names[k], kTypeF32, height, width, 1);
    const float* c = reinterpret_cast<const float*>(raw_conf.data());
    for (std::size_t i = 0; i < npx; ++i) field.confidence[i] = c[i];

    // Flow targets outside the image carry no information.
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = field.index(x, y);
        const double tx = x + field.flow[i].x();
        const double ty = y + field.flow[i].y();
        if (!(tx >= 0.0 && tx <= width - 1.0 && ty >= 0.0 && ty <= height - 1.0)) {
          field.confidence[i] = 0.0;
        }
      }
    }
    scene.correspondences.push_back(std::move(field));
  }

  scene.objects = build_objects(scene.keyframes);

  const auto diagnostics = validate_scene(scene);
  if (!diagnostics.empty()) {
    std::string msg = "scene fails validation:";
    for (const auto& d : diagnostics) msg += "\n  [" + d.code + "] " + d.message;
    throw ValidationError(msg);
  }
  return scene;
}

void save_scene(const SceneData& scene, const fs::path& dir) {
  fs::create_directories(dir);
  const int w = scene.width();
  const int h = scene.height();
  const std::size_t npx = static_cast<std::size_t>(w) * h;

  json m;
  m["format"] = "pglue-scene";
  m["version"] = 1;
  m["width"] = w;
  m["height"] = h;
  m["keyframe_count"] = scene.keyframe_count();
  m["scene_unit"] = scene.scene_unit;

  std::vector<std::string> pts, msk, val, flows, confs;
  for (int k = 0; k < scene.keyframe_count(); ++k) {
    pts.push_back(frame_name("frame_", k, ".pts"));
    msk.push_back(frame_name("frame_", k, ".msk"));
    val.push_back(frame_name("frame_", k, ".val"));
    const Keyframe& kf = scene.keyframes[k];
    write_array(dir / pts.back(), kTypeF32, h, w, 3, pointmap_to_f32(kf.points).data());
    write_array(dir / msk.back(), kTypeU16, h, w, 1, kf.mask.labels().data());
    write_array(dir / val.back(), kTypeU8, h, w, 1, kf.points.validity().data());
  }
  for (int k = 0; k + 1 < scene.keyframe_count(); ++k) {
    flows.push_back(frame_name("flow_", k, ".flo2"));
    confs.push_back(frame_name("conf_", k, ".cnf"));
    const CorrespondenceField& f = scene.correspondences.at(k);
    std::vector<float> raw_flow(npx * 2);
    std::vector<float> raw_conf(npx);
    for (std::size_t i = 0; i < npx; ++i) {
      raw_flow[2 * i] = static_cast<float>(f.flow[i].x());
      raw_flow[2 * i + 1] = static_cast<float>(f.flow[i].y());
      raw_conf[i] = static_cast<float>(f.confidence[i]);
    }
    write_array(dir / flows.back(), kTypeF32, h, w, 2, raw_flow.data());
    write_array(dir / confs.back(), kTypeF32, h, w, 1, raw_conf.data());
  }
  m["pointmaps"] = pts;
  m["masks"] = msk;
  m["validity"] = val;
  m["flows"] = flows;
  m["confidences"] = confs;
  if (fs::exists(dir / "gt" / "manifest")) m["ground_truth"] = "gt";
  write_manifest(m, dir);
}

void save_ground_truth(const GroundTruth& gt, const fs::path& dir) {
  fs::create_directories(dir);
  const int w = gt.width;
  const int h = gt.height;

  json m;
  m["format"] = "pglue-gt";
  m["version"] = 1;
  m["width"] = w;
  m["height"] = h;
  m["keyframe_count"] = gt.keyframe_count;

  std::vector<std::string> pts, val, dyn;
  for (int k = 0; k < gt.keyframe_count; ++k) {
    pts.push_back(frame_name("frame_", k, ".pts"));
    val.push_back(frame_name("frame_", k, ".val"));
    dyn.push_back(frame_name("frame_", k, ".dyn"));
    write_array(dir / pts.back(), kTypeF32, h, w, 3, pointmap_to_f32(gt.clean[k]).data());
    write_array(dir / val.back(), kTypeU8, h, w, 1, gt.clean[k].validity().data());
    write_array(dir / dyn.back(), kTypeU8, h, w, 1, gt.dynamic[k].data());
  }
  m["pointmaps"] = pts;
  m["validity"] = val;
  m["dynamic_masks"] = dyn;

  json objects = json::array();
  for (const auto& o : gt.objects) {
    json jo;
    jo["id"] = o.id;
    jo["static"] = o.is_static;
    json poses = json::array();
    for (const auto& p : o.poses) poses.push_back(pose_to_json(p));
    jo["poses"] = poses;
    objects.push_back(jo);
  }
  m["objects"] = objects;
  write_manifest(m, dir);
}

GroundTruth load_ground_truth(const fs::path& dir) {
  const json m = read_manifest(dir, "pglue-gt");
  GroundTruth gt;
  gt.width = m.at("width").get<int>();
  gt.height = m.at("height").get<int>();
  gt.keyframe_count = m.at("keyframe_count").get<int>();

  const auto pts = name_list(m, "pointmaps", gt.keyframe_count, dir);
  const auto val = name_list(m, "validity", gt.keyframe_count, dir);
  const auto dyn = name_list(m, "dynamic_masks", gt.keyframe_count, dir);

  const std::size_t npx = static_cast<std::size_t>(gt.width) * gt.height;
  for (int k = 0; k < gt.keyframe_count; ++k) {
    PointMap pm(gt.width, gt.height);
    f32_to_pointmap(read_array(dir / pts[k], kTypeF32, gt.height, gt.width, 3), pm);
    const auto raw_val = read_array(dir / val[k], kTypeU8, gt.height, gt.width, 1);
    for (std::size_t i = 0; i < npx; ++i) {
      pm.validity()[i] = raw_val[i] ? 1 : 0;
      if (!raw_val[i]) pm.points()[i].setZero();
    }
    gt.clean.push_back(std::move(pm));
    const auto raw_dyn = read_array(dir / dyn[k], kTypeU8, gt.height, gt.width, 1);
    gt.dynamic.emplace_back(raw_dyn.begin(), raw_dyn.end());
  }

  for (const auto& jo : m.at("objects")) {
    GroundTruth::Object o;
    o.id = jo.at("id").get<ObjectId>();
    o.is_static = jo.at("static").get<bool>();
    for (const auto& jp : jo.at("poses")) o.poses.push_back(pose_from_json(jp));
    if (static_cast<int>(o.poses.size()) != gt.keyframe_count) {
      throw ManifestError("ground-truth object " + std::to_string(o.id) + " has wrong pose count");
    }
    gt.objects.push_back(std::move(o));
  }
  return gt;
}

void save_reconstruction(const std::vector<SceneReconstruction>& recons, const fs::path& dir) {
  fs::create_directories(dir);
  json m;
  m["format"] = "pglue-recon";
  m["version"] = 1;
  json entries = json::array();
  int width = 0, height = 0;
  for (const auto& recon : recons) {
    for (const auto& wm : recon.warped) {
      width = wm.points.width();
      height = wm.points.height();
      char base[64];
      std::snprintf(base, sizeof(base), "warp_%04d_to_%04d", wm.source_frame, recon.target_time);
      const std::string pts = std::string(base) + ".pts";
      const std::string val = std::string(base) + ".val";
      const std::string msk = std::string(base) + ".msk";
      write_array(dir / pts, kTypeF32, height, width, 3, pointmap_to_f32(wm.points).data());
      write_array(dir / val, kTypeU8, height, width, 1, wm.points.validity().data());
      write_array(dir / msk, kTypeU16, height, width, 1, wm.provenance.data());
      json e;
      e["source"] = wm.source_frame;
      e["target"] = recon.target_time;
      e["points"] = pts;
      e["validity"] = val;
      e["provenance"] = msk;
      entries.push_back(e);
    }
  }
  m["width"] = width;
  m["height"] = height;
  m["entries"] = entries;
  write_manifest(m, dir);
}

void save_reconstruction(const SceneReconstruction& recon, const fs::path& dir) {
  save_reconstruction(std::vector<SceneReconstruction>{recon}, dir);
}

std::vector<SceneReconstruction> load_reconstruction(const fs::path& dir) {
  const json m = read_manifest(dir, "pglue-recon");
  std::map<int, SceneReconstruction> by_target;
  const int width = m.value("width", 0);
  const int height = m.value("height", 0);
  const std::size_t npx = static_cast<std::size_t>(width) * height;
  for (const auto& e : m.at("entries")) {
    WarpedMap wm;
    wm.source_frame = e.at("source").get<int>();
    const int target = e.at("target").get<int>();
    wm.points = PointMap(width, height);
    f32_to_pointmap(read_array(dir / e.at("points").get<std::string>(), kTypeF32, height, width, 3), wm.points);
    const auto raw_val = read_array(dir / e.at("validity").get<std::string>(), kTypeU8, height, width, 1);
    for (std::size_t i = 0; i < npx; ++i) {
      wm.points.validity()[i] = raw_val[i] ? 1 : 0;
      if (!raw_val[i]) wm.points.points()[i].setZero();
    }
    const auto raw_msk = read_array(dir / e.at("provenance").get<std::string>(), kTypeU16, height, width, 1);
    const std::uint16_t* labels = reinterpret_cast<const std::uint16_t*>(raw_msk.data());
    wm.provenance.assign(labels, labels + npx);
    SceneReconstruction& recon = by_target[target];
    recon.target_time = target;
    recon.warped.push_back(std::move(wm));
  }
  std::vector<SceneReconstruction> out;
  for (auto& [target, recon] : by_target) out.push_back(std::move(recon));
  return out;
}

void save_poses(const SceneData& scene, const fs::path& dir, const std::string& scene_ref) {
  fs::create_directories(dir);
  json m;
  m["format"] = "pglue-poses";
  m["version"] = 1;
  m["scene"] = scene_ref;
  json objects = json::array();
  for (const auto& track : scene.objects) {
    json jo;
    jo["id"] = track.object_id;
    jo["static"] = track.is_static;
    jo["singular"] = track.singular;
    if (track.parent) {
      jo["parent"] = *track.parent;
    } else {
      jo["parent"] = nullptr;
    }
    json frames = json::array();
    json poses = json::array();
    for (const auto& prim : track.primitives) {
      frames.push_back(prim.keyframe_index);
      poses.push_back(pose_to_json(prim.pose));
    }
    jo["frames"] = frames;
    jo["poses"] = poses;
    json extra = json::array();
    for (const auto& [frame, pose] : track.extrapolated) {
      json je;
      je["frame"] = frame;
      je["pose"] = pose_to_json(pose);
      extra.push_back(je);
    }
    jo["extrapolated"] = extra;
    objects.push_back(jo);
  }
  m["objects"] = objects;

  std::ofstream out(dir / "poses.json", std::ios::trunc);
  if (!out) throw IoError("cannot write poses.json in " + dir.string());
  out << m.dump(2) << "\n";
}

std::string load_poses(SceneData& scene, const fs::path& dir) {
  const fs::path path = dir / "poses.json";
  std::ifstream in(path);
  if (!in) throw FormatError("missing poses.json: " + path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw FormatError("unparsable poses.json: " + std::string(e.what()));
  }
  if (m.value("format", "") != "pglue-poses") throw FormatError("not a pglue-poses file: " + path.string());

  for (const auto& jo : m.at("objects")) {
    const ObjectId id = jo.at("id").get<ObjectId>();
    ObjectTrack* track = scene.track_for(id);
    if (!track) throw ManifestError("poses.json names unknown object " + std::to_string(id));
    track->is_static = jo.at("static").get<bool>();
    track->singular = jo.at("singular").get<bool>();
    if (jo.contains("parent") && !jo.at("parent").is_null()) {
      track->parent = jo.at("parent").get<ObjectId>();
    } else {
      track->parent.reset();
    }
    const auto& frames = jo.at("frames");
    const auto& poses = jo.at("poses");
    if (frames.size() != track->primitives.size()) {
      throw ManifestError("poses.json frame count differs from track for object " + std::to_string(id));
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].get<int>() != track->primitives[i].keyframe_index) {
        throw ManifestError("poses.json frames differ from track for object " + std::to_string(id));
      }
      track->primitives[i].pose = pose_from_json(poses[i]);
    }
    track->extrapolated.clear();
    for (const auto& je : jo.at("extrapolated")) {
      track->extrapolated[je.at("frame").get<int>()] = pose_from_json(je.at("pose"));
    }
  }
  return m.value("scene", "");
}

}  // namespace pglue
