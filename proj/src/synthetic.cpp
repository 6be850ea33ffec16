#include "rdvo/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace rdvo {

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 json_vec(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed scene file " + path + ": " + e.what());
  }

  SceneSpec scene;
  const auto& cam = doc.at("camera");
  scene.camera.fx = cam.at("fx");
  scene.camera.fy = cam.at("fy");
  scene.camera.cx = cam.at("cx");
  scene.camera.cy = cam.at("cy");
  scene.camera.width = cam.at("width");
  scene.camera.height = cam.at("height");
  scene.camera.validate();

  for (const auto& j : doc.value("planes", nlohmann::json::array())) {
    ScenePlane p;
    p.center = json_vec(j.at("center"));
    p.edge_u = json_vec(j.at("edge_u"));
    p.edge_v = json_vec(j.at("edge_v"));
    scene.planes.push_back(p);
  }
  for (const auto& j : doc.value("lines", nlohmann::json::array())) {
    SceneLine l;
    l.a = json_vec(j.at("a"));
    l.b = json_vec(j.at("b"));
    l.descriptor_seed = j.value("seed", 0u);
    scene.lines.push_back(l);
  }
  for (const auto& j : doc.value("landmarks", nlohmann::json::array())) {
    SceneLandmark l;
    l.p = json_vec(j.at("p"));
    l.descriptor_seed = j.value("seed", 0u);
    scene.landmarks.push_back(l);
  }

  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    scene.noise.depth_noise = n.value("depth_noise", scene.noise.depth_noise);
    scene.noise.c_q = n.value("c_q", scene.noise.c_q);
    scene.noise.quantization = n.value("quantization", scene.noise.quantization);
    scene.noise.disparity_fb = n.value("disparity_fb", scene.noise.disparity_fb);
    scene.noise.disparity_step = n.value("disparity_step", scene.noise.disparity_step);
    scene.noise.outlier_fraction = n.value("outlier_fraction", scene.noise.outlier_fraction);
    scene.noise.pixel_jitter = n.value("pixel_jitter", scene.noise.pixel_jitter);
    scene.noise.descriptor_jitter = n.value("descriptor_jitter", scene.noise.descriptor_jitter);
  }
  scene.descriptor_dim = doc.value("descriptor_dim", 16);

  const auto& traj = doc.at("trajectory");
  const std::string type = traj.value("type", "list");
  if (type == "orbit") {
    scene.trajectory = orbit_trajectory(traj.at("frames"), traj.at("radius_mm"),
                                        traj.value("pitch_deg", 0.0),
                                        traj.value("revolutions", 1.0));
  } else if (type == "list") {
    for (const auto& j : traj.at("poses")) {
      TimedPose tp;
      tp.timestamp = j.at("timestamp");
      tp.pose.t = json_vec(j.at("t"));
      const auto& q = j.at("q");  // [x, y, z, w]
      tp.pose.q = Eigen::Quaterniond(q.at(3), q.at(0), q.at(1), q.at(2));
      tp.pose.normalize();
      scene.trajectory.push_back(tp);
    }
  } else {
    throw InputError("scene: unknown trajectory type " + type);
  }
  if (scene.trajectory.empty()) throw InputError("scene: empty trajectory");
  return scene;
}

void save_scene(const std::string& path, const SceneSpec& scene) {
  nlohmann::json doc;
  doc["camera"] = {{"fx", scene.camera.fx}, {"fy", scene.camera.fy}, {"cx", scene.camera.cx},
                   {"cy", scene.camera.cy}, {"width", scene.camera.width},
                   {"height", scene.camera.height}};
  for (const auto& p : scene.planes)
    doc["planes"].push_back(
        {{"center", vec_json(p.center)}, {"edge_u", vec_json(p.edge_u)}, {"edge_v", vec_json(p.edge_v)}});
  for (const auto& l : scene.lines)
    doc["lines"].push_back({{"a", vec_json(l.a)}, {"b", vec_json(l.b)}, {"seed", l.descriptor_seed}});
  for (const auto& l : scene.landmarks)
    doc["landmarks"].push_back({{"p", vec_json(l.p)}, {"seed", l.descriptor_seed}});
  doc["noise"] = {{"depth_noise", scene.noise.depth_noise},
                  {"c_q", scene.noise.c_q},
                  {"quantization", scene.noise.quantization},
                  {"disparity_fb", scene.noise.disparity_fb},
                  {"disparity_step", scene.noise.disparity_step},
                  {"outlier_fraction", scene.noise.outlier_fraction},
                  {"pixel_jitter", scene.noise.pixel_jitter},
                  {"descriptor_jitter", scene.noise.descriptor_jitter}};
  doc["descriptor_dim"] = scene.descriptor_dim;
  doc["trajectory"]["type"] = "list";
  for (const auto& tp : scene.trajectory) {
    doc["trajectory"]["poses"].push_back(
        {{"timestamp", tp.timestamp},
         {"t", vec_json(tp.pose.t)},
         {"q", {tp.pose.q.x(), tp.pose.q.y(), tp.pose.q.z(), tp.pose.q.w()}}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open scene for writing: " + path);
  out << doc.dump(2);
}

RenderedDepth render_depth(const SceneSpec& scene, const Pose& cam_to_world, std::mt19937_64& rng,
                           bool parallel) {
  const CameraIntrinsics& K = scene.camera;
  RenderedDepth out{DepthMap(K.width, K.height), DepthMap(K.width, K.height)};

  const Mat3 R = cam_to_world.rotation();
  const Vec3 origin = cam_to_world.t;

  // Precompute plane data in world coordinates.
  struct PlaneData {
    Vec3 n, c, eu, ev;
    double eu2, ev2;
  };
  std::vector<PlaneData> planes;
  for (const ScenePlane& p : scene.planes)
    planes.push_back({p.normal(), p.center, p.edge_u, p.edge_v, p.edge_u.squaredNorm(),
                      p.edge_v.squaredNorm()});

  parallel_rows(K.height, parallel, [&](int y) {
    for (int x = 0; x < K.width; ++x) {
      const Vec3 dir_w = R * K.ray(x, y);
      double best = std::numeric_limits<double>::infinity();
      for (const PlaneData& p : planes) {
        const double denom = p.n.dot(dir_w);
        if (std::abs(denom) < 1e-12) continue;
        const double s = p.n.dot(p.c - origin) / denom;
        if (s <= 1.0 || s >= best) continue;  // 1 mm near clip
        const Vec3 rel = origin + s * dir_w - p.c;
        if (std::abs(rel.dot(p.eu)) > p.eu2 || std::abs(rel.dot(p.ev)) > p.ev2) continue;
        best = s;
      }
      if (std::isfinite(best)) out.clean.z(x, y) = best;  // ray has unit z
    }
  });

  // Noise stages run serially so the map is a deterministic function of the
  // rng state.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      double z = out.clean.z(x, y);
      if (z <= 0.0) continue;
      if (scene.noise.depth_noise) z += gauss(rng) * scene.noise.c_q * z * z;
      if (scene.noise.quantization) {
        const double disp = scene.noise.disparity_fb / z;
        const double disp_q =
            std::round(disp / scene.noise.disparity_step) * scene.noise.disparity_step;
        z = disp_q > 0.0 ? scene.noise.disparity_fb / disp_q : 0.0;
      }
      out.noisy.z(x, y) = std::max(0.0, z);
    }
  }

  if (scene.noise.outlier_fraction > 0.0) {
    // flying pixels at depth discontinuities
    for (int y = 1; y < K.height - 1; ++y) {
      for (int x = 1; x < K.width - 1; ++x) {
        const double z = out.clean.z(x, y);
        if (z <= 0.0) continue;
        bool edge = false;
        for (int d = 0; d < 4 && !edge; ++d) {
          const int nx = x + (d == 0) - (d == 1);
          const int ny = y + (d == 2) - (d == 3);
          const double nz = out.clean.z(nx, ny);
          edge = nz <= 0.0 || std::abs(nz - z) > 100.0;
        }
        if (edge && uni(rng) < scene.noise.outlier_fraction) {
          const double f = 0.2 + 0.3 * uni(rng);
          out.noisy.z(x, y) = z * (uni(rng) < 0.5 ? 1.0 - f : 1.0 + f);
        }
      }
    }
  }
  return out;
}

Eigen::VectorXf synthetic_descriptor(uint32_t seed, int dim) {
  std::mt19937 rng(seed * 2654435761u + 0x9e3779b9u);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  Eigen::VectorXf d(dim);
  for (int i = 0; i < dim; ++i) d(i) = gauss(rng);
  return d;
}

FeatureFrame render_features(const SceneSpec& scene, const Pose& cam_to_world,
                             std::mt19937_64& rng) {
  const CameraIntrinsics& K = scene.camera;
  const Pose world_to_cam = cam_to_world.inverse();
  std::uniform_real_distribution<double> jitter(-0.5 * scene.noise.pixel_jitter,
                                                0.5 * scene.noise.pixel_jitter);
  std::normal_distribution<float> desc_jitter(0.0f, float(scene.noise.descriptor_jitter));

  FeatureFrame frame;
  for (const SceneLandmark& lm : scene.landmarks) {
    const Vec3 pc = world_to_cam.apply(lm.p);
    if (pc.z() <= 1.0) continue;
    Vec2 uv = K.project(pc);
    if (!K.contains(uv.x(), uv.y())) continue;
    if (scene.noise.pixel_jitter > 0.0) uv += Vec2(jitter(rng), jitter(rng));
    PointFeature f;
    f.pixel = uv;
    f.descriptor = synthetic_descriptor(lm.descriptor_seed, scene.descriptor_dim);
    for (int i = 0; i < f.descriptor.size(); ++i) f.descriptor(i) += desc_jitter(rng);
    frame.points.push_back(std::move(f));
  }

  for (const SceneLine& sl : scene.lines) {
    const Vec3 a = world_to_cam.apply(sl.a);
    const Vec3 b = world_to_cam.apply(sl.b);
    if (a.z() <= 1.0 || b.z() <= 1.0) continue;
    Vec2 ua = K.project(a);
    Vec2 ub = K.project(b);
    // Liang-Barsky clip to the image rectangle.
    const Vec2 d = ub - ua;
    double t0 = 0.0, t1 = 1.0;
    const double lo[2] = {0.0, 0.0};
    const double hi[2] = {double(K.width - 1), double(K.height - 1)};
    bool reject = false;
    for (int axis = 0; axis < 2 && !reject; ++axis) {
      const double p[2] = {-d(axis), d(axis)};
      const double q[2] = {ua(axis) - lo[axis], hi[axis] - ua(axis)};
      for (int side = 0; side < 2; ++side) {
        if (p[side] == 0.0) {
          if (q[side] < 0.0) reject = true;
        } else {
          const double r = q[side] / p[side];
          if (p[side] < 0.0)
            t0 = std::max(t0, r);
          else
            t1 = std::min(t1, r);
        }
      }
    }
    if (reject || t0 >= t1) continue;
    Vec2 ca = ua + t0 * d;
    Vec2 cb = ua + t1 * d;
    if ((cb - ca).norm() < 10.0) continue;
    if (scene.noise.pixel_jitter > 0.0) {
      ca += Vec2(jitter(rng), jitter(rng));
      cb += Vec2(jitter(rng), jitter(rng));
    }
    LineFeature f;
    f.p1 = ca;
    f.p2 = cb;
    f.descriptor = synthetic_descriptor(sl.descriptor_seed + 0x10000u, scene.descriptor_dim);
    for (int i = 0; i < f.descriptor.size(); ++i) f.descriptor(i) += desc_jitter(rng);
    frame.lines.push_back(std::move(f));
  }
  return frame;
}

void generate_sequence(const SceneSpec& scene, const std::string& out_dir, uint64_t seed,
                       double depth_scale) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/depth");
  fs::create_directories(out_dir + "/depth_gt");
  fs::create_directories(out_dir + "/features");

  std::vector<IndexEntry> depth_index, feature_index;
  std::vector<TimedPose> gt;
  char name[64];
  for (size_t i = 0; i < scene.trajectory.size(); ++i) {
    const TimedPose& tp = scene.trajectory[i];
    std::mt19937_64 rng(seed ^ (0x51ed2701ULL + i * 0x9e3779b97f4a7c15ULL));
    const RenderedDepth depth = render_depth(scene, tp.pose, rng);
    const FeatureFrame features = render_features(scene, tp.pose, rng);

    std::snprintf(name, sizeof(name), "%.6f", tp.timestamp);
    const std::string stamp(name);
    write_depth_png(out_dir + "/depth/" + stamp + ".png", depth.noisy, depth_scale);
    write_depth_png(out_dir + "/depth_gt/" + stamp + ".png", depth.clean, depth_scale);
    write_feature_frame(out_dir + "/features/" + stamp + ".json", features);
    depth_index.push_back({tp.timestamp, "depth/" + stamp + ".png"});
    feature_index.push_back({tp.timestamp, "features/" + stamp + ".json"});
    gt.push_back(tp);
  }
  write_index(out_dir + "/depth.txt", depth_index);
  write_index(out_dir + "/features.txt", feature_index);
  write_trajectory(out_dir + "/groundtruth.txt", gt);
  write_calibration(out_dir + "/calib.txt", scene.camera);
}

std::vector<TimedPose> orbit_trajectory(int frames, double radius_mm, double pitch_deg,
                                        double revolutions) {
  std::vector<TimedPose> out;
  const double pitch = pitch_deg * M_PI / 180.0;
  for (int i = 0; i < frames; ++i) {
    const double phi = 2.0 * M_PI * revolutions * double(i) / frames;
    const Vec3 pos(radius_mm * std::cos(phi), 0.0, radius_mm * std::sin(phi));
    const Vec3 forward(std::cos(pitch) * std::cos(phi), std::sin(pitch),
                       std::cos(pitch) * std::sin(phi));
    // y-down camera: x = y_approx x z, y = z x x
    const Vec3 x_cam = Vec3::UnitY().cross(forward).normalized();
    const Vec3 y_cam = forward.cross(x_cam).normalized();
    Mat3 R;
    R.col(0) = x_cam;
    R.col(1) = y_cam;
    R.col(2) = forward;
    TimedPose tp;
    tp.timestamp = double(i) / 30.0;
    tp.pose.q = Eigen::Quaterniond(R);
    tp.pose.t = pos;
    tp.pose.normalize();
    out.push_back(tp);
  }
  return out;
}

SceneSpec make_room_scene(int frames, int landmarks, int lines) {
  SceneSpec scene;
  scene.camera = {250.0, 250.0, 159.5, 119.5, 320, 240};

  const double half = 2000.0;   // 4 m square room
  const double wall_h = 1400.0;
  const double floor_y = 1300.0;
  // 4 walls facing inward plus the floor
  scene.planes.push_back({{0, 0, half}, {half, 0, 0}, {0, wall_h, 0}});
  scene.planes.push_back({{0, 0, -half}, {half, 0, 0}, {0, wall_h, 0}});
  scene.planes.push_back({{half, 0, 0}, {0, 0, half}, {0, wall_h, 0}});
  scene.planes.push_back({{-half, 0, 0}, {0, 0, half}, {0, wall_h, 0}});
  scene.planes.push_back({{0, floor_y, 0}, {half, 0, 0}, {0, 0, half}});

  // landmarks on a staggered grid per wall, inside the band the pitched
  // camera actually sees, with a little jitter to avoid exact symmetry
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> jitter(-120.0, 120.0);
  const int per_wall = (landmarks + 3) / 4;
  for (int i = 0; i < landmarks; ++i) {
    const int wall = i % 4;
    const int slot = i / 4;
    const int cols = (per_wall + 1) / 2;
    const double a = (-0.8 + 1.6 * double(slot % cols) / std::max(1, cols - 1)) * half + jitter(rng);
    const double v = (slot / cols == 0 ? 0.12 : 0.55) * wall_h + jitter(rng);
    Vec3 p;
    switch (wall) {
      case 0: p = {a, v, half - 1.0}; break;
      case 1: p = {a, v, -half + 1.0}; break;
      case 2: p = {half - 1.0, v, a}; break;
      default: p = {-half + 1.0, v, a}; break;
    }
    scene.landmarks.push_back({p, uint32_t(i + 1)});
  }

  // line segments: verticals, horizontals and diagonals on the walls
  auto wall_point = [&](int wall, double a, double v) -> Vec3 {
    switch (wall) {
      case 0: return {a, v, half - 1.0};
      case 1: return {a, v, -half + 1.0};
      case 2: return {half - 1.0, v, a};
      default: return {-half + 1.0, v, a};
    }
  };
  for (int i = 0; i < lines; ++i) {
    const int wall = i % 4;
    SceneLine l;
    switch (i / 4) {
      case 0:  // vertical
        l.a = wall_point(wall, -900.0 + 300.0 * wall, -wall_h * 0.1);
        l.b = wall_point(wall, -900.0 + 300.0 * wall, wall_h * 0.7);
        break;
      case 1:  // horizontal
        l.a = wall_point(wall, -half * 0.8, 450.0 - 120.0 * wall);
        l.b = wall_point(wall, half * 0.8, 450.0 - 120.0 * wall);
        break;
      default:  // diagonal
        l.a = wall_point(wall, -half * 0.6, -wall_h * 0.1);
        l.b = wall_point(wall, half * 0.6, wall_h * 0.6);
        break;
    }
    l.descriptor_seed = uint32_t(500 + i);
    scene.lines.push_back(l);
  }

  scene.trajectory = orbit_trajectory(frames, 400.0, 12.0);
  scene.noise.depth_noise = true;
  scene.noise.quantization = false;
  scene.noise.outlier_fraction = 0.0;
  return scene;
}

SceneSpec make_static_plane_scene(int frames, double distance_mm, double tilt_deg,
                                  bool quantization) {
  SceneSpec scene;
  scene.camera = {250.0, 250.0, 159.5, 119.5, 320, 240};

  const double tilt = tilt_deg * M_PI / 180.0;
  // plane center straight ahead, normal tilted about the y axis
  const Vec3 normal(std::sin(tilt), 0.0, -std::cos(tilt));
  const Vec3 eu = Vec3(std::cos(tilt), 0.0, std::sin(tilt)) * 4000.0;
  const Vec3 ev = normal.cross(eu).normalized() * 4000.0;
  scene.planes.push_back({{0, 0, distance_mm}, eu, ev});

  for (int i = 0; i < frames; ++i) {
    TimedPose tp;
    tp.timestamp = double(i) / 30.0;
    scene.trajectory.push_back(tp);  // static camera at the origin
  }
  scene.noise.quantization = quantization;
  scene.noise.outlier_fraction = 0.0;
  return scene;
}

}  // namespace rdvo
