#pragma once

#include <random>
#include <string>
#include <vector>

#include "rdvo/core.hpp"
#include "rdvo/io.hpp"
#include "rdvo/matching.hpp"
#include "rdvo/pose.hpp"

namespace rdvo {

// Finite rectangle: center +/- edge_u +/- edge_v, normal = unit(edge_u x edge_v).
struct ScenePlane {
  Vec3 center = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
};

struct SceneLine {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  uint32_t descriptor_seed = 0;
};

struct SceneLandmark {
  Vec3 p = Vec3::Zero();
  uint32_t descriptor_seed = 0;
};

struct NoiseSpec {
  bool depth_noise = true;          // quadratic law sigma_z = c_q z^2
  double c_q = 1.425e-6;
  bool quantization = false;        // disparity-domain rounding
  double disparity_fb = 39375.0;    // focal * baseline, px*mm (75 mm baseline)
  double disparity_step = 0.125;    // px
  double outlier_fraction = 0.005;  // of depth-discontinuity pixels
  double pixel_jitter = 1.0;        // width of the uniform feature jitter, px
  double descriptor_jitter = 0.02;
};

struct SceneSpec {
  CameraIntrinsics camera;
  std::vector<ScenePlane> planes;
  std::vector<SceneLine> lines;
  std::vector<SceneLandmark> landmarks;
  std::vector<TimedPose> trajectory;  // camera-to-world
  NoiseSpec noise;
  int descriptor_dim = 16;
};

SceneSpec load_scene(const std::string& path);
void save_scene(const std::string& path, const SceneSpec& scene);

struct RenderedDepth {
  DepthMap noisy;
  DepthMap clean;
};

// Ray-cast of the nearest surface per pixel, with optional noise stages.
// cam_to_world is the frame's ground-truth pose.
RenderedDepth render_depth(const SceneSpec& scene, const Pose& cam_to_world, std::mt19937_64& rng,
                           bool parallel = true);

// Visible landmarks and line segments with jittered pixels and per-feature
// descriptors; nothing 3D leaves this function, 3D comes from the depth maps.
FeatureFrame render_features(const SceneSpec& scene, const Pose& cam_to_world,
                             std::mt19937_64& rng);

// Renders the whole trajectory into a sequence directory understood by the
// loader: depth/, depth_gt/, features/, depth.txt, features.txt,
// groundtruth.txt, calib.txt.
void generate_sequence(const SceneSpec& scene, const std::string& out_dir, uint64_t seed,
                       double depth_scale);

// Camera orbit in the x-z plane looking outward, pitched down; frames spaced
// 1/30 s.
std::vector<TimedPose> orbit_trajectory(int frames, double radius_mm, double pitch_deg,
                                        double revolutions = 1.0);

// Bundled demo: room of 4 walls and a floor with point landmarks and line
// segments; used by the end-to-end tests and the README walkthrough.
SceneSpec make_room_scene(int frames = 100, int landmarks = 40, int lines = 12);

// Single tilted plane facing a static camera; used by the fusion studies.
SceneSpec make_static_plane_scene(int frames = 10, double distance_mm = 1500.0,
                                  double tilt_deg = 25.0, bool quantization = true);

Eigen::VectorXf synthetic_descriptor(uint32_t seed, int dim);

}  // namespace rdvo
