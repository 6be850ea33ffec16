#pragma once

#include <cstdint>
#include <string>

#include "rdvo/depth_filter.hpp"
#include "rdvo/geometry.hpp"
#include "rdvo/matching.hpp"
#include "rdvo/pose_estimation.hpp"

namespace rdvo {

enum class DepthModel { kSensor, kCgm, kOgm };
DepthModel depth_model_from_string(const std::string& s);
std::string to_string(DepthModel m);

// Which primitives take part in the pose estimation.
struct FeatureSelection {
  bool points = true;
  bool lines = true;
  bool planes = true;
};
FeatureSelection features_from_string(const std::string& s);
std::string to_string(const FeatureSelection& f);

struct OdometryConfig {
  // depth filter
  int window_length = 10;
  int fuse_k = 5;
  double fuse_gate_sigma = 3.0;
  double prune_threshold = 25.0;  // mm^2, largest translation eigenvalue
  double c_q = 1.425e-6;
  double depth_scale = 5.0;       // png value per mm

  // fitting
  RansacParams ransac;
  int line_max_samples = 100;
  SegmentationParams segmentation;

  // matching
  MatchParams matching;

  // pose estimation
  EstimateParams estimation;
  double pose_gate = 25.0;        // mm^2
  double velocity_decay = 0.9;

  DepthModel depth_model = DepthModel::kOgm;
  FeatureSelection features;
  uint64_t seed = 0;
  double association_offset = 0.02;  // s
  bool log_pose_iterations = false;  // per-iteration cost/weight diagnostics

  FuseParams fuse_params() const {
    return FuseParams{fuse_k, fuse_gate_sigma, true};
  }
  SensorNoiseModel noise_model() const { return SensorNoiseModel{c_q}; }

  void validate() const;

  // key = value file; unknown keys are rejected.
  static OdometryConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace rdvo
