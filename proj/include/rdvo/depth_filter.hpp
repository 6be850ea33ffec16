#pragma once

#include <utility>
#include <vector>

#include "rdvo/core.hpp"
#include "rdvo/pose.hpp"

namespace rdvo {

// Quadratic depth noise law sigma_z = c_q * z^2 (z in mm).
struct SensorNoiseModel {
  double c_q = 1.425e-6;  // mm^-1
};

// Variance in mm^2 of a single depth measurement; 0 for invalid (z = 0).
double sensor_variance(double z, const SensorNoiseModel& model);

VarianceMap sensor_variance_map(const DepthMap& depth, const SensorNoiseModel& model,
                                bool parallel = true);

// Cosine of the incidence angle of each pixel's projection ray; exactly 1 at
// the principal point.
Image<double> cosine_map(const CameraIntrinsics& K);

inline std::pair<double, double> depth_to_range(double z, double var_z, double cos_alpha) {
  return {z / cos_alpha, var_z / (cos_alpha * cos_alpha)};
}
inline std::pair<double, double> range_to_depth(double r, double var_r, double cos_alpha) {
  return {r * cos_alpha, var_r * (cos_alpha * cos_alpha)};
}

// 3x3 Gaussian-mixture convolution: per pixel, the output mean/variance are
// the moments of the kernel-weighted mixture of the valid neighbors
// (out-of-image and invalid pixels drop out through the indicator).
std::pair<DepthMap, VarianceMap> gm_convolve(const DepthMap& depth, const VarianceMap& var,
                                             bool parallel = true);

// One stored range measurement: the 3D point in its source frame plus the
// scalar range variance, which is rotation invariant and therefore carried
// across frames unchanged.
struct RangePoint {
  Vec3 p = Vec3::Zero();
  double var_r = 0.0;
};

struct WindowFrame {
  int id = 0;
  Pose cum;       // maps this frame's coordinates into the window head frame
  Mat6 cum_cov = Mat6::Zero();
  std::vector<RangePoint> points;
};

struct RangePointWindow {
  int max_length = 10;
  std::vector<WindowFrame> frames;  // oldest first
  int next_id = 0;
  bool empty() const { return frames.empty(); }
};

// Shifts the window head to a new frame: every stored cumulative pose (and
// covariance, via the EKF propagation) is composed with rel, and the given
// points are appended as a new frame whose coordinates are pre-composition,
// i.e. the old head frame. rel.cov is the process noise of the step.
void window_push(RangePointWindow& window, std::vector<RangePoint> points, const Pose& rel);

// Drops frames whose translation-block largest eigenvalue exceeds the
// threshold (mm^2); remaining order preserved.
void window_prune(RangePointWindow& window, double translation_threshold);

struct FuseParams {
  int gate_min_members = 5;
  double gate_sigma = 3.0;
  bool gate_enabled = true;
};

// Range-space temporal fusion. current_range/current_var are the
// GM-convolved maps of the head frame converted to range; window points are
// projected into the head grid (nearest pixel), newest frame first, with the
// current measurement as the first member of its pixel. Once a pixel holds
// gate_min_members, further members must fall within gate_sigma stds of the
// running mixture state. Output is converted back to depth.
std::pair<DepthMap, VarianceMap> temporal_fuse(const RangePointWindow& window,
                                               const DepthMap& current_range,
                                               const VarianceMap& current_var,
                                               const Image<double>& cosines,
                                               const CameraIntrinsics& K,
                                               const FuseParams& params = {},
                                               bool parallel = true);

// Range points of a frame's own grid (for the next window_push).
std::vector<RangePoint> collect_range_points(const DepthMap& range, const VarianceMap& var_r,
                                             const CameraIntrinsics& K);

}  // namespace rdvo
