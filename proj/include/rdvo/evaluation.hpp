#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdvo/config.hpp"
#include "rdvo/core.hpp"
#include "rdvo/io.hpp"

namespace rdvo {

// One frame of an on-disk sequence; maps are loaded lazily by the caller.
struct SequenceFrame {
  double timestamp = 0.0;
  std::string depth_path;
  std::string feature_path;
  std::string gt_depth_path;  // empty when the sequence has no clean depth
};

struct Sequence {
  std::string directory;
  CameraIntrinsics camera;
  double depth_scale = 5.0;
  std::vector<SequenceFrame> frames;
  std::vector<TimedPose> groundtruth;  // empty when absent
  int skipped_frames = 0;              // unassociated within the offset
};

// Loads depth.txt / features.txt / calib.txt (+ groundtruth.txt, depth_gt/
// when present), associating depth and feature stamps within
// config.association_offset. Missing or corrupt index files raise IoError
// naming the path; unmatched frames are skipped and counted.
Sequence load_tum_sequence(const std::string& directory, const OdometryConfig& config);

// Interpolated pose at the query time: linear translation, spherical
// rotation. nullopt outside the trajectory's span.
std::optional<Pose> interpolate_pose(const std::vector<TimedPose>& trajectory, double timestamp);

struct RpeResult {
  double translational_rmse = 0.0;  // mm
  double rotational_rmse = 0.0;     // deg
  int pairs = 0;
};

// Relative pose error per `interval` seconds (pairs matched within
// pair_tolerance); ground truth is interpolated at the estimate timestamps.
RpeResult compute_rpe(const std::vector<TimedPose>& estimate, const std::vector<TimedPose>& truth,
                      double interval = 1.0, double pair_tolerance = 0.05);

// Absolute trajectory error: closed-form rigid alignment of the estimated
// positions to the interpolated ground truth, then translational RMSE (mm).
double compute_ate(const std::vector<TimedPose>& estimate, const std::vector<TimedPose>& truth);

// Umeyama-style rigid alignment (no scale) of src onto dst.
Pose align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

}  // namespace rdvo
