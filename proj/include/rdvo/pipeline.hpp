#pragma once

#include <optional>
#include <vector>

#include "rdvo/config.hpp"
#include "rdvo/core.hpp"
#include "rdvo/depth_filter.hpp"
#include "rdvo/io.hpp"
#include "rdvo/matching.hpp"
#include "rdvo/pose.hpp"
#include "rdvo/pose_estimation.hpp"

namespace rdvo {

struct FrameDiagnostics {
  int frame_id = 0;
  double timestamp = 0.0;
  int point_matches = 0;
  int line_matches = 0;
  int plane_matches = 0;
  double residual_rms = 0.0;          // px, unweighted point/line residuals
  double lambda_max_translation = 0.0;  // mm^2
  bool fallback = false;
  bool converged = false;
};

struct FrameState {
  int id = 0;
  double timestamp = 0.0;
  DepthMap fused_depth;
  VarianceMap fused_variance;
  FeatureFrame features;  // 3D fitted from the fused maps, matched next frame
  Pose relative;          // current <- previous
  Pose trajectory;        // current <- first
  FrameDiagnostics diag;
};

// Frame-to-frame odometry loop: filter, extract and fit, match, estimate,
// fuse, re-fit, propagate. Frames must arrive in timestamp order; regressing
// frames are dropped.
class OdometryPipeline {
 public:
  OdometryPipeline(OdometryConfig config, CameraIntrinsics camera);

  // features carries the externally detected 2D points/lines (descriptors
  // included); everything 3D is fitted in here. Returns nullopt when the
  // frame is dropped for a regressing timestamp.
  std::optional<FrameState> process_frame(double timestamp, const DepthMap& raw_depth,
                                          FeatureFrame features);

  // Camera poses in the first frame's coordinates, TUM-ready.
  const std::vector<TimedPose>& trajectory() const { return trajectory_; }
  const std::vector<FrameDiagnostics>& diagnostics() const { return diagnostics_; }

  // (frame id, iteration) pairs, filled when config.log_pose_iterations is set.
  const std::vector<std::pair<int, IterationStat>>& pose_log() const { return pose_log_; }

  const OdometryConfig& config() const { return config_; }

 private:
  struct Stage1Maps {
    DepthMap depth;
    VarianceMap variance;
  };
  Stage1Maps filter_spatial(const DepthMap& raw) const;
  void fit_features(FeatureFrame& features, const DepthMap& depth, const VarianceMap& variance);

  OdometryConfig config_;
  CameraIntrinsics camera_;
  Image<double> cosines_;

  bool has_previous_ = false;
  FeatureFrame previous_features_;
  std::optional<Pose> previous_relative_;
  Pose cumulative_;  // current <- first
  double last_timestamp_ = -std::numeric_limits<double>::infinity();
  int next_frame_id_ = 0;

  RangePointWindow window_;
  std::vector<RangePoint> pending_points_;  // current frame's C-GM ranges, pushed next frame

  std::vector<TimedPose> trajectory_;
  std::vector<FrameDiagnostics> diagnostics_;
  std::vector<std::pair<int, IterationStat>> pose_log_;
};

void write_diagnostics_csv(const std::string& path, const std::vector<FrameDiagnostics>& diags);

}  // namespace rdvo
