#pragma once

#include <string>
#include <vector>

#include "rdvo/config.hpp"
#include "rdvo/evaluation.hpp"
#include "rdvo/io.hpp"
#include "rdvo/pipeline.hpp"

namespace rdvo {

// Full odometry run over an on-disk sequence. labels_dir, when non-empty,
// receives one 8-bit plane-label PNG per frame.
struct OdometryRun {
  std::vector<TimedPose> trajectory;
  std::vector<FrameDiagnostics> diagnostics;
  std::vector<std::pair<int, IterationStat>> pose_log;
};
OdometryRun run_odometry(const Sequence& sequence, const OdometryConfig& config,
                         const std::string& labels_dir = {});

void write_pose_log_csv(const std::string& path,
                        const std::vector<std::pair<int, IterationStat>>& log);

// Depth-filter-only run driven by ground-truth poses (identity when absent).
struct FusionFrameStats {
  double timestamp = 0.0;
  double raw_rmse = -1.0;  // -1 when no clean depth is available
  double cgm_rmse = -1.0;
  double fused_rmse = -1.0;
};
struct FusionRun {
  std::vector<FusionFrameStats> stats;
};
FusionRun run_fusion(const Sequence& sequence, const OdometryConfig& config,
                     const std::string& out_dir);

// RMSE between the valid pixels both maps share; -1 when none.
double depth_rmse(const DepthMap& map, const DepthMap& reference);

// Entry point behind the rdvo binary: subcommands synth, odometry, fuse,
// eval, ablate.
int cli_main(int argc, const char* const* argv);

}  // namespace rdvo
