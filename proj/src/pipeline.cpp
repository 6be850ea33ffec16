#include "rdvo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rdvo/geometry.hpp"
#include "rdvo/pose_estimation.hpp"

namespace rdvo {

OdometryPipeline::OdometryPipeline(OdometryConfig config, CameraIntrinsics camera)
    : config_(std::move(config)), camera_(camera) {
  config_.validate();
  camera_.validate();
  cosines_ = cosine_map(camera_);
  window_.max_length = config_.window_length;
}

OdometryPipeline::Stage1Maps OdometryPipeline::filter_spatial(const DepthMap& raw) const {
  VarianceMap var = sensor_variance_map(raw, config_.noise_model());
  if (config_.depth_model == DepthModel::kSensor) return {raw, std::move(var)};
  auto [z, v] = gm_convolve(raw, var);
  return {std::move(z), std::move(v)};
}

void OdometryPipeline::fit_features(FeatureFrame& features, const DepthMap& depth,
                                    const VarianceMap& variance) {
  for (PointFeature& f : features.points) {
    const int px = int(std::lround(f.pixel.x()));
    const int py = int(std::lround(f.pixel.y()));
    if (!depth.z.inside(px, py) || !depth.valid(px, py)) continue;
    f.p3d = backproject(f.pixel, depth.z(px, py), variance.var(px, py), camera_);
  }
  for (LineFeature& f : features.lines) {
    try {
      const auto samples = sample_line_pixels(f.p1, f.p2, depth, config_.line_max_samples);
      std::vector<Point3> pts;
      pts.reserve(samples.size());
      for (const LineSample& s : samples) {
        // backproject along the exact sub-pixel ray; rasterized rays would
        // shift the whole sample set by a common sub-pixel offset
        const int px = int(s.pixel.x()), py = int(s.pixel.y());
        pts.push_back(backproject(s.exact, s.z, variance.var(px, py), camera_));
      }
      RansacParams rp = config_.ransac;
      rp.seed = config_.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
      f.l3d = fit_line_wls(ransac_line(pts, rp));
    } catch (const Error&) {
      f.l3d.reset();  // not enough valid depth, keep the 2D side only
    }
  }
  const OrganizedCloud cloud = backproject_cloud(depth, variance, camera_);
  features.planes = segment_planes(cloud, camera_, config_.segmentation);
}

std::optional<FrameState> OdometryPipeline::process_frame(double timestamp,
                                                          const DepthMap& raw_depth,
                                                          FeatureFrame features) {
  if (timestamp <= last_timestamp_) return std::nullopt;  // regressing frame, dropped
  last_timestamp_ = timestamp;

  FrameState state;
  state.id = next_frame_id_++;
  state.timestamp = timestamp;

  // (1) sensor model + GM convolution
  Stage1Maps cgm = filter_spatial(raw_depth);

  // (2) plane extraction on the convolved cloud for this frame's estimate
  if (has_previous_ && config_.features.planes) {
    const OrganizedCloud cloud = backproject_cloud(cgm.depth, cgm.variance, camera_);
    features.planes = segment_planes(cloud, camera_, config_.segmentation);
  }

  // (3)-(5): match against the previous frame, estimate, validate
  Pose relative = Pose::identity();
  if (has_previous_) {
    const MatchSets matches = match_frames(previous_features_, features, config_.matching);

    std::vector<PointMatch> s1;
    std::vector<LineMatch> s2;
    std::vector<PlaneMatch> s3;
    if (config_.features.points) {
      for (const auto& [pi, ci] : matches.points) {
        if (!previous_features_.points[pi].p3d) continue;
        s1.push_back({*previous_features_.points[pi].p3d, features.points[ci].pixel});
      }
    }
    if (config_.features.lines) {
      for (const auto& [pi, ci] : matches.lines) {
        const auto& prev = previous_features_.lines[pi];
        if (!prev.l3d) continue;
        LineMatch m;
        m.prev_p1 = prev.l3d->endpoint_a;
        m.prev_p2 = prev.l3d->endpoint_b;
        m.cov_p1 = prev.l3d->cov_endpoint_a;
        m.cov_p2 = prev.l3d->cov_endpoint_b;
        m.cur_line = line_hessian_2d(features.lines[ci].p1, features.lines[ci].p2);
        s2.push_back(m);
      }
    }
    if (config_.features.planes) {
      for (const auto& [pi, ci] : matches.planes)
        s3.push_back({previous_features_.planes[pi].plane, features.planes[ci].plane});
    }
    state.diag.point_matches = int(s1.size());
    state.diag.line_matches = int(s2.size());
    state.diag.plane_matches = int(s3.size());

    const Pose init = previous_relative_.value_or(Pose::identity());
    bool ok = false;
    std::vector<IterationStat> iteration_stats;
    try {
      EstimateResult est =
          estimate_pose(s1, s2, s3, camera_, init, config_.estimation,
                        config_.log_pose_iterations ? &iteration_stats : nullptr);
      state.diag.converged = est.converged;
      Eigen::SelfAdjointEigenSolver<Mat3> es(est.pose.cov.topLeftCorner<3, 3>());
      state.diag.lambda_max_translation = es.eigenvalues().maxCoeff();
      if (validate_pose(est.pose.cov, config_.pose_gate)) {
        relative = est.pose;
        ok = true;
      }
    } catch (const Error&) {
      ok = false;
    }
    for (const IterationStat& it : iteration_stats) pose_log_.emplace_back(state.id, it);
    if (!ok) {
      // decaying velocity model replaces the rejected estimate
      state.diag.fallback = true;
      if (previous_relative_) {
        relative = velocity_decay(*previous_relative_, config_.velocity_decay);
      } else {
        relative = Pose::identity();
        relative.cov = Mat6::Identity() * 1e6;
      }
    }

    // unweighted residual rms at the accepted pose, for the diagnostics
    double sq = 0.0;
    int n = 0;
    for (const PointMatch& m : s1) {
      const PointResidual r = point_residual(m.prev, m.obs, relative, camera_);
      if (!r.cheirality_ok) continue;
      sq += r.value.squaredNorm();
      n += 2;
    }
    for (const LineMatch& m : s2) {
      const LineResidual r = line_residual(m, relative, camera_);
      if (!r.cheirality_ok) continue;
      sq += r.value.squaredNorm();
      n += 2;
    }
    state.diag.residual_rms = n > 0 ? std::sqrt(sq / n) : 0.0;
  }
  state.relative = relative;

  // (6) window update with the propagated step uncertainty
  if (config_.depth_model == DepthModel::kOgm) {
    if (!pending_points_.empty()) {
      window_push(window_, std::move(pending_points_), relative);
      window_prune(window_, config_.prune_threshold);
    }
    pending_points_.clear();
  }

  // (7) temporal fusion in range space
  DepthMap fused_depth;
  VarianceMap fused_var;
  if (config_.depth_model == DepthModel::kOgm) {
    DepthMap range(camera_.width, camera_.height);
    VarianceMap range_var(camera_.width, camera_.height);
    for (int y = 0; y < camera_.height; ++y) {
      for (int x = 0; x < camera_.width; ++x) {
        const double z = cgm.depth.z(x, y);
        if (z <= 0.0) continue;
        auto [r, vr] = depth_to_range(z, cgm.variance.var(x, y), cosines_(x, y));
        range.z(x, y) = r;
        range_var.var(x, y) = vr;
      }
    }
    auto fused = temporal_fuse(window_, range, range_var, cosines_, camera_,
                               config_.fuse_params());
    fused_depth = std::move(fused.first);
    fused_var = std::move(fused.second);
    pending_points_ = collect_range_points(range, range_var, camera_);
  } else {
    fused_depth = cgm.depth;
    fused_var = cgm.variance;
  }

  // (8) 3D feature fitting on the fused maps, stored for the next frame
  fit_features(features, fused_depth, fused_var);

  cumulative_ = has_previous_ ? compose(relative, cumulative_) : Pose::identity();
  state.trajectory = cumulative_;
  state.fused_depth = std::move(fused_depth);
  state.fused_variance = std::move(fused_var);
  state.diag.frame_id = state.id;
  state.diag.timestamp = timestamp;

  trajectory_.push_back({timestamp, cumulative_.inverse()});
  diagnostics_.push_back(state.diag);
  previous_features_ = features;
  previous_relative_ = relative;
  has_previous_ = true;
  state.features = std::move(features);
  return state;
}

void write_diagnostics_csv(const std::string& path, const std::vector<FrameDiagnostics>& diags) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file: " + path);
  out << "frame,timestamp,point_matches,line_matches,plane_matches,residual_rms,"
         "lambda_max_translation,fallback,converged\n";
  out.precision(9);
  for (const FrameDiagnostics& d : diags) {
    out << d.frame_id << ',' << d.timestamp << ',' << d.point_matches << ',' << d.line_matches
        << ',' << d.plane_matches << ',' << d.residual_rms << ',' << d.lambda_max_translation
        << ',' << int(d.fallback) << ',' << int(d.converged) << '\n';
  }
}

}  // namespace rdvo
