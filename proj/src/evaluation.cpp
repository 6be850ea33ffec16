#include "rdvo/evaluation.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

namespace rdvo {

Sequence load_tum_sequence(const std::string& directory, const OdometryConfig& config) {
  namespace fs = std::filesystem;
  Sequence seq;
  seq.directory = directory;
  seq.depth_scale = config.depth_scale;
  seq.camera = read_calibration(directory + "/calib.txt");

  const std::vector<IndexEntry> depth_index = read_index(directory + "/depth.txt");
  const std::vector<IndexEntry> feature_index = read_index(directory + "/features.txt");

  // associate each depth stamp with the nearest feature stamp within the
  // configured offset
  for (const IndexEntry& d : depth_index) {
    const IndexEntry* best = nullptr;
    double best_dt = config.association_offset;
    for (const IndexEntry& f : feature_index) {
      const double dt = std::abs(f.timestamp - d.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &f;
      }
    }
    if (!best) {
      ++seq.skipped_frames;
      continue;
    }
    SequenceFrame frame;
    frame.timestamp = d.timestamp;
    frame.depth_path = directory + "/" + d.path;
    frame.feature_path = directory + "/" + best->path;
    const std::string gt_candidate =
        directory + "/depth_gt/" + fs::path(d.path).filename().string();
    if (fs::exists(gt_candidate)) frame.gt_depth_path = gt_candidate;
    seq.frames.push_back(std::move(frame));
  }
  if (seq.skipped_frames > 0)
    std::cerr << "warning: skipped " << seq.skipped_frames
              << " frames without feature association\n";

  if (fs::exists(directory + "/groundtruth.txt"))
    seq.groundtruth = read_trajectory(directory + "/groundtruth.txt");
  return seq;
}

std::optional<Pose> interpolate_pose(const std::vector<TimedPose>& trajectory, double timestamp) {
  if (trajectory.empty()) return std::nullopt;
  const auto upper = std::upper_bound(
      trajectory.begin(), trajectory.end(), timestamp,
      [](double t, const TimedPose& p) { return t < p.timestamp; });
  if (upper == trajectory.begin()) {
    return trajectory.front().timestamp == timestamp ? std::optional<Pose>(trajectory.front().pose)
                                                     : std::nullopt;
  }
  const TimedPose& a = *(upper - 1);
  if (a.timestamp == timestamp) return a.pose;  // exact hit stays bitwise exact
  if (upper == trajectory.end()) return std::nullopt;
  const TimedPose& b = *upper;
  const double s = (timestamp - a.timestamp) / (b.timestamp - a.timestamp);
  Pose out;
  out.t = a.pose.t + s * (b.pose.t - a.pose.t);
  out.q = a.pose.q.slerp(s, b.pose.q);
  out.normalize();
  return out;
}

RpeResult compute_rpe(const std::vector<TimedPose>& estimate, const std::vector<TimedPose>& truth,
                      double interval, double pair_tolerance) {
  RpeResult res;
  double sum_t2 = 0.0, sum_r2 = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double target = estimate[i].timestamp + interval;
    // nearest later estimate pose within the tolerance
    size_t best = estimate.size();
    double best_dt = pair_tolerance;
    for (size_t j = i + 1; j < estimate.size(); ++j) {
      const double dt = std::abs(estimate[j].timestamp - target);
      if (dt <= best_dt) {
        best_dt = dt;
        best = j;
      }
      if (estimate[j].timestamp > target + pair_tolerance) break;
    }
    if (best == estimate.size()) continue;
    const auto gt_i = interpolate_pose(truth, estimate[i].timestamp);
    const auto gt_j = interpolate_pose(truth, estimate[best].timestamp);
    if (!gt_i || !gt_j) continue;

    // TUM convention: motion i -> j expressed in frame i
    const Pose est_rel = compose(estimate[i].pose.inverse(), estimate[best].pose);
    const Pose gt_rel = compose(gt_i->inverse(), *gt_j);
    // identical relative motions contribute exactly zero
    if (est_rel.t != gt_rel.t || est_rel.q.coeffs() != gt_rel.q.coeffs()) {
      const Pose err = compose(gt_rel.inverse(), est_rel);
      sum_t2 += err.t.squaredNorm();
      const double angle = 2.0 * std::atan2(err.q.vec().norm(), std::abs(err.q.w()));
      sum_r2 += angle * angle;
    }
    ++res.pairs;
  }
  if (res.pairs < 1) throw InsufficientDataError("compute_rpe: no valid pose pairs");
  res.translational_rmse = std::sqrt(sum_t2 / res.pairs);
  res.rotational_rmse = std::sqrt(sum_r2 / res.pairs) * 180.0 / M_PI;
  return res;
}

Pose align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw InsufficientDataError("align_rigid: need at least 3 paired points");
  Vec3 mean_src = Vec3::Zero(), mean_dst = Vec3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= double(src.size());
  mean_dst /= double(dst.size());

  Mat3 H = Mat3::Zero();
  double spread = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    H += (dst[i] - mean_dst) * (src[i] - mean_src).transpose();
    spread += (src[i] - mean_src).squaredNorm();
  }
  if (spread < 1e-12) throw DegenerateError("align_rigid: all positions identical");

  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) S(2, 2) = -1.0;
  Pose out;
  const Mat3 R = svd.matrixU() * S * svd.matrixV().transpose();
  out.q = Eigen::Quaterniond(R);
  out.t = mean_dst - R * mean_src;
  out.normalize();
  return out;
}

double compute_ate(const std::vector<TimedPose>& estimate, const std::vector<TimedPose>& truth) {
  std::vector<Vec3> est_pos, gt_pos;
  for (const TimedPose& tp : estimate) {
    const auto gt = interpolate_pose(truth, tp.timestamp);
    if (!gt) continue;
    est_pos.push_back(tp.pose.t);
    gt_pos.push_back(gt->t);
  }
  if (est_pos.size() < 3) throw InsufficientDataError("compute_ate: fewer than 3 overlapping poses");

  // Identical inputs align with the identity and have exactly zero error.
  bool identical = true;
  for (size_t i = 0; i < est_pos.size() && identical; ++i)
    identical = est_pos[i] == gt_pos[i];
  if (identical) return 0.0;

  const Pose align = align_rigid(est_pos, gt_pos);
  double sum = 0.0;
  for (size_t i = 0; i < est_pos.size(); ++i)
    sum += (align.apply(est_pos[i]) - gt_pos[i]).squaredNorm();
  return std::sqrt(sum / double(est_pos.size()));
}

}  // namespace rdvo
