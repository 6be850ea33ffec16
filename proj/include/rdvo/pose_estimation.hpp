#pragma once

#include <vector>

#include "rdvo/core.hpp"
#include "rdvo/geometry.hpp"
#include "rdvo/pose.hpp"

namespace rdvo {

// 3D point of the previous frame observed at a pixel of the current frame.
struct PointMatch {
  Point3 prev;
  Vec2 obs = Vec2::Zero();
};

// 3D line of the previous frame matched to a 2D line of the current frame;
// the 2D line is in Hessian form with unit (a, b).
struct LineMatch {
  Vec3 prev_p1 = Vec3::Zero();
  Vec3 prev_p2 = Vec3::Zero();
  Mat3 cov_p1 = Mat3::Zero();
  Mat3 cov_p2 = Mat3::Zero();
  Vec3 cur_line = Vec3::UnitX();
};

struct PlaneMatch {
  PlaneParams prev;
  PlaneParams cur;
};

struct PointResidual {
  Vec2 value = Vec2::Zero();
  Eigen::Matrix<double, 2, 6> jacobian = Eigen::Matrix<double, 2, 6>::Zero();
  Vec2 variance = Vec2::Zero();  // diagonal of the propagated uncertainty
  bool cheirality_ok = true;
};

struct LineResidual {
  Vec2 value = Vec2::Zero();
  Eigen::Matrix<double, 2, 6> jacobian = Eigen::Matrix<double, 2, 6>::Zero();
  Vec2 variance = Vec2::Zero();
  bool cheirality_ok = true;
};

struct PlaneResidual {
  Vec3 value = Vec3::Zero();
  Eigen::Matrix<double, 3, 6> jacobian = Eigen::Matrix<double, 3, 6>::Zero();
  Vec3 variance = Vec3::Zero();
};

// Reprojection residual obs - pi(R P + t) in pixels. cheirality_ok turns
// false when the transformed point ends up behind the camera; the match is
// then dropped by the solver.
PointResidual point_residual(const Point3& prev, const Vec2& obs, const Pose& pose,
                             const CameraIntrinsics& K);

// Signed point-to-line distances of the two projected endpoints.
LineResidual line_residual(const LineMatch& match, const Pose& pose, const CameraIntrinsics& K);

// Distance between the current plane transported into the previous frame and
// the previous plane, in the d*N point embedding.
PlaneResidual plane_residual(const PlaneMatch& match, const Pose& pose);

// Tukey biweight: (1 - (r/(c*scale))^2)^2 inside the c*scale band, 0 outside.
double tukey_weight(double r, double scale, double c = 4.685);

struct EstimateParams {
  double alpha_plane = 0.02;
  double tukey_c = 4.685;
  int max_iterations = 50;
  double damping_init = 1e-4;
  double step_tolerance = 1e-8;
  double cost_tolerance = 1e-10;
  double variance_floor = 1e-8;  // keeps inverse-diagonal weights finite
};

struct IterationStat {
  int iteration = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;  // under the same weights as cost_before
  double damping = 0.0;
  bool accepted = false;
  double point_tukey_scale = 0.0;
  double line_tukey_scale = 0.0;
};

struct EstimateResult {
  Pose pose;        // cov filled with the back-propagated uncertainty
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
};

// Joint IRLS Levenberg-Marquardt over the three match sets. Weights are the
// inverse diagonal entries of the propagated residual uncertainties,
// refreshed at every accepted iterate; point and line residuals are further
// reweighted with Tukey weights, planes carry the fixed alpha trade-off.
EstimateResult estimate_pose(const std::vector<PointMatch>& points,
                             const std::vector<LineMatch>& lines,
                             const std::vector<PlaneMatch>& planes, const CameraIntrinsics& K,
                             const Pose& init, const EstimateParams& params = {},
                             std::vector<IterationStat>* stats = nullptr);

}  // namespace rdvo
