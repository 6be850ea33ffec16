#pragma once

#include <Eigen/Geometry>

#include "rdvo/core.hpp"

namespace rdvo {

// Rigid transform {R, t}: maps points of the source frame into the target
// frame, X_tgt = R * X_src + t. Translation in mm. The rotation is stored as
// a unit quaternion with non-negative scalar part so that the minimal state
// xi = {t_x, t_y, t_z, q1, q2, q3} with q4 = sqrt(1 - q1^2 - q2^2 - q3^2)
// is unambiguous. cov is the 6x6 covariance of xi.
struct Pose {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 t = Vec3::Zero();
  Mat6 cov = Mat6::Zero();

  static Pose identity() { return Pose{}; }

  Mat3 rotation() const { return q.toRotationMatrix(); }
  Vec3 apply(const Vec3& p) const { return q * p + t; }

  Pose inverse() const {
    Pose inv;
    inv.q = q.conjugate();
    inv.t = -(inv.q * t);
    inv.normalize();
    return inv;
  }

  // Keeps |q| = 1 and the q4 >= 0 branch.
  void normalize() {
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  }

  Vec3 qvec() const { return {q.x(), q.y(), q.z()}; }
};

// pose_a: k+1 <- k composed with pose_b: k <- 1 gives k+1 <- 1.
Pose compose(const Pose& a, const Pose& b);

// Builds a pose from the minimal parameters; throws InputError when the
// vector part leaves the unit ball.
Pose pose_from_xi(const Vec6& xi);
Vec6 pose_to_xi(const Pose& p);

// d(R(q) p)/d(q1,q2,q3) with q4 = sqrt(1 - |qv|^2) folded in by chain rule.
Mat3 rotate_jacobian_qvec(const Eigen::Quaterniond& q, const Vec3& p);
// Same for R(q)^T p.
Mat3 rotate_transpose_jacobian_qvec(const Eigen::Quaterniond& q, const Vec3& p);

// Jacobians of the composition f(step, prev) = compose(step, prev) in the
// minimal parameterization: F = df/dxi_prev, G = df/dxi_step. The returned
// pose has its q4 >= 0 branch enforced, and the Jacobians account for a
// possible sign flip.
struct ComposeJacobians {
  Pose composed;
  Mat6 wrt_prev;  // F
  Mat6 wrt_step;  // G
};
ComposeJacobians compose_with_jacobians(const Pose& step, const Pose& prev);

// EKF-style covariance propagation through the composition: returns
// F * cov_prev * F^T + G * step_cov * G^T for the chain step o prev.
Mat6 propagate_uncertainty(const Mat6& cov_prev, const Mat6& step_cov,
                           const Pose& step, const Pose& prev);

// Largest eigenvalue of the translation block must stay within threshold
// (mm^2) for the estimate to be trusted.
bool validate_pose(const Mat6& cov, double translation_threshold);

// Decaying velocity model: translation scaled by decay, rotation
// spherically interpolated toward identity, covariance inflated by
// 1/decay^2.
Pose velocity_decay(const Pose& previous_relative, double decay);

}  // namespace rdvo
