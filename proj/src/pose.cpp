#include "rdvo/pose.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace rdvo {

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.q = a.q * b.q;
  out.t = a.q * b.t + a.t;
  out.normalize();
  return out;
}

Pose pose_from_xi(const Vec6& xi) {
  const Vec3 qv = xi.tail<3>();
  const double n2 = qv.squaredNorm();
  if (n2 > 1.0) throw InputError("pose_from_xi: quaternion vector part outside unit ball");
  Pose p;
  p.t = xi.head<3>();
  p.q = Eigen::Quaterniond(std::sqrt(1.0 - n2), qv.x(), qv.y(), qv.z());
  return p;
}

Vec6 pose_to_xi(const Pose& p) {
  Vec6 xi;
  xi.head<3>() = p.t;
  xi.tail<3>() = p.qvec();
  return xi;
}

// Derivatives of the homogeneous quadratic form
//   R(q) p = (w^2 - v.v) p + 2 (v.p) v + 2 w (v x p)
// at |q| = 1, then the q4 = sqrt(1 - |v|^2) constraint enters through
// dw/dv = -v^T / w.
Mat3 rotate_jacobian_qvec(const Eigen::Quaterniond& q, const Vec3& p) {
  const Vec3 v(q.x(), q.y(), q.z());
  const double w = q.w();
  const Mat3 d_dv =
      2.0 * (-p * v.transpose() + v * p.transpose() + v.dot(p) * Mat3::Identity() - w * skew(p));
  const Vec3 d_dw = 2.0 * (w * p + v.cross(p));
  return d_dv - d_dw * (v.transpose() / w);
}

Mat3 rotate_transpose_jacobian_qvec(const Eigen::Quaterniond& q, const Vec3& p) {
  // R(q)^T = R(q*) with q* = (w, -v); differentiate through u = -v.
  const Vec3 v(q.x(), q.y(), q.z());
  const double w = q.w();
  const Vec3 u = -v;
  const Mat3 d_du =
      2.0 * (-p * u.transpose() + u * p.transpose() + u.dot(p) * Mat3::Identity() - w * skew(p));
  const Vec3 d_dw = 2.0 * (w * p + u.cross(p));
  return -d_du - d_dw * (v.transpose() / w);
}

ComposeJacobians compose_with_jacobians(const Pose& step, const Pose& prev) {
  const Vec3 vs(step.q.x(), step.q.y(), step.q.z());
  const Vec3 vp(prev.q.x(), prev.q.y(), prev.q.z());
  const double ws = step.q.w();
  const double wp = prev.q.w();

  ComposeJacobians out;
  out.composed.q = step.q * prev.q;
  out.composed.t = step.q * prev.t + step.t;

  // Vector part of the quaternion product: ws*vp + wp*vs + vs x vp.
  Mat3 dqv_dvp = ws * Mat3::Identity() + skew(vs) - vs * (vp.transpose() / wp);
  Mat3 dqv_dvs = wp * Mat3::Identity() - skew(vp) - vp * (vs.transpose() / ws);

  out.wrt_prev.setZero();
  out.wrt_prev.topLeftCorner<3, 3>() = step.rotation();
  out.wrt_prev.bottomRightCorner<3, 3>() = dqv_dvp;

  out.wrt_step.setZero();
  out.wrt_step.topLeftCorner<3, 3>() = Mat3::Identity();
  out.wrt_step.topRightCorner<3, 3>() = rotate_jacobian_qvec(step.q, prev.t);
  out.wrt_step.bottomRightCorner<3, 3>() = dqv_dvs;

  if (out.composed.q.w() < 0.0) {
    out.composed.q.coeffs() = -out.composed.q.coeffs();
    out.wrt_prev.bottomRows<3>() *= -1.0;
    out.wrt_step.bottomRows<3>() *= -1.0;
  }
  out.composed.q.normalize();
  return out;
}

Mat6 propagate_uncertainty(const Mat6& cov_prev, const Mat6& step_cov,
                           const Pose& step, const Pose& prev) {
  const ComposeJacobians j = compose_with_jacobians(step, prev);
  Mat6 out = j.wrt_prev * cov_prev * j.wrt_prev.transpose() +
             j.wrt_step * step_cov * j.wrt_step.transpose();
  symmetrize(out);
  return out;
}

bool validate_pose(const Mat6& cov, double translation_threshold) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov.topLeftCorner<3, 3>());
  return es.eigenvalues().maxCoeff() <= translation_threshold;
}

Pose velocity_decay(const Pose& previous_relative, double decay) {
  Pose out;
  out.t = decay * previous_relative.t;
  out.q = Eigen::Quaterniond::Identity().slerp(decay, previous_relative.q);
  out.normalize();
  out.cov = previous_relative.cov / (decay * decay);
  return out;
}

}  // namespace rdvo
