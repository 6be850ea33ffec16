#include "rdvo/pose_estimation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace rdvo {

namespace {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& q, const CameraIntrinsics& K) {
  Eigen::Matrix<double, 2, 3> J;
  const double iz = 1.0 / q.z();
  J << K.fx * iz, 0.0, -K.fx * q.x() * iz * iz,
       0.0, K.fy * iz, -K.fy * q.y() * iz * iz;
  return J;
}

}  // namespace

PointResidual point_residual(const Point3& prev, const Vec2& obs, const Pose& pose,
                             const CameraIntrinsics& K) {
  PointResidual res;
  const Vec3 q = pose.apply(prev.p);
  if (q.z() <= 0.0) {
    res.cheirality_ok = false;
    return res;
  }
  const auto J_pi = projection_jacobian(q, K);
  res.value = obs - K.project(q);
  res.jacobian.leftCols<3>() = -J_pi;
  res.jacobian.rightCols<3>() = -J_pi * rotate_jacobian_qvec(pose.q, prev.p);

  const Mat3 R = pose.rotation();
  const Mat2 cov = J_pi * R * prev.cov * R.transpose() * J_pi.transpose();
  res.variance = cov.diagonal().array() + kPixelVariance;
  return res;
}

LineResidual line_residual(const LineMatch& match, const Pose& pose, const CameraIntrinsics& K) {
  LineResidual res;
  const Vec3 l = match.cur_line;
  const Mat3 R = pose.rotation();
  const Vec3 endpoints[2] = {match.prev_p1, match.prev_p2};
  const Mat3* covs[2] = {&match.cov_p1, &match.cov_p2};
  for (int k = 0; k < 2; ++k) {
    const Vec3 q = pose.apply(endpoints[k]);
    if (q.z() <= 0.0) {
      res.cheirality_ok = false;
      return res;
    }
    const Vec2 uv = K.project(q);
    res.value(k) = l.x() * uv.x() + l.y() * uv.y() + l.z();
    const auto J_pi = projection_jacobian(q, K);
    const Eigen::Matrix<double, 1, 3> lj = l.head<2>().transpose() * J_pi;
    res.jacobian.block<1, 3>(k, 0) = lj;
    res.jacobian.block<1, 3>(k, 3) = lj * rotate_jacobian_qvec(pose.q, endpoints[k]);
    res.variance(k) = (lj * R * (*covs[k]) * R.transpose() * lj.transpose())(0, 0);
  }
  return res;
}

PlaneResidual plane_residual(const PlaneMatch& match, const Pose& pose) {
  PlaneResidual res;
  const Vec3& nc = match.cur.normal;
  const double dc = match.cur.d;
  const Vec3& np = match.prev.normal;
  const double dp = match.prev.d;

  const Mat3 R = pose.rotation();
  const double s = nc.dot(pose.t) + dc;   // offset of the transported plane
  const Vec3 m = R.transpose() * nc;      // its normal in the previous frame
  res.value = s * m - dp * np;

  res.jacobian.leftCols<3>() = m * nc.transpose();
  res.jacobian.rightCols<3>() = s * rotate_transpose_jacobian_qvec(pose.q, nc);

  Mat34 j_cur;
  j_cur.leftCols<3>() = m * pose.t.transpose() + s * R.transpose();
  j_cur.col(3) = m;
  Mat34 j_prev;
  j_prev.leftCols<3>() = -dp * Mat3::Identity();
  j_prev.col(3) = -np;
  const Mat3 cov = j_cur * match.cur.cov_theta * j_cur.transpose() +
                   j_prev * match.prev.cov_theta * j_prev.transpose();
  res.variance = cov.diagonal();
  return res;
}

double tukey_weight(double r, double scale, double c) {
  const double bound = c * scale;
  const double a = std::abs(r);
  if (a >= bound) return 0.0;
  const double u = r / bound;
  const double v = 1.0 - u * u;
  return v * v;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

// 1.4826 * MAD of the residual magnitudes; residuals are zero-mean under
// the model, so the deviation is taken about zero.
double robust_scale(const std::vector<double>& magnitudes) {
  if (magnitudes.empty()) return 0.0;
  return 1.4826 * median(magnitudes);
}

struct Evaluation {
  // one entry per scalar residual row
  std::vector<double> residuals;
  std::vector<Eigen::Matrix<double, 1, 6>> jacobians;
  std::vector<double> variances;
  std::vector<int> match_of_row;     // row -> index into match-level arrays
  std::vector<int> kind_of_row;      // 0 point, 1 line, 2 plane
  std::vector<double> point_magnitudes;
  std::vector<double> line_magnitudes;
  std::vector<int> point_first_row;  // per retained point match
  std::vector<int> line_first_row;
};

Evaluation evaluate(const std::vector<PointMatch>& points, const std::vector<LineMatch>& lines,
                    const std::vector<PlaneMatch>& planes, const CameraIntrinsics& K,
                    const Pose& pose) {
  Evaluation ev;
  for (const PointMatch& m : points) {
    const PointResidual r = point_residual(m.prev, m.obs, pose, K);
    if (!r.cheirality_ok) continue;
    ev.point_first_row.push_back(int(ev.residuals.size()));
    ev.point_magnitudes.push_back(r.value.norm() / std::sqrt(2.0));
    for (int k = 0; k < 2; ++k) {
      ev.residuals.push_back(r.value(k));
      ev.jacobians.push_back(r.jacobian.row(k));
      ev.variances.push_back(r.variance(k));
      ev.match_of_row.push_back(int(ev.point_magnitudes.size()) - 1);
      ev.kind_of_row.push_back(0);
    }
  }
  for (const LineMatch& m : lines) {
    const LineResidual r = line_residual(m, pose, K);
    if (!r.cheirality_ok) continue;
    ev.line_first_row.push_back(int(ev.residuals.size()));
    ev.line_magnitudes.push_back(r.value.norm() / std::sqrt(2.0));
    for (int k = 0; k < 2; ++k) {
      ev.residuals.push_back(r.value(k));
      ev.jacobians.push_back(r.jacobian.row(k));
      ev.variances.push_back(r.variance(k));
      ev.match_of_row.push_back(int(ev.line_magnitudes.size()) - 1);
      ev.kind_of_row.push_back(1);
    }
  }
  for (const PlaneMatch& m : planes) {
    const PlaneResidual r = plane_residual(m, pose);
    for (int k = 0; k < 3; ++k) {
      ev.residuals.push_back(r.value(k));
      ev.jacobians.push_back(r.jacobian.row(k));
      ev.variances.push_back(r.variance(k));
      ev.match_of_row.push_back(-1);
      ev.kind_of_row.push_back(2);
    }
  }
  return ev;
}

// Weights per row under the current evaluation: inverse diagonal of the
// residual uncertainty, Tukey-reweighted for points and lines, alpha for
// planes.
std::vector<double> compute_weights(const Evaluation& ev, const EstimateParams& params,
                                    double* point_scale_out, double* line_scale_out) {
  const double point_scale = robust_scale(ev.point_magnitudes);
  const double line_scale = robust_scale(ev.line_magnitudes);
  if (point_scale_out) *point_scale_out = point_scale;
  if (line_scale_out) *line_scale_out = line_scale;

  std::vector<double> w(ev.residuals.size());
  for (size_t i = 0; i < w.size(); ++i) {
    const double base = 1.0 / std::max(ev.variances[i], params.variance_floor);
    double robust = 1.0;
    if (ev.kind_of_row[i] == 0 && point_scale > 1e-12)
      robust = tukey_weight(ev.point_magnitudes[ev.match_of_row[i]], point_scale, params.tukey_c);
    else if (ev.kind_of_row[i] == 1 && line_scale > 1e-12)
      robust = tukey_weight(ev.line_magnitudes[ev.match_of_row[i]], line_scale, params.tukey_c);
    const double alpha = ev.kind_of_row[i] == 2 ? params.alpha_plane : 1.0;
    w[i] = alpha * robust * base;
  }
  return w;
}

double weighted_cost(const Evaluation& ev, const std::vector<double>& w) {
  double c = 0.0;
  for (size_t i = 0; i < ev.residuals.size(); ++i) c += w[i] * ev.residuals[i] * ev.residuals[i];
  return c;
}

}  // namespace

EstimateResult estimate_pose(const std::vector<PointMatch>& points,
                             const std::vector<LineMatch>& lines,
                             const std::vector<PlaneMatch>& planes, const CameraIntrinsics& K,
                             const Pose& init, const EstimateParams& params,
                             std::vector<IterationStat>* stats) {
  const int constraints = 2 * int(points.size()) + 2 * int(lines.size()) + 3 * int(planes.size());
  if (constraints < 6)
    throw DegenerateError("estimate_pose: fewer than 6 constraints");
  if (init.q.w() < 0.1)
    throw InputError("estimate_pose: initial rotation outside the q4 >= 0.1 operating range");

  Pose pose = init;
  pose.normalize();
  double damping = params.damping_init;
  EstimateResult result;

  Evaluation ev = evaluate(points, lines, planes, K, pose);
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (int(ev.residuals.size()) < 6)
      throw DegenerateError("estimate_pose: too many matches dropped by cheirality");

    IterationStat stat;
    stat.iteration = iter;
    const std::vector<double> w =
        compute_weights(ev, params, &stat.point_tukey_scale, &stat.line_tukey_scale);
    const double cost = weighted_cost(ev, w);
    stat.cost_before = cost;

    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (size_t i = 0; i < ev.residuals.size(); ++i) {
      H += w[i] * ev.jacobians[i].transpose() * ev.jacobians[i];
      g += w[i] * ev.jacobians[i].transpose() * ev.residuals[i];
    }

    bool accepted = false;
    bool plateau = false;
    Evaluation ev_new;
    Vec6 step = Vec6::Zero();
    while (damping < 1e12) {
      const Mat6 A = H + damping * Mat6::Identity();
      step = A.ldlt().solve(-g);
      if (step.norm() < params.step_tolerance) {  // already at the optimum
        plateau = true;
        break;
      }
      const Vec6 xi_new = pose_to_xi(pose) + step;
      if (xi_new.tail<3>().squaredNorm() > 0.99) {  // keep q4 >= 0.1
        damping *= 10.0;
        continue;
      }
      const Pose candidate = pose_from_xi(xi_new);
      ev_new = evaluate(points, lines, planes, K, candidate);
      const double cost_new = weighted_cost(ev_new, w);
      if (cost_new < cost && std::isfinite(cost_new)) {
        stat.cost_after = cost_new;
        stat.damping = damping;
        stat.accepted = true;
        pose = candidate;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    result.iterations = iter + 1;
    if (stats) stats->push_back(stat);
    if (plateau) {
      result.converged = true;
      break;
    }
    if (!accepted) break;  // damping exhausted

    ev = std::move(ev_new);
    const double rel_change = (cost - stat.cost_after) / std::max(cost, 1e-300);
    if (step.norm() < params.step_tolerance || rel_change < params.cost_tolerance) {
      result.converged = true;
      break;
    }
  }

  // Back-propagated uncertainty from the final weighted system.
  double ps, ls;
  const std::vector<double> w = compute_weights(ev, params, &ps, &ls);
  result.final_cost = weighted_cost(ev, w);
  Mat6 H = Mat6::Zero();
  for (size_t i = 0; i < ev.residuals.size(); ++i)
    H += w[i] * ev.jacobians[i].transpose() * ev.jacobians[i];
  Eigen::SelfAdjointEigenSolver<Mat6> es(H);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (lmax <= 0.0 || lmin <= lmax * 3e-15)
    throw DegenerateError("estimate_pose: singular information matrix (degenerate configuration)");
  pose.cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
             es.eigenvectors().transpose();
  symmetrize(pose.cov);
  result.pose = pose;
  return result;
}

}  // namespace rdvo
