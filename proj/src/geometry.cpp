#include "rdvo/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace rdvo {

size_t PixelMask::count() const {
  size_t n = 0;
  for (uint64_t b : bits_) n += std::popcount(b);
  return n;
}

size_t PixelMask::overlap(const PixelMask& a, const PixelMask& b) {
  size_t n = 0;
  const size_t m = std::min(a.bits_.size(), b.bits_.size());
  for (size_t i = 0; i < m; ++i) n += std::popcount(a.bits_[i] & b.bits_[i]);
  return n;
}

Point3 backproject(const Vec2& pixel, double z, double var_z, const CameraIntrinsics& K) {
  if (z <= 0.0) throw InputError("backproject: invalid depth");
  Point3 pt;
  pt.p = z * K.ray(pixel.x(), pixel.y());
  const Mat3 J = backproject_jacobian(pixel, z, K);
  Vec3 noise(kPixelVariance, kPixelVariance, var_z);
  pt.cov = J * noise.asDiagonal() * J.transpose();
  symmetrize(pt.cov);
  return pt;
}

Mat3 backproject_jacobian(const Vec2& pixel, double z, const CameraIntrinsics& K) {
  Mat3 J;
  J << z / K.fx, 0.0, (pixel.x() - K.cx) / K.fx,
       0.0, z / K.fy, (pixel.y() - K.cy) / K.fy,
       0.0, 0.0, 1.0;
  return J;
}

OrganizedCloud backproject_cloud(const DepthMap& depth, const VarianceMap& var,
                                 const CameraIntrinsics& K, bool parallel) {
  if (!depth.z.same_size(var.var)) throw InputError("backproject_cloud: size mismatch");
  OrganizedCloud cloud;
  cloud.width = depth.width();
  cloud.height = depth.height();
  cloud.points.assign(size_t(cloud.width) * cloud.height, Vec3::Zero());
  cloud.depth.assign(size_t(cloud.width) * cloud.height, 0.0);
  cloud.depth_var.assign(size_t(cloud.width) * cloud.height, 0.0);

  parallel_rows(cloud.height, parallel, [&](int y) {
    for (int x = 0; x < cloud.width; ++x) {
      const size_t i = size_t(y) * cloud.width + x;
      const double z = depth.z(x, y);
      if (z <= 0.0) continue;
      cloud.points[i] = z * K.ray(x, y);
      cloud.depth[i] = z;
      cloud.depth_var[i] = var.var(x, y);
    }
  });
  return cloud;
}

Point3 cloud_point(const OrganizedCloud& cloud, int x, int y, const CameraIntrinsics& K) {
  const size_t i = size_t(y) * cloud.width + x;
  return backproject(Vec2(x, y), cloud.depth[i], cloud.depth_var[i], K);
}

Mat43 plane_form_jacobian(const Vec3& theta_m) {
  const double n = theta_m.norm();
  const double n3 = n * n * n;
  Mat43 J;
  J.topRows<3>() = Mat3::Identity() / n - theta_m * theta_m.transpose() / n3;
  J.bottomRows<1>() = -theta_m.transpose() / n3;
  return J;
}

namespace {

// Solves theta_m = A^-1 b for A = sum w P P^T, b = -sum w P.
Vec3 solve_plane(const std::vector<Point3>& points, const std::vector<double>& w, Mat3* a_out) {
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (size_t i = 0; i < points.size(); ++i) {
    A += w[i] * points[i].p * points[i].p.transpose();
    b -= w[i] * points[i].p;
  }
  Eigen::FullPivLU<Mat3> lu(A);
  if (!lu.isInvertible()) throw DegenerateError("fit_plane_wls: degenerate point configuration");
  if (a_out) *a_out = A;
  return lu.solve(b);
}

}  // namespace

PlaneParams fit_plane_wls(const std::vector<Point3>& points) {
  if (points.size() < 3) throw InputError("fit_plane_wls: need at least 3 points");

  std::vector<double> w(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    const double var_z = points[i].cov(2, 2);
    w[i] = var_z > 0.0 ? 1.0 / var_z : 1.0;
  }
  const Vec3 theta_m = solve_plane(points, w, nullptr);
  if (!theta_m.allFinite()) throw DegenerateError("fit_plane_wls: non-finite solution");
  const double norm = theta_m.norm();
  if (norm < 1e-15 || norm > 1e15)
    throw DegenerateError("fit_plane_wls: plane through or at infinity from the origin");

  // The heuristic depth weights only scale the cost, so the inverse normal
  // matrix would overestimate the uncertainty; rectify them with the actual
  // residual variances theta_m Sigma_P theta_m^T and rebuild A.
  for (size_t i = 0; i < points.size(); ++i) {
    const double var_r = theta_m.dot(points[i].cov * theta_m);
    w[i] = var_r > 0.0 ? 1.0 / var_r : 1.0;
  }
  Mat3 a_rect;
  solve_plane(points, w, &a_rect);

  PlaneParams out;
  out.theta_m = theta_m;
  out.cov_theta_m = a_rect.inverse();
  symmetrize(out.cov_theta_m);
  out.normal = theta_m / norm;
  out.d = 1.0 / norm;
  const Mat43 J = plane_form_jacobian(theta_m);
  out.cov_theta = J * out.cov_theta_m * J.transpose();
  symmetrize(out.cov_theta);
  return out;
}

std::vector<LineSample> sample_line_pixels(const Vec2& a, const Vec2& b, const DepthMap& depth,
                                           int max_samples) {
  const double len = (b - a).norm();
  const int n = std::clamp(int(std::lround(len)), 2, max_samples);
  std::vector<LineSample> samples;
  samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.0 : double(i) / (n - 1);
    const Vec2 p = a + s * (b - a);
    const int px = int(std::lround(p.x()));
    const int py = int(std::lround(p.y()));
    if (!depth.z.inside(px, py)) continue;
    const double z = depth.z(px, py);
    if (z <= 0.0) continue;
    samples.push_back({Vec2(px, py), p, z});
  }
  if (samples.size() < 2) throw InsufficientDataError("sample_line_pixels: fewer than 2 valid samples");
  return samples;
}

namespace {

double point_line_distance(const Vec3& p, const Vec3& origin, const Vec3& dir_unit) {
  return ((p - origin).cross(dir_unit)).norm();
}

}  // namespace

std::vector<Point3> ransac_line(const std::vector<Point3>& points, const RansacParams& params) {
  if (points.size() < 2) throw InputError("ransac_line: need at least 2 points");
  if (points.size() == 2) return points;  // hypothesis equals the data

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<size_t> pick(0, points.size() - 1);

  std::vector<char> best_mask(points.size(), 0);
  size_t best_count = 0;
  for (int it = 0; it < params.iterations; ++it) {
    const size_t i = pick(rng);
    size_t j = pick(rng);
    if (i == j) continue;
    const Vec3 d = points[j].p - points[i].p;
    const double n = d.norm();
    if (n < 1e-12) continue;
    const Vec3 dir = d / n;
    std::vector<char> mask(points.size(), 0);
    size_t count = 0;
    for (size_t k = 0; k < points.size(); ++k) {
      if (point_line_distance(points[k].p, points[i].p, dir) <= params.threshold) {
        mask[k] = 1;
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_mask.swap(mask);
    }
  }
  if (best_count < size_t(params.min_inliers))
    throw DegenerateError("ransac_line: consensus below minimum inlier count");

  std::vector<Point3> consensus;
  consensus.reserve(best_count);
  for (size_t k = 0; k < points.size(); ++k)
    if (best_mask[k]) consensus.push_back(points[k]);
  return consensus;
}

namespace {

// One of the three 2x2 normal systems, selected by the fixed dimension.
// free dims in ascending order carry the unknowns (a, b).
void line_system(const std::vector<Vec3>& pr, const std::vector<double>& w, int fixed_dim,
                 Mat2& A, Vec2& b) {
  A.setZero();
  b.setZero();
  for (size_t i = 0; i < pr.size(); ++i) {
    const double X = pr[i].x(), Y = pr[i].y(), Z = pr[i].z();
    const double wi = w[i];
    switch (fixed_dim) {
      case 0:
        A(0, 0) += wi * (X * X + Z * Z);
        A(0, 1) -= wi * Y * Z;
        A(1, 1) += wi * (X * X + Y * Y);
        b(0) += wi * X * Y;
        b(1) += wi * X * Z;
        break;
      case 1:
        A(0, 0) += wi * (Y * Y + Z * Z);
        A(0, 1) -= wi * X * Z;
        A(1, 1) += wi * (X * X + Y * Y);
        b(0) += wi * X * Y;
        b(1) += wi * Y * Z;
        break;
      default:
        A(0, 0) += wi * (Y * Y + Z * Z);
        A(0, 1) -= wi * X * Y;
        A(1, 1) += wi * (X * X + Z * Z);
        b(0) += wi * X * Z;
        b(1) += wi * Y * Z;
        break;
    }
  }
  A(1, 0) = A(0, 1);
}

Vec3 assemble_theta(int fixed_dim, const Vec2& theta_m) {
  Vec3 theta;
  switch (fixed_dim) {
    case 0: theta << 1.0, theta_m(0), theta_m(1); break;
    case 1: theta << theta_m(0), 1.0, theta_m(1); break;
    default: theta << theta_m(0), theta_m(1), 1.0; break;
  }
  return theta;
}

// Gradient of r = |P' x theta| with respect to P'.
Vec3 residual_gradient(const Vec3& p_rel, const Vec3& theta) {
  Vec3 c = p_rel.cross(theta);
  double r = c.norm();
  Vec3 p = p_rel;
  if (r < 1e-12) {
    // on-line sample: nudge off the line to make the gradient determinate
    int k;
    theta.cwiseAbs().minCoeff(&k);
    p(k) += 1e-6;
    c = p.cross(theta);
    r = c.norm();
  }
  // dr/dP' = (c/r)^T d(P' x theta)/dP' and d(P' x theta)/dP' = -[theta]_x
  return -skew(theta).transpose() * (c / r);
}

}  // namespace

Line3 fit_line_wls(const std::vector<Point3>& points) {
  if (points.size() < 2) throw InputError("fit_line_wls: need at least 2 points");
  const size_t n = points.size();

  // Centroid: depth-variance weighted mean with normalized weights.
  std::vector<double> wz(n);
  double wsum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double var_z = points[i].cov(2, 2);
    wz[i] = var_z > 0.0 ? 1.0 / var_z : 1.0;
    wsum += wz[i];
  }
  Line3 out;
  for (size_t i = 0; i < n; ++i) {
    const double wn = wz[i] / wsum;
    out.centroid += wn * points[i].p;
    out.cov_centroid += wn * wn * points[i].cov;
  }
  symmetrize(out.cov_centroid);

  std::vector<Vec3> pr(n);
  Vec3 lo = points[0].p, hi = points[0].p;
  for (size_t i = 0; i < n; ++i) {
    pr[i] = points[i].p - out.centroid;
    lo = lo.cwiseMin(points[i].p);
    hi = hi.cwiseMax(points[i].p);
  }
  const Vec3 range = hi - lo;
  if (range.maxCoeff() <= 0.0) throw DegenerateError("fit_line_wls: coincident points");
  int fixed_dim = 0;
  range.maxCoeff(&fixed_dim);  // ties resolve to the lowest index
  out.fixed_dim = fixed_dim;

  Mat2 A;
  Vec2 b;
  line_system(pr, wz, fixed_dim, A, b);
  Eigen::FullPivLU<Mat2> lu(A);
  if (!lu.isInvertible()) throw DegenerateError("fit_line_wls: singular normal system");
  const Vec2 theta_m = lu.solve(b);
  out.theta = assemble_theta(fixed_dim, theta_m);

  // Rectify weights with the residual uncertainties and rebuild the system.
  std::vector<double> wr(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 g = residual_gradient(pr[i], out.theta);
    const double var_r = g.dot(points[i].cov * g);
    wr[i] = var_r > 0.0 ? 1.0 / var_r : 1.0;
  }
  Mat2 a_rect;
  Vec2 b_rect;
  line_system(pr, wr, fixed_dim, a_rect, b_rect);
  Eigen::FullPivLU<Mat2> lur(a_rect);
  if (!lur.isInvertible()) throw DegenerateError("fit_line_wls: singular rectified system");
  const Mat2 cov2 = a_rect.inverse();

  out.cov_theta.setZero();
  const int free_a = fixed_dim == 0 ? 1 : 0;
  const int free_b = fixed_dim == 2 ? 1 : 2;
  out.cov_theta(free_a, free_a) = cov2(0, 0);
  out.cov_theta(free_a, free_b) = cov2(0, 1);
  out.cov_theta(free_b, free_a) = cov2(1, 0);
  out.cov_theta(free_b, free_b) = cov2(1, 1);

  // Endpoints: extreme projections of the samples onto the line.
  const double tt = out.theta.squaredNorm();
  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  Vec3 pmin = pr[0], pmax = pr[0];
  for (size_t i = 0; i < n; ++i) {
    const double lambda = out.theta.dot(pr[i]) / tt;
    if (lambda < lmin) { lmin = lambda; pmin = pr[i]; }
    if (lambda > lmax) { lmax = lambda; pmax = pr[i]; }
  }
  out.lambda_a = lmin;
  out.lambda_b = lmax;
  out.endpoint_a = out.centroid + lmin * out.theta;
  out.endpoint_b = out.centroid + lmax * out.theta;

  // First-order propagation of Sigma_O and Sigma_theta through
  // P = O + lambda(theta) theta, treating the two as independent.
  auto endpoint_cov = [&](const Vec3& p_rel, double lambda) {
    const Mat3 J_theta =
        lambda * Mat3::Identity() + out.theta * ((p_rel - 2.0 * lambda * out.theta) / tt).transpose();
    const Mat3 J_o = Mat3::Identity() - out.theta * out.theta.transpose() / tt;
    Mat3 c = J_o * out.cov_centroid * J_o.transpose() + J_theta * out.cov_theta * J_theta.transpose();
    symmetrize(c);
    return c;
  };
  out.cov_endpoint_a = endpoint_cov(pmin, lmin);
  out.cov_endpoint_b = endpoint_cov(pmax, lmax);
  return out;
}

namespace {

struct NormalField {
  std::vector<Vec3> normal;       // unit normals, zero where unavailable
  std::vector<double> curvature;  // smallest-eigenvalue ratio, seed ordering
  std::vector<char> has_normal;
};

NormalField compute_normals(const OrganizedCloud& cloud, const SegmentationParams& params,
                            bool parallel) {
  const int w = cloud.width, h = cloud.height;
  NormalField f;
  f.normal.assign(size_t(w) * h, Vec3::Zero());
  f.curvature.assign(size_t(w) * h, std::numeric_limits<double>::infinity());
  f.has_normal.assign(size_t(w) * h, 0);

  parallel_rows(h, parallel, [&](int y) {
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    for (int x = 0; x < w; ++x) {
      const size_t idx = size_t(y) * w + x;
      if (!cloud.valid(int(idx))) continue;
      // raw first and second moments in one pass over the 5x5 window
      Vec3 sum = Vec3::Zero();
      Mat3 sq = Mat3::Zero();
      int count = 0;
      const int y0 = std::max(0, y - 2), y1 = std::min(h - 1, y + 2);
      const int x0 = std::max(0, x - 2), x1 = std::min(w - 1, x + 2);
      for (int ny = y0; ny <= y1; ++ny) {
        for (int nx = x0; nx <= x1; ++nx) {
          const size_t ni = size_t(ny) * w + nx;
          if (!cloud.valid(int(ni))) continue;
          const Vec3& p = cloud.points[ni];
          sum += p;
          sq += p * p.transpose();
          ++count;
        }
      }
      if (count < params.min_valid_neighbors) continue;
      const Vec3 mean = sum / count;
      const Mat3 scatter = sq - sum * mean.transpose();
      es.computeDirect(scatter);
      Vec3 nrm = es.eigenvectors().col(0);
      if (nrm.dot(cloud.points[idx]) > 0.0) nrm = -nrm;  // face the camera
      f.normal[idx] = nrm;
      const double tr = es.eigenvalues().sum();
      f.curvature[idx] = tr > 0.0 ? std::max(0.0, es.eigenvalues()(0)) / tr : 0.0;
      f.has_normal[idx] = 1;
    }
  });
  return f;
}

}  // namespace

std::vector<PlaneSegment> segment_planes(const OrganizedCloud& cloud, const CameraIntrinsics& K,
                                         const SegmentationParams& params, bool parallel) {
  const int w = cloud.width, h = cloud.height;
  const NormalField field = compute_normals(cloud, params, parallel);

  std::vector<int> order;
  order.reserve(size_t(w) * h);
  for (int i = 0; i < w * h; ++i)
    if (field.has_normal[i]) order.push_back(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return field.curvature[a] < field.curvature[b]; });

  const double cos_tau = std::cos(params.tau_normal_deg * M_PI / 180.0);
  std::vector<char> assigned(size_t(w) * h, 0);
  std::vector<char> seed_spent(size_t(w) * h, 0);
  std::vector<int> visit_epoch(size_t(w) * h, -1);
  std::vector<PlaneSegment> segments;
  int epoch = 0;

  for (int seed : order) {
    if (assigned[seed] || seed_spent[seed]) continue;
    const Vec3 seed_normal = field.normal[seed];
    const Vec3 seed_point = cloud.points[seed];

    std::vector<int> members;
    std::deque<int> frontier{seed};
    visit_epoch[seed] = ++epoch;
    while (!frontier.empty()) {
      const int idx = frontier.front();
      frontier.pop_front();
      members.push_back(idx);
      const int x = idx % w, y = idx / w;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto& nb : nbr) {
        const int nx = nb[0], ny = nb[1];
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        const int ni = ny * w + nx;
        if (visit_epoch[ni] == epoch || assigned[ni] || !field.has_normal[ni]) continue;
        if (field.normal[ni].dot(seed_normal) < cos_tau) continue;
        if (std::abs(seed_normal.dot(cloud.points[ni] - seed_point)) > params.tau_distance) continue;
        visit_epoch[ni] = epoch;
        frontier.push_back(ni);
      }
    }
    if (members.size() < size_t(params.min_inliers)) {
      // too small to keep; its members may still join other regions but
      // need not seed their own
      for (int idx : members) seed_spent[idx] = 1;
      continue;
    }

    PlaneSegment seg;
    seg.mask = PixelMask(w, h);
    seg.inlier_indices = members;
    for (int idx : members) {
      assigned[idx] = 1;
      seg.mask.set(idx % w, idx / w);
    }
    // fit on an even stride of the inliers; a few thousand samples pin the
    // plane as well as the full segment at a fraction of the cost
    const size_t stride = std::max<size_t>(1, members.size() / 2000);
    std::vector<Point3> pts;
    pts.reserve(members.size() / stride + 1);
    for (size_t i = 0; i < members.size(); i += stride)
      pts.push_back(cloud_point(cloud, members[i] % w, members[i] / w, K));
    try {
      seg.plane = fit_plane_wls(pts);
    } catch (const DegenerateError&) {
      continue;
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

Image<uint8_t> segment_label_image(const std::vector<PlaneSegment>& segments, int width,
                                   int height) {
  Image<uint8_t> labels(width, height, 0);
  for (size_t s = 0; s < segments.size(); ++s) {
    const uint8_t label = uint8_t(1 + s % 255);
    for (int idx : segments[s].inlier_indices)
      labels(idx % width, idx / width) = label;
  }
  return labels;
}

}  // namespace rdvo
