#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "rdvo/core.hpp"

namespace rdvo {

// 3D point in the camera frame (mm) with its 3x3 covariance.
struct Point3 {
  Vec3 p = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
};

// Infinite plane. Hessian form {N, d} satisfies N.P + d = 0 with |N| = 1;
// theta_m = N/d is the minimal form actually estimated.
struct PlaneParams {
  Vec3 normal = Vec3::UnitZ();
  double d = 0.0;                    // mm
  Vec3 theta_m = Vec3::Zero();       // mm^-1
  Mat3 cov_theta_m = Mat3::Zero();
  Mat4 cov_theta = Mat4::Zero();     // covariance of (N, d)

  // Point representation used by the plane-to-plane distance.
  Vec3 embedding() const { return d * normal; }
};

// 3D line through centroid O with direction theta; one component of theta is
// fixed at 1 and carries no uncertainty.
struct Line3 {
  Vec3 centroid = Vec3::Zero();
  Mat3 cov_centroid = Mat3::Zero();
  Vec3 theta = Vec3::UnitX();
  int fixed_dim = 0;
  Mat3 cov_theta = Mat3::Zero();  // fixed_dim row/col zero
  Vec3 endpoint_a = Vec3::Zero();
  Vec3 endpoint_b = Vec3::Zero();
  Mat3 cov_endpoint_a = Mat3::Zero();
  Mat3 cov_endpoint_b = Mat3::Zero();
  double lambda_a = 0.0;
  double lambda_b = 0.0;

  Vec3 direction() const { return theta.normalized(); }
};

// Segment bitmask over the image grid, one bit per pixel.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int width, int height)
      : width_(width), height_(height), bits_((size_t(width) * height + 63) / 64, 0) {}

  void set(int x, int y) {
    const size_t i = size_t(y) * width_ + x;
    bits_[i >> 6] |= uint64_t(1) << (i & 63);
  }
  bool test(int x, int y) const {
    const size_t i = size_t(y) * width_ + x;
    return bits_[i >> 6] & (uint64_t(1) << (i & 63));
  }
  size_t count() const;
  static size_t overlap(const PixelMask& a, const PixelMask& b);
  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return bits_.empty(); }

 private:
  int width_ = 0, height_ = 0;
  std::vector<uint64_t> bits_;
};

struct PlaneSegment {
  PixelMask mask;
  std::vector<int> inlier_indices;  // row-major pixel indices into the grid
  PlaneParams plane;
};

// Organized point cloud congruent with the depth image. Positions are only
// meaningful where the source depth is valid; point covariances are
// materialized on demand (they are a deterministic function of pixel, depth
// and depth variance).
struct OrganizedCloud {
  int width = 0, height = 0;
  std::vector<Vec3> points;
  std::vector<double> depth;      // mm, 0 invalid
  std::vector<double> depth_var;  // mm^2
  bool valid(int idx) const { return depth[idx] > 0.0; }
};

Point3 backproject(const Vec2& pixel, double z, double var_z, const CameraIntrinsics& K);

// d(backproject)/d(u, v, z).
Mat3 backproject_jacobian(const Vec2& pixel, double z, const CameraIntrinsics& K);

OrganizedCloud backproject_cloud(const DepthMap& depth, const VarianceMap& var,
                                 const CameraIntrinsics& K, bool parallel = true);

Point3 cloud_point(const OrganizedCloud& cloud, int x, int y, const CameraIntrinsics& K);

// Weighted least-squares plane fit. Initial weights are inverse depth
// variances; after solving they are rectified with the propagated residual
// uncertainties and the covariance is derived from the rebuilt normal
// matrix.
PlaneParams fit_plane_wls(const std::vector<Point3>& points);

// d(theta)/d(theta_m) of the Hessian-form recovery theta = [theta_m 1]/|theta_m|.
Mat43 plane_form_jacobian(const Vec3& theta_m);

// Uniform samples along a 2D segment (at most max_samples), dropping pixels
// without depth. Throws InsufficientDataError when fewer than 2 remain.
// pixel is the rounded grid position whose depth was read; exact keeps the
// un-rounded position on the segment, whose ray the sample actually lies on.
struct LineSample {
  Vec2 pixel = Vec2::Zero();
  Vec2 exact = Vec2::Zero();
  double z = 0.0;
};
std::vector<LineSample> sample_line_pixels(const Vec2& a, const Vec2& b, const DepthMap& depth,
                                           int max_samples = 100);

struct RansacParams {
  double threshold = 20.0;  // mm point-to-line distance
  int iterations = 50;
  int min_inliers = 6;
  uint64_t seed = 7;
};

// Largest consensus set under 3D point-to-line Euclidean distance over
// 2-point hypotheses. Throws DegenerateError if consensus stays below
// min_inliers.
std::vector<Point3> ransac_line(const std::vector<Point3>& points, const RansacParams& params);

Line3 fit_line_wls(const std::vector<Point3>& points);

struct SegmentationParams {
  double tau_distance = 20.0;     // mm point-to-plane
  double tau_normal_deg = 8.0;
  int min_inliers = 500;          // pixels
  int min_valid_neighbors = 8;    // for the 5x5 normal estimate
};

// Region growing on local surface normals; each surviving segment is fitted
// with fit_plane_wls. Stand-in for a production plane extractor.
std::vector<PlaneSegment> segment_planes(const OrganizedCloud& cloud, const CameraIntrinsics& K,
                                         const SegmentationParams& params, bool parallel = true);

// Debug view of a segmentation: label i+1 per segment, 0 unsegmented.
Image<uint8_t> segment_label_image(const std::vector<PlaneSegment>& segments, int width,
                                   int height);

}  // namespace rdvo
