#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdvo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;

// Pixel quantization error: uniform over one pixel.
inline constexpr double kPixelVariance = 1.0 / 12.0;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct InputError : Error {
  explicit InputError(const std::string& msg) : Error(msg) {}
};
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& msg) : Error(msg) {}
};
struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Dense row-major raster. (0,0) is the top-left pixel, x = column, y = row.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(size_t(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[size_t(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[size_t(y) * width_ + x]; }

  bool inside(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_size(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Depth in mm; 0 marks an invalid pixel, so the validity indicator is
// implied by the stored value and cannot go out of sync.
struct DepthMap {
  Image<double> z;

  DepthMap() = default;
  DepthMap(int w, int h) : z(w, h, 0.0) {}
  int width() const { return z.width(); }
  int height() const { return z.height(); }
  bool valid(int x, int y) const { return z(x, y) > 0.0; }
};

// Per-pixel depth variance in mm^2; 0 where the depth is invalid.
struct VarianceMap {
  Image<double> var;

  VarianceMap() = default;
  VarianceMap(int w, int h) : var(w, h, 0.0) {}
  int width() const { return var.width(); }
  int height() const { return var.height(); }
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  Vec2 project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  // Unit-z ray through pixel (u, v).
  Vec3 ray(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
  bool contains(double u, double v) const {
    return u >= 0.0 && u <= width - 1 && v >= 0.0 && v <= height - 1;
  }

  void validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw InputError("intrinsics: focal length must be positive");
    if (cx < 0 || cx > width || cy < 0 || cy > height)
      throw InputError("intrinsics: principal point outside image");
  }
};

// Row-partitioned loop used by the per-pixel kernels. parallel=false is the
// serial reference path; both run the same per-row body, so results match
// bit for bit.
template <typename Fn>
void parallel_rows(int height, bool parallel, Fn&& fn) {
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) fn(y);
  } else {
    for (int y = 0; y < height; ++y) fn(y);
  }
}

inline void symmetrize(Mat3& m) { m = 0.5 * (m + m.transpose()).eval(); }
inline void symmetrize(Mat4& m) { m = 0.5 * (m + m.transpose()).eval(); }
inline void symmetrize(Mat6& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace rdvo
