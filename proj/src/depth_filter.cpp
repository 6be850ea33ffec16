#include "rdvo/depth_filter.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace rdvo {

double sensor_variance(double z, const SensorNoiseModel& model) {
  if (z < 0.0) throw InputError("sensor_variance: negative depth");
  if (z == 0.0) return 0.0;
  const double sigma = model.c_q * z * z;
  return sigma * sigma;
}

VarianceMap sensor_variance_map(const DepthMap& depth, const SensorNoiseModel& model,
                                bool parallel) {
  VarianceMap out(depth.width(), depth.height());
  parallel_rows(depth.height(), parallel, [&](int y) {
    for (int x = 0; x < depth.width(); ++x)
      out.var(x, y) = sensor_variance(depth.z(x, y), model);
  });
  return out;
}

Image<double> cosine_map(const CameraIntrinsics& K) {
  Image<double> out(K.width, K.height, 1.0);
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < K.width; ++x)
      out(x, y) = 1.0 / K.ray(x, y).norm();
  return out;
}

std::pair<DepthMap, VarianceMap> gm_convolve(const DepthMap& depth, const VarianceMap& var,
                                             bool parallel) {
  if (!depth.z.same_size(var.var)) throw InputError("gm_convolve: size mismatch");
  const int w = depth.width(), h = depth.height();
  static constexpr int kKernel[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};

  DepthMap out_z(w, h);
  VarianceMap out_v(w, h);
  parallel_rows(h, parallel, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, m1 = 0.0, m2 = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const double z = depth.z(nx, ny);
          if (z <= 0.0) continue;
          const double wk = kKernel[dy + 1][dx + 1];
          s += wk;
          m1 += wk * z;
          m2 += wk * (z * z + var.var(nx, ny));
        }
      }
      if (s == 0.0) continue;
      const double mean = m1 / s;
      out_z.z(x, y) = mean;
      out_v.var(x, y) = std::max(0.0, m2 / s - mean * mean);
    }
  });
  return {std::move(out_z), std::move(out_v)};
}

void window_push(RangePointWindow& window, std::vector<RangePoint> points, const Pose& rel) {
  WindowFrame frame;
  frame.id = window.next_id++;
  frame.cum = Pose::identity();
  frame.cum_cov.setZero();
  frame.points = std::move(points);
  window.frames.push_back(std::move(frame));

  for (WindowFrame& f : window.frames) {
    f.cum_cov = propagate_uncertainty(f.cum_cov, rel.cov, rel, f.cum);
    f.cum = compose(rel, f.cum);
  }
  while (int(window.frames.size()) > window.max_length)
    window.frames.erase(window.frames.begin());
}

void window_prune(RangePointWindow& window, double translation_threshold) {
  std::erase_if(window.frames, [&](const WindowFrame& f) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(f.cum_cov.topLeftCorner<3, 3>());
    return es.eigenvalues().maxCoeff() > translation_threshold;
  });
}

namespace {

struct PixelState {
  double sw = 0.0;   // sum of weights
  double m1 = 0.0;   // sum w * r
  double m2 = 0.0;   // sum w * (r^2 + var)
  int count = 0;
};

inline void admit(PixelState& st, double r, double var_r, const FuseParams& params) {
  if (var_r <= 0.0) return;
  if (params.gate_enabled && st.count >= params.gate_min_members) {
    const double mean = st.m1 / st.sw;
    const double var = std::max(0.0, st.m2 / st.sw - mean * mean);
    if (std::abs(r - mean) > params.gate_sigma * std::sqrt(var)) return;
  }
  const double w = 1.0 / var_r;
  st.sw += w;
  st.m1 += w * r;
  st.m2 += w * (r * r + var_r);
  st.count += 1;
}

struct Projected {
  int32_t pix = -1;
  double r = 0.0;
  double var_r = 0.0;
};

}  // namespace

std::pair<DepthMap, VarianceMap> temporal_fuse(const RangePointWindow& window,
                                               const DepthMap& current_range,
                                               const VarianceMap& current_var,
                                               const Image<double>& cosines,
                                               const CameraIntrinsics& K,
                                               const FuseParams& params, bool parallel) {
  const int w = current_range.width(), h = current_range.height();
  if (window.empty()) {
    // nothing to fuse; hand back the current maps converted to depth
    DepthMap out_z(w, h);
    VarianceMap out_v(w, h);
    parallel_rows(h, parallel, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const double r = current_range.z(x, y);
        if (r <= 0.0) continue;
        auto [z, var_z] = range_to_depth(r, current_var.var(x, y), cosines(x, y));
        out_z.z(x, y) = z;
        out_v.var(x, y) = var_z;
      }
    });
    return {std::move(out_z), std::move(out_v)};
  }

  std::vector<PixelState> state(size_t(w) * h);

  // The current measurement is the first member of its pixel.
  parallel_rows(h, parallel, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double r = current_range.z(x, y);
      if (r <= 0.0) continue;
      admit(state[size_t(y) * w + x], r, current_var.var(x, y), params);
    }
  });

  // Project window points newest-first. The transform/projection of a frame
  // is data parallel; the accumulator updates are applied serially in point
  // order so results do not depend on the thread count.
  std::vector<Projected> buffer;
  for (auto it = window.frames.rbegin(); it != window.frames.rend(); ++it) {
    const WindowFrame& frame = *it;
    buffer.assign(frame.points.size(), Projected{});
    const Mat3 R = frame.cum.rotation();
    const Vec3 t = frame.cum.t;
    const int n = int(frame.points.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < n; ++i) {
      const Vec3 pc = R * frame.points[i].p + t;
      if (pc.z() <= 0.0) continue;
      const Vec2 uv = K.project(pc);
      const int px = int(std::lround(uv.x()));
      const int py = int(std::lround(uv.y()));
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      buffer[i] = {int32_t(py * w + px), pc.norm(), frame.points[i].var_r};
    }
    for (const Projected& m : buffer)
      if (m.pix >= 0) admit(state[m.pix], m.r, m.var_r, params);
  }

  DepthMap out_z(w, h);
  VarianceMap out_v(w, h);
  parallel_rows(h, parallel, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const PixelState& st = state[size_t(y) * w + x];
      if (st.count == 0) continue;
      const double mean = st.m1 / st.sw;
      const double var = std::max(0.0, st.m2 / st.sw - mean * mean);
      auto [z, var_z] = range_to_depth(mean, var, cosines(x, y));
      out_z.z(x, y) = z;
      out_v.var(x, y) = var_z;
    }
  });
  return {std::move(out_z), std::move(out_v)};
}

std::vector<RangePoint> collect_range_points(const DepthMap& range, const VarianceMap& var_r,
                                             const CameraIntrinsics& K) {
  std::vector<RangePoint> points;
  points.reserve(size_t(range.width()) * range.height() / 2);
  for (int y = 0; y < range.height(); ++y) {
    for (int x = 0; x < range.width(); ++x) {
      const double r = range.z(x, y);
      if (r <= 0.0) continue;
      RangePoint rp;
      rp.p = r * K.ray(x, y).normalized();
      rp.var_r = var_r.var(x, y);
      points.push_back(rp);
    }
  }
  return points;
}

}  // namespace rdvo
