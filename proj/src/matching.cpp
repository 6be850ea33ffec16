#include "rdvo/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdvo {

namespace {

struct Best {
  int idx = -1;
  double dist = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  double pixel_dist = std::numeric_limits<double>::infinity();
};

// 2-NN by descriptor distance; ties resolved by pixel displacement.
template <typename GetDesc, typename GetPixelDist>
Best two_nn(int query, int count, GetDesc&& desc_dist, GetPixelDist&& pix_dist) {
  Best best;
  for (int j = 0; j < count; ++j) {
    const double d = desc_dist(query, j);
    const double pd = pix_dist(query, j);
    if (d < best.dist || (d == best.dist && pd < best.pixel_dist)) {
      best.second = best.dist;
      best.dist = d;
      best.idx = j;
      best.pixel_dist = pd;
    } else if (d < best.second) {
      best.second = d;
    }
  }
  return best;
}

bool ratio_ok(const Best& b, double ratio) {
  if (b.idx < 0) return false;
  if (!std::isfinite(b.second)) return true;  // single candidate
  if (b.second <= 0.0) return b.dist <= 0.0;
  return b.dist <= ratio * b.second;
}

template <typename Features, typename DescDist, typename Gate>
std::vector<std::pair<int, int>> mutual_best(const Features& prev, const Features& cur,
                                             DescDist&& desc_dist, Gate&& gate, double ratio) {
  const int np = int(prev.size()), nc = int(cur.size());
  auto pix_dist_fwd = [&](int i, int j) { return gate.displacement(i, j); };
  auto pix_dist_bwd = [&](int j, int i) { return gate.displacement(i, j); };

  std::vector<int> fwd(np, -1);
  for (int i = 0; i < np; ++i) {
    const Best b = two_nn(i, nc, desc_dist, pix_dist_fwd);
    if (ratio_ok(b, ratio) && gate.accept(i, b.idx)) fwd[i] = b.idx;
  }
  std::vector<int> bwd(nc, -1);
  auto desc_dist_rev = [&](int j, int i) { return desc_dist(i, j); };
  for (int j = 0; j < nc; ++j) {
    const Best b = two_nn(j, np, desc_dist_rev, pix_dist_bwd);
    if (ratio_ok(b, ratio) && gate.accept(b.idx, j)) bwd[j] = b.idx;
  }

  std::vector<std::pair<int, int>> matches;
  for (int i = 0; i < np; ++i)
    if (fwd[i] >= 0 && bwd[fwd[i]] == i) matches.emplace_back(i, fwd[i]);
  return matches;
}

double descriptor_l2(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return double((a - b).norm());
}

}  // namespace

Vec3 line_hessian_2d(const Vec2& p1, const Vec2& p2) {
  const Vec2 d = p2 - p1;
  const double n = d.norm();
  if (n < 1e-12) throw InputError("line_hessian_2d: coincident endpoints");
  Vec3 l(-d.y() / n, d.x() / n, 0.0);
  l.z() = -(l.x() * p1.x() + l.y() * p1.y());
  return l;
}

std::vector<std::pair<int, int>> match_points(const FeatureFrame& prev, const FeatureFrame& cur,
                                              const MatchParams& params) {
  struct Gate {
    const FeatureFrame& prev;
    const FeatureFrame& cur;
    double max_dist;
    double displacement(int i, int j) const {
      return (prev.points[i].pixel - cur.points[j].pixel).norm();
    }
    bool accept(int i, int j) const { return displacement(i, j) <= max_dist; }
  } gate{prev, cur, params.max_pixel_dist};

  auto desc = [&](int i, int j) {
    return descriptor_l2(prev.points[i].descriptor, cur.points[j].descriptor);
  };
  return mutual_best(prev.points, cur.points, desc, gate, params.ratio);
}

std::vector<std::pair<int, int>> match_lines(const FeatureFrame& prev, const FeatureFrame& cur,
                                             const MatchParams& params) {
  struct Gate {
    const FeatureFrame& prev;
    const FeatureFrame& cur;
    double max_angle;
    double max_origin_dist;
    double displacement(int i, int j) const {
      const Vec2 mp = 0.5 * (prev.lines[i].p1 + prev.lines[i].p2);
      const Vec2 mc = 0.5 * (cur.lines[j].p1 + cur.lines[j].p2);
      return (mp - mc).norm();
    }
    bool accept(int i, int j) const {
      const Vec3 lp = line_hessian_2d(prev.lines[i].p1, prev.lines[i].p2);
      const Vec3 lc = line_hessian_2d(cur.lines[j].p1, cur.lines[j].p2);
      const double ap = std::atan2(lp.y(), lp.x());
      const double ac = std::atan2(lc.y(), lc.x());
      double da = std::abs(ap - ac);
      da = std::min(da, 2.0 * M_PI - da);
      da = std::min(da, M_PI - da);  // undirected slope
      if (da > max_angle) return false;
      return std::abs(std::abs(lp.z()) - std::abs(lc.z())) <= max_origin_dist;
    }
  } gate{prev, cur, params.line_max_angle_deg * M_PI / 180.0, params.line_max_origin_dist};

  auto desc = [&](int i, int j) {
    return descriptor_l2(prev.lines[i].descriptor, cur.lines[j].descriptor);
  };
  return mutual_best(prev.lines, cur.lines, desc, gate, params.ratio);
}

double plane_to_plane_distance(const PlaneParams& a, const PlaneParams& b) {
  return (b.embedding() - a.embedding()).norm();
}

std::vector<std::pair<int, int>> match_planes(const std::vector<PlaneSegment>& prev,
                                              const std::vector<PlaneSegment>& cur,
                                              const MatchParams& params) {
  const double cos_max = std::cos(params.plane_max_angle_deg * M_PI / 180.0);

  struct Candidate {
    int i, j;
    double dist;
  };
  std::vector<Candidate> candidates;
  for (int i = 0; i < int(prev.size()); ++i) {
    for (int j = 0; j < int(cur.size()); ++j) {
      const PlaneParams& a = prev[i].plane;
      const PlaneParams& b = cur[j].plane;
      // geometric constraints first, bitmask overlap second
      if (a.normal.dot(b.normal) < cos_max) continue;
      if (std::abs(a.d - b.d) >= params.plane_max_dist) continue;
      const size_t smaller = std::min(prev[i].mask.count(), cur[j].mask.count());
      if (smaller == 0) continue;
      const size_t ov = PixelMask::overlap(prev[i].mask, cur[j].mask);
      if (double(ov) < params.plane_min_overlap * double(smaller)) continue;
      candidates.push_back({i, j, plane_to_plane_distance(a, b)});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });

  std::vector<char> used_prev(prev.size(), 0), used_cur(cur.size(), 0);
  std::vector<std::pair<int, int>> matches;
  for (const Candidate& c : candidates) {
    if (used_prev[c.i] || used_cur[c.j]) continue;
    used_prev[c.i] = used_cur[c.j] = 1;
    matches.emplace_back(c.i, c.j);
  }
  std::sort(matches.begin(), matches.end());
  return matches;
}

MatchSets match_frames(const FeatureFrame& prev, const FeatureFrame& cur,
                       const MatchParams& params) {
  MatchSets sets;
  sets.points = match_points(prev, cur, params);
  sets.lines = match_lines(prev, cur, params);
  sets.planes = match_planes(prev.planes, cur.planes, params);
  return sets;
}

}  // namespace rdvo
