#pragma once

#include <optional>
#include <vector>

#include "rdvo/core.hpp"
#include "rdvo/geometry.hpp"

namespace rdvo {

struct PointFeature {
  Vec2 pixel = Vec2::Zero();
  Eigen::VectorXf descriptor;
  std::optional<Point3> p3d;  // absent when depth was missing or the fit failed
};

struct LineFeature {
  Vec2 p1 = Vec2::Zero();
  Vec2 p2 = Vec2::Zero();
  Eigen::VectorXf descriptor;
  std::optional<Line3> l3d;
};

struct FeatureFrame {
  std::vector<PointFeature> points;
  std::vector<LineFeature> lines;
  std::vector<PlaneSegment> planes;
};

// Index pairs (previous, current) per feature type.
struct MatchSets {
  std::vector<std::pair<int, int>> points;
  std::vector<std::pair<int, int>> lines;
  std::vector<std::pair<int, int>> planes;
};

struct MatchParams {
  double ratio = 0.8;
  double max_pixel_dist = 60.0;
  double line_max_angle_deg = 10.0;
  double line_max_origin_dist = 40.0;  // px
  double plane_max_angle_deg = 10.0;
  double plane_max_dist = 100.0;  // mm
  double plane_min_overlap = 0.5;
};

// Descriptor k-NN (k = 2) with ratio test and a pixel-distance gate;
// one-to-one through mutual-best filtering. Ties on descriptor distance
// break toward the smaller pixel displacement.
std::vector<std::pair<int, int>> match_points(const FeatureFrame& prev, const FeatureFrame& cur,
                                              const MatchParams& params);

// Like match_points, gated on the 2D line Hessian parameters: slope angle
// and distance to the image origin.
std::vector<std::pair<int, int>> match_lines(const FeatureFrame& prev, const FeatureFrame& cur,
                                             const MatchParams& params);

// |d_b N_b - d_a N_a|, the distance between the point embeddings of the
// planes.
double plane_to_plane_distance(const PlaneParams& a, const PlaneParams& b);

// Candidates must pass the normal-angle, offset and mask-overlap
// constraints; the minimum plane-to-plane distance wins, one-to-one.
std::vector<std::pair<int, int>> match_planes(const std::vector<PlaneSegment>& prev,
                                              const std::vector<PlaneSegment>& cur,
                                              const MatchParams& params);

MatchSets match_frames(const FeatureFrame& prev, const FeatureFrame& cur,
                       const MatchParams& params);

// Hessian normal form (a, b, c) of the infinite 2D line through two points,
// with (a, b) unit and c = -distance-to-origin sign convention a*u+b*v+c=0.
Vec3 line_hessian_2d(const Vec2& p1, const Vec2& p2);

}  // namespace rdvo
