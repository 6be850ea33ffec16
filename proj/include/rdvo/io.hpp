#pragma once

#include <string>
#include <vector>

#include "rdvo/core.hpp"
#include "rdvo/matching.hpp"
#include "rdvo/pose.hpp"

namespace rdvo {

// 16-bit grayscale PNG, stored value = depth_mm * scale, 0 = invalid.
void write_depth_png(const std::string& path, const DepthMap& depth, double scale);
DepthMap read_depth_png(const std::string& path, double scale);

// Raw float32 raster with an 8-byte header (width, height as u32 LE).
void write_variance_raster(const std::string& path, const VarianceMap& var);
VarianceMap read_variance_raster(const std::string& path);

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

// TUM trajectory convention: "timestamp tx ty tz qx qy qz qw", translation
// in meters (poses internally keep mm).
void write_trajectory(const std::string& path, const std::vector<TimedPose>& trajectory);
std::vector<TimedPose> read_trajectory(const std::string& path);

// Per-frame feature document {"points": [{u, v, desc}], "lines": [{u1, v1,
// u2, v2, desc}]}; 3D fields are never stored, they are fitted in-process.
void write_feature_frame(const std::string& path, const FeatureFrame& frame);
FeatureFrame read_feature_frame(const std::string& path);

// Timestamp index ("<timestamp> <relative path>" per line, # comments).
struct IndexEntry {
  double timestamp = 0.0;
  std::string path;
};
void write_index(const std::string& path, const std::vector<IndexEntry>& entries);
std::vector<IndexEntry> read_index(const std::string& path);

// Single-line camera file: "fx fy cx cy width height".
void write_calibration(const std::string& path, const CameraIntrinsics& K);
CameraIntrinsics read_calibration(const std::string& path);

// 8-bit label image for segment debugging (label 0 = unsegmented).
void write_label_png(const std::string& path, const Image<uint8_t>& labels);

}  // namespace rdvo
