#include "rdvo/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rdvo {

DepthModel depth_model_from_string(const std::string& s) {
  if (s == "sensor") return DepthModel::kSensor;
  if (s == "cgm") return DepthModel::kCgm;
  if (s == "ogm") return DepthModel::kOgm;
  throw InputError("unknown depth model: " + s);
}

std::string to_string(DepthModel m) {
  switch (m) {
    case DepthModel::kSensor: return "sensor";
    case DepthModel::kCgm: return "cgm";
    default: return "ogm";
  }
}

FeatureSelection features_from_string(const std::string& s) {
  if (s == "points") return {true, false, false};
  if (s == "points+lines") return {true, true, false};
  if (s == "points+planes") return {true, false, true};
  if (s == "all") return {true, true, true};
  throw InputError("unknown feature selection: " + s);
}

std::string to_string(const FeatureSelection& f) {
  if (f.lines && f.planes) return "all";
  if (f.lines) return "points+lines";
  if (f.planes) return "points+planes";
  return "points";
}

void OdometryConfig::validate() const {
  if (window_length < 1) throw InputError("config: window_length must be >= 1");
  if (fuse_k < 1) throw InputError("config: fuse_k must be >= 1");
  if (fuse_gate_sigma <= 0) throw InputError("config: fuse_gate_sigma must be positive");
  if (prune_threshold <= 0) throw InputError("config: prune_threshold must be positive");
  if (c_q <= 0) throw InputError("config: c_q must be positive");
  if (depth_scale <= 0) throw InputError("config: depth_scale must be positive");
  if (ransac.threshold <= 0 || ransac.iterations < 1 || ransac.min_inliers < 2)
    throw InputError("config: invalid ransac parameters");
  if (matching.ratio <= 0 || matching.ratio > 1) throw InputError("config: invalid match ratio");
  if (estimation.alpha_plane <= 0) throw InputError("config: alpha must be positive");
  if (velocity_decay <= 0 || velocity_decay >= 1)
    throw InputError("config: velocity_decay must be in (0, 1)");
  if (!features.points && !features.lines && !features.planes)
    throw InputError("config: at least one feature type required");
}

namespace {

struct KeyTable {
  std::map<std::string, std::function<void(OdometryConfig&, const std::string&)>> setters;
  std::map<std::string, std::function<std::string(const OdometryConfig&)>> getters;

  template <typename T>
  void bind(const std::string& key, T OdometryConfig::* member) {
    setters[key] = [member, key](OdometryConfig& c, const std::string& v) {
      std::istringstream ss(v);
      if (!(ss >> c.*member)) throw InputError("config: bad value for " + key + ": " + v);
    };
    getters[key] = [member](const OdometryConfig& c) {
      std::ostringstream ss;
      ss.precision(12);
      ss << c.*member;
      return ss.str();
    };
  }

  template <typename Sub, typename T>
  void bind(const std::string& key, Sub OdometryConfig::* sub, T Sub::* member) {
    setters[key] = [sub, member, key](OdometryConfig& c, const std::string& v) {
      std::istringstream ss(v);
      if (!(ss >> c.*sub.*member)) throw InputError("config: bad value for " + key + ": " + v);
    };
    getters[key] = [sub, member](const OdometryConfig& c) {
      std::ostringstream ss;
      ss.precision(12);
      ss << c.*sub.*member;
      return ss.str();
    };
  }
};

const KeyTable& key_table() {
  static const KeyTable table = [] {
    KeyTable t;
    t.bind("window_length", &OdometryConfig::window_length);
    t.bind("fuse_k", &OdometryConfig::fuse_k);
    t.bind("fuse_gate_sigma", &OdometryConfig::fuse_gate_sigma);
    t.bind("prune_threshold", &OdometryConfig::prune_threshold);
    t.bind("c_q", &OdometryConfig::c_q);
    t.bind("depth_scale", &OdometryConfig::depth_scale);
    t.bind("line_max_samples", &OdometryConfig::line_max_samples);
    t.bind("pose_gate", &OdometryConfig::pose_gate);
    t.bind("velocity_decay", &OdometryConfig::velocity_decay);
    t.bind("seed", &OdometryConfig::seed);
    t.bind("association_offset", &OdometryConfig::association_offset);
    t.bind("log_pose_iterations", &OdometryConfig::log_pose_iterations);
    t.bind("ransac_threshold", &OdometryConfig::ransac, &RansacParams::threshold);
    t.bind("ransac_iterations", &OdometryConfig::ransac, &RansacParams::iterations);
    t.bind("ransac_min_inliers", &OdometryConfig::ransac, &RansacParams::min_inliers);
    t.bind("seg_tau_distance", &OdometryConfig::segmentation, &SegmentationParams::tau_distance);
    t.bind("seg_tau_normal_deg", &OdometryConfig::segmentation, &SegmentationParams::tau_normal_deg);
    t.bind("seg_min_inliers", &OdometryConfig::segmentation, &SegmentationParams::min_inliers);
    t.bind("match_ratio", &OdometryConfig::matching, &MatchParams::ratio);
    t.bind("match_max_pixel_dist", &OdometryConfig::matching, &MatchParams::max_pixel_dist);
    t.bind("line_max_angle_deg", &OdometryConfig::matching, &MatchParams::line_max_angle_deg);
    t.bind("line_max_origin_dist", &OdometryConfig::matching, &MatchParams::line_max_origin_dist);
    t.bind("plane_max_angle_deg", &OdometryConfig::matching, &MatchParams::plane_max_angle_deg);
    t.bind("plane_max_dist", &OdometryConfig::matching, &MatchParams::plane_max_dist);
    t.bind("plane_min_overlap", &OdometryConfig::matching, &MatchParams::plane_min_overlap);
    t.bind("alpha_plane", &OdometryConfig::estimation, &EstimateParams::alpha_plane);
    t.bind("tukey_c", &OdometryConfig::estimation, &EstimateParams::tukey_c);
    t.bind("lm_max_iterations", &OdometryConfig::estimation, &EstimateParams::max_iterations);
    t.bind("lm_damping_init", &OdometryConfig::estimation, &EstimateParams::damping_init);

    t.setters["depth_model"] = [](OdometryConfig& c, const std::string& v) {
      c.depth_model = depth_model_from_string(v);
    };
    t.getters["depth_model"] = [](const OdometryConfig& c) { return to_string(c.depth_model); };
    t.setters["features"] = [](OdometryConfig& c, const std::string& v) {
      c.features = features_from_string(v);
    };
    t.getters["features"] = [](const OdometryConfig& c) { return to_string(c.features); };
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

OdometryConfig OdometryConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  OdometryConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError("config: missing '=' at " + path + ":" + std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = key_table().setters.find(key);
    if (it == key_table().setters.end()) throw InputError("config: unknown key '" + key + "'");
    it->second(cfg, value);
  }
  cfg.validate();
  return cfg;
}

void OdometryConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open config for writing: " + path);
  for (const auto& [key, getter] : key_table().getters) out << key << " = " << getter(*this) << '\n';
}

}  // namespace rdvo
