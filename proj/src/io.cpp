#include "rdvo/io.hpp"

#include <png.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace rdvo {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open file: " + path);
  return f;
}

}  // namespace

void write_depth_png(const std::string& path, const DepthMap& depth, double scale) {
  FilePtr fp = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, depth.width(), depth.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(size_t(depth.width()) * 2);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double v = depth.z(x, y) * scale;
      const uint16_t q = v <= 0.0 ? 0 : uint16_t(std::min(65535.0, std::round(v)));
      row[2 * x] = uint8_t(q >> 8);  // PNG is big-endian
      row[2 * x + 1] = uint8_t(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

DepthMap read_depth_png(const std::string& path, double scale) {
  FilePtr fp = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected 16-bit grayscale png: " + path);
  }
  DepthMap depth(w, h);
  std::vector<uint8_t> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      const uint16_t q = uint16_t(row[2 * x]) << 8 | row[2 * x + 1];
      depth.z(x, y) = q == 0 ? 0.0 : double(q) / scale;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return depth;
}

void write_variance_raster(const std::string& path, const VarianceMap& var) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file: " + path);
  const uint32_t w = var.width(), h = var.height();
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> data(size_t(w) * h);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) data[size_t(y) * w + x] = float(var.var(x, y));
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * 4));
  if (!out) throw IoError("write failed: " + path);
}

VarianceMap read_variance_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  std::vector<float> data(size_t(w) * h);
  in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * 4));
  if (!in) throw IoError("truncated variance raster: " + path);
  VarianceMap var(static_cast<int>(w), static_cast<int>(h));
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) var.var(x, y) = data[size_t(y) * w + x];
  return var;
}

void write_trajectory(const std::string& path, const std::vector<TimedPose>& trajectory) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file: " + path);
  out.precision(9);
  out << std::fixed;
  for (const TimedPose& tp : trajectory) {
    const Vec3 t_m = tp.pose.t / 1000.0;
    out << tp.timestamp << ' ' << t_m.x() << ' ' << t_m.y() << ' ' << t_m.z() << ' '
        << tp.pose.q.x() << ' ' << tp.pose.q.y() << ' ' << tp.pose.q.z() << ' ' << tp.pose.q.w()
        << '\n';
  }
}

std::vector<TimedPose> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<TimedPose> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TimedPose tp;
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> tp.timestamp >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw IoError("malformed trajectory line in " + path + ": " + line);
    tp.pose.t = Vec3(tx, ty, tz) * 1000.0;
    tp.pose.q = Eigen::Quaterniond(qw, qx, qy, qz);
    tp.pose.normalize();
    out.push_back(tp);
  }
  return out;
}

void write_feature_frame(const std::string& path, const FeatureFrame& frame) {
  nlohmann::json doc;
  doc["points"] = nlohmann::json::array();
  for (const PointFeature& f : frame.points) {
    nlohmann::json j;
    j["u"] = f.pixel.x();
    j["v"] = f.pixel.y();
    j["desc"] = std::vector<float>(f.descriptor.data(), f.descriptor.data() + f.descriptor.size());
    doc["points"].push_back(std::move(j));
  }
  doc["lines"] = nlohmann::json::array();
  for (const LineFeature& f : frame.lines) {
    nlohmann::json j;
    j["u1"] = f.p1.x();
    j["v1"] = f.p1.y();
    j["u2"] = f.p2.x();
    j["v2"] = f.p2.y();
    j["desc"] = std::vector<float>(f.descriptor.data(), f.descriptor.data() + f.descriptor.size());
    doc["lines"].push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file: " + path);
  out << doc.dump();
}

FeatureFrame read_feature_frame(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed feature file " + path + ": " + e.what());
  }
  FeatureFrame frame;
  for (const auto& j : doc.value("points", nlohmann::json::array())) {
    PointFeature f;
    f.pixel = Vec2(j.at("u").get<double>(), j.at("v").get<double>());
    const auto desc = j.at("desc").get<std::vector<float>>();
    f.descriptor = Eigen::Map<const Eigen::VectorXf>(desc.data(), long(desc.size()));
    frame.points.push_back(std::move(f));
  }
  for (const auto& j : doc.value("lines", nlohmann::json::array())) {
    LineFeature f;
    f.p1 = Vec2(j.at("u1").get<double>(), j.at("v1").get<double>());
    f.p2 = Vec2(j.at("u2").get<double>(), j.at("v2").get<double>());
    const auto desc = j.at("desc").get<std::vector<float>>();
    f.descriptor = Eigen::Map<const Eigen::VectorXf>(desc.data(), long(desc.size()));
    frame.lines.push_back(std::move(f));
  }
  return frame;
}

void write_index(const std::string& path, const std::vector<IndexEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file: " + path);
  out.precision(6);
  out << std::fixed;
  for (const IndexEntry& e : entries) out << e.timestamp << ' ' << e.path << '\n';
}

std::vector<IndexEntry> read_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<IndexEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    IndexEntry e;
    if (!(ss >> e.timestamp >> e.path)) throw IoError("malformed index line in " + path);
    out.push_back(std::move(e));
  }
  return out;
}

void write_calibration(const std::string& path, const CameraIntrinsics& K) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file: " + path);
  out.precision(9);
  out << K.fx << ' ' << K.fy << ' ' << K.cx << ' ' << K.cy << ' ' << K.width << ' ' << K.height
      << '\n';
}

CameraIntrinsics read_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  CameraIntrinsics K;
  if (!(in >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height))
    throw IoError("malformed calibration file: " + path);
  K.validate();
  return K;
}

void write_label_png(const std::string& path, const Image<uint8_t>& labels) {
  FilePtr fp = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, labels.width(), labels.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(labels.width());
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) row[x] = labels(x, y);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace rdvo
