#include <doctest.h>

#include <random>
#include <set>

#include "rdvo/matching.hpp"
#include "test_helpers.hpp"

using namespace rdvo;
using namespace rdvo::testing;

namespace {

Eigen::VectorXf desc_from_seed(uint32_t seed, int dim = 8) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Eigen::VectorXf d(dim);
  for (int i = 0; i < dim; ++i) d(i) = g(rng);
  return d;
}

FeatureFrame random_point_frame(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 639.0), v(0.0, 479.0);
  FeatureFrame f;
  for (int i = 0; i < n; ++i) {
    PointFeature p;
    p.pixel = Vec2(u(rng), v(rng));
    p.descriptor = desc_from_seed(uint32_t(rng()));
    f.points.push_back(std::move(p));
  }
  return f;
}

PlaneSegment make_segment(const Vec3& normal, double d, int x0, int x1, int w = 64, int h = 48) {
  PlaneSegment seg;
  seg.mask = PixelMask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = x0; x < x1; ++x) {
      seg.mask.set(x, y);
      seg.inlier_indices.push_back(y * w + x);
    }
  seg.plane.normal = normal.normalized();
  seg.plane.d = d;
  seg.plane.theta_m = seg.plane.normal / d;
  return seg;
}

}  // namespace

TEST_CASE("match_points on identical frames is the identity") {
  std::mt19937_64 rng(1);
  const FeatureFrame f = random_point_frame(rng, 25);
  const auto matches = match_points(f, f, {});
  CHECK(matches.size() == 25);
  for (const auto& [a, b] : matches) CHECK(a == b);
}

TEST_CASE("match_points rejects displacement beyond the pixel gate") {
  FeatureFrame prev, cur;
  PointFeature p;
  p.pixel = Vec2(100.0, 100.0);
  p.descriptor = desc_from_seed(7);
  prev.points.push_back(p);
  p.pixel = Vec2(100.0 + 61.0, 100.0);  // just past the 60 px default
  cur.points.push_back(p);
  CHECK(match_points(prev, cur, {}).empty());
  p.pixel = Vec2(100.0 + 30.0, 100.0);
  cur.points[0] = p;
  CHECK(match_points(prev, cur, {}).size() == 1);
}

TEST_CASE("match_points picks the clearly closer descriptor") {
  FeatureFrame prev, cur;
  PointFeature q;
  q.pixel = Vec2(200.0, 200.0);
  q.descriptor = desc_from_seed(42);
  prev.points.push_back(q);

  PointFeature good = q;  // descriptor distance ~0
  good.pixel = Vec2(205.0, 200.0);
  PointFeature bad = q;
  bad.pixel = Vec2(195.0, 200.0);
  bad.descriptor = q.descriptor * 2.0f;  // twice the distance of good
  cur.points.push_back(bad);
  cur.points.push_back(good);
  const auto matches = match_points(prev, cur, {});
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].second == 1);
}

TEST_CASE("matching is one-to-one on random frames") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureFrame prev = random_point_frame(rng, 30);
    FeatureFrame cur = prev;
    std::shuffle(cur.points.begin(), cur.points.end(), rng);
    // duplicate some descriptors to provoke collisions
    for (int i = 0; i < 5; ++i) cur.points[i].descriptor = cur.points[i + 5].descriptor;
    const auto matches = match_points(prev, cur, {});
    std::set<int> seen_prev, seen_cur;
    for (const auto& [a, b] : matches) {
      CHECK(seen_prev.insert(a).second);
      CHECK(seen_cur.insert(b).second);
    }
  }
}

TEST_CASE("match_lines geometric gates") {
  MatchParams params;
  FeatureFrame prev, cur;
  LineFeature l;
  l.p1 = Vec2(100.0, 100.0);
  l.p2 = Vec2(300.0, 100.0);
  l.descriptor = desc_from_seed(5);
  prev.lines.push_back(l);

  SUBCASE("identical frames self-match") {
    cur.lines.push_back(l);
    const auto matches = match_lines(prev, cur, params);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0] == std::pair<int, int>(0, 0));
  }
  SUBCASE("a 30 degree slope change fails the 10 degree gate") {
    LineFeature rotated = l;
    const double a = 30.0 * M_PI / 180.0;
    const Vec2 d = l.p2 - l.p1;
    rotated.p2 = l.p1 + Vec2(d.x() * std::cos(a), d.x() * std::sin(a));
    cur.lines.push_back(rotated);
    CHECK(match_lines(prev, cur, params).empty());
  }
  SUBCASE("a parallel line offset beyond the distance gate fails") {
    LineFeature shifted = l;
    shifted.p1.y() += params.line_max_origin_dist + 5.0;
    shifted.p2.y() += params.line_max_origin_dist + 5.0;
    cur.lines.push_back(shifted);
    CHECK(match_lines(prev, cur, params).empty());

    shifted.p1.y() = l.p1.y() + 20.0;  // within the gate
    shifted.p2.y() = l.p2.y() + 20.0;
    cur.lines[0] = shifted;
    CHECK(match_lines(prev, cur, params).size() == 1);
  }
}

TEST_CASE("plane_to_plane_distance") {
  auto plane = [](const Vec3& n, double d) {
    PlaneParams p;
    p.normal = n.normalized();
    p.d = d;
    return p;
  };
  CHECK(plane_to_plane_distance(plane(Vec3::UnitZ(), 1000.0), plane(Vec3::UnitZ(), 1000.0)) == 0.0);
  CHECK(plane_to_plane_distance(plane(Vec3::UnitZ(), 1000.0), plane(Vec3::UnitZ(), 1050.0)) ==
        doctest::Approx(50.0));
  CHECK(plane_to_plane_distance(plane(Vec3::UnitX(), 1000.0), plane(Vec3::UnitY(), 1000.0)) ==
        doctest::Approx(1000.0 * std::sqrt(2.0)));
}

TEST_CASE("plane embedding distance is a metric") {
  std::mt19937_64 rng(4);
  auto random_plane = [&] {
    PlaneParams p;
    p.normal = random_vec(rng, 1.0).normalized();
    p.d = 100.0 + std::abs(random_vec(rng, 1.0).x()) * 2000.0;
    return p;
  };
  for (int i = 0; i < 50; ++i) {
    const PlaneParams a = random_plane(), b = random_plane(), c = random_plane();
    const double ab = plane_to_plane_distance(a, b);
    const double bc = plane_to_plane_distance(b, c);
    const double ac = plane_to_plane_distance(a, c);
    CHECK(ab >= 0.0);
    CHECK(ac <= ab + bc + 1e-9);
    CHECK(plane_to_plane_distance(a, a) == 0.0);
  }
}

TEST_CASE("match_planes") {
  MatchParams params;

  SUBCASE("identical segmentation self-matches") {
    std::vector<PlaneSegment> prev{make_segment(Vec3::UnitZ(), 1000.0, 0, 32),
                                   make_segment(Vec3::UnitX(), 1500.0, 32, 64)};
    const auto matches = match_planes(prev, prev, params);
    REQUIRE(matches.size() == 2);
    CHECK(matches[0] == std::pair<int, int>(0, 0));
    CHECK(matches[1] == std::pair<int, int>(1, 1));
  }
  SUBCASE("equal equations with disjoint masks fail the overlap gate") {
    std::vector<PlaneSegment> prev{make_segment(Vec3::UnitZ(), 1000.0, 0, 20)};
    std::vector<PlaneSegment> cur{make_segment(Vec3::UnitZ(), 1000.0, 40, 60)};
    CHECK(match_planes(prev, cur, params).empty());
  }
  SUBCASE("normal angle and offset gates") {
    std::vector<PlaneSegment> prev{make_segment(Vec3::UnitZ(), 1000.0, 0, 40)};
    std::vector<PlaneSegment> cur{make_segment(Vec3(0.3, 0.0, 1.0), 1000.0, 0, 40)};
    CHECK(match_planes(prev, cur, params).empty());  // 16.7 degrees
    cur[0] = make_segment(Vec3::UnitZ(), 1120.0, 0, 40);
    CHECK(match_planes(prev, cur, params).empty());  // 120 mm offset
  }
  SUBCASE("the smaller embedding distance wins") {
    std::vector<PlaneSegment> prev{make_segment(Vec3::UnitZ(), 1000.0, 0, 40)};
    std::vector<PlaneSegment> cur{make_segment(Vec3::UnitZ(), 1040.0, 0, 40),
                                  make_segment(Vec3::UnitZ(), 1010.0, 0, 40)};
    const auto matches = match_planes(prev, cur, params);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].second == 1);  // 10 mm beats 40 mm
  }
}

TEST_CASE("hessian form of a 2d line") {
  const Vec3 l = line_hessian_2d(Vec2(0.0, 5.0), Vec2(10.0, 5.0));
  CHECK(l.head<2>().norm() == doctest::Approx(1.0));
  // all points on the segment satisfy the equation
  CHECK(std::abs(l.x() * 4.0 + l.y() * 5.0 + l.z()) < 1e-12);
  CHECK(std::abs(std::abs(l.z()) - 5.0) < 1e-12);  // distance to origin
}
