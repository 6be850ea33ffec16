#include <doctest.h>

#include <Eigen/Geometry>

#include <filesystem>
#include <fstream>
#include <random>

#include "rdvo/evaluation.hpp"
#include "rdvo/synthetic.hpp"
#include "metric_oracles.hpp"
#include "test_helpers.hpp"

using namespace rdvo;
using namespace rdvo::testing;

namespace {

std::vector<TimedPose> random_trajectory(std::mt19937_64& rng, int n, double dt = 0.1) {
  std::vector<TimedPose> out;
  Pose cum;
  for (int i = 0; i < n; ++i) {
    TimedPose tp;
    tp.timestamp = i * dt;
    tp.pose = cum;
    out.push_back(tp);
    cum = compose(cum, random_pose(rng, 40.0, 0.08));
  }
  return out;
}

std::vector<TimedPose> transformed(const std::vector<TimedPose>& traj, const Pose& g) {
  std::vector<TimedPose> out = traj;
  for (TimedPose& tp : out) tp.pose = compose(g, tp.pose);
  return out;
}

}  // namespace

TEST_CASE("identical trajectories evaluate to exactly zero") {
  std::mt19937_64 rng(1);
  const auto traj = random_trajectory(rng, 60);
  const RpeResult rpe = compute_rpe(traj, traj);
  CHECK(rpe.pairs > 0);
  CHECK(rpe.translational_rmse == 0.0);
  CHECK(rpe.rotational_rmse == 0.0);
  CHECK(compute_ate(traj, traj) == 0.0);
}

TEST_CASE("RPE ignores a constant global offset") {
  std::mt19937_64 rng(2);
  const auto traj = random_trajectory(rng, 50);
  const auto moved = transformed(traj, random_pose(rng, 3000.0, 1.2));
  const RpeResult rpe = compute_rpe(moved, traj);
  CHECK(rpe.translational_rmse < 1e-9);
  CHECK(rpe.rotational_rmse < 1e-9);
}

TEST_CASE("ATE absorbs rigid transforms of either trajectory") {
  std::mt19937_64 rng(3);
  const auto traj = random_trajectory(rng, 50);
  const auto moved = transformed(traj, random_pose(rng, 5000.0, 1.0));
  CHECK(compute_ate(moved, traj) < 1e-9);
  CHECK(compute_ate(traj, moved) < 1e-9);
}

TEST_CASE("constant-velocity speed error gives the closed-form RPE") {
  // truth moves 100 mm/s along x, estimate 110 mm/s
  std::vector<TimedPose> truth, est;
  for (int i = 0; i <= 30; ++i) {
    TimedPose t;
    t.timestamp = 0.1 * i;
    t.pose.t = Vec3(100.0 * t.timestamp, 0.0, 0.0);
    truth.push_back(t);
    t.pose.t = Vec3(110.0 * t.timestamp, 0.0, 0.0);
    est.push_back(t);
  }
  const RpeResult rpe = compute_rpe(est, truth);
  CHECK(rpe.translational_rmse == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(rpe.rotational_rmse == doctest::Approx(0.0));
}

TEST_CASE("scaled square path matches the brute-force alignment oracle") {
  std::vector<TimedPose> truth, est;
  const double side = 1000.0;
  int k = 0;
  for (const auto& corner :
       {Vec3(0, 0, 0), Vec3(side, 0, 0), Vec3(side, side, 0), Vec3(0, side, 0)}) {
    for (int i = 0; i < 5; ++i) {
      TimedPose t;
      t.timestamp = k++ * 0.25;
      t.pose.t = corner + Vec3(1.0, 2.0, 0.5) * i;
      truth.push_back(t);
      t.pose.t = 1.1 * t.pose.t;
      est.push_back(t);
    }
  }
  const double ate = compute_ate(est, truth);
  CHECK(ate > 0.0);  // rigid alignment cannot absorb scale
  CHECK(ate == doctest::Approx(ate_oracle(est, truth)).epsilon(1e-9));
}

TEST_CASE("metrics agree with brute-force oracles on random pairs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto truth = random_trajectory(rng, 40 + int(rng() % 20));
    auto est = truth;
    std::normal_distribution<double> g(0.0, 5.0);
    for (TimedPose& tp : est) {
      tp.pose.t += Vec3(g(rng), g(rng), g(rng));
      tp.pose.q = Eigen::Quaterniond(Eigen::AngleAxisd(0.01 * g(rng), random_vec(rng, 1.0).normalized())) * tp.pose.q;
      tp.pose.normalize();
    }
    const RpeResult mine = compute_rpe(est, truth);
    const RpeResult oracle = rpe_oracle(est, truth);
    REQUIRE(mine.pairs == oracle.pairs);
    CHECK(mine.translational_rmse ==
          doctest::Approx(oracle.translational_rmse).epsilon(1e-9));
    CHECK(mine.rotational_rmse == doctest::Approx(oracle.rotational_rmse).epsilon(1e-9));
    CHECK(compute_ate(est, truth) == doctest::Approx(ate_oracle(est, truth)).epsilon(1e-9));
  }
}

TEST_CASE("evaluation error paths") {
  std::mt19937_64 rng(5);
  const auto traj = random_trajectory(rng, 5, 0.01);  // 0.05 s long: no 1 s pairs
  CHECK_THROWS_AS(compute_rpe(traj, traj), InsufficientDataError);

  std::vector<TimedPose> stuck(8);
  for (int i = 0; i < 8; ++i) stuck[i].timestamp = 0.3 * i;
  CHECK_THROWS_AS(compute_ate(stuck, transformed(stuck, random_pose(rng, 100.0, 0.1))),
                  DegenerateError);
}

TEST_CASE("pose interpolation is linear in translation, spherical in rotation") {
  std::vector<TimedPose> traj(2);
  traj[0].timestamp = 0.0;
  traj[1].timestamp = 1.0;
  traj[1].pose.t = Vec3(100.0, 0.0, 0.0);
  traj[1].pose.q = Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Vec3::UnitZ()));
  const auto mid = interpolate_pose(traj, 0.5);
  REQUIRE(mid.has_value());
  CHECK((mid->t - Vec3(50.0, 0.0, 0.0)).norm() < 1e-12);
  CHECK(Eigen::AngleAxisd(mid->q).angle() == doctest::Approx(0.2));
  CHECK_FALSE(interpolate_pose(traj, 1.5).has_value());
  CHECK_FALSE(interpolate_pose(traj, -0.5).has_value());
}

TEST_CASE("load_tum_sequence round trips a generated directory") {
  const std::string dir = "/tmp/rdvo_test_seq_load";
  SceneSpec scene = make_room_scene(6, 8, 4);
  generate_sequence(scene, dir, 3, 5.0);

  OdometryConfig cfg;
  const Sequence seq = load_tum_sequence(dir, cfg);
  CHECK(seq.frames.size() == 6);
  CHECK(seq.skipped_frames == 0);
  CHECK(seq.camera.width == scene.camera.width);
  CHECK(seq.groundtruth.size() == 6);
  for (const SequenceFrame& f : seq.frames) {
    CHECK(std::filesystem::exists(f.depth_path));
    CHECK(std::filesystem::exists(f.feature_path));
    CHECK(!f.gt_depth_path.empty());
  }

  SUBCASE("zero offset with shifted stamps skips everything") {
    // rewrite features.txt with shifted timestamps
    auto entries = read_index(dir + "/features.txt");
    for (auto& e : entries) e.timestamp += 0.01;
    write_index(dir + "/features.txt", entries);
    OdometryConfig strict;
    strict.association_offset = 0.0;
    const Sequence none = load_tum_sequence(dir, strict);
    CHECK(none.frames.empty());
    CHECK(none.skipped_frames == 6);
  }
  SUBCASE("missing index raises an error naming the file") {
    std::filesystem::remove(dir + "/depth.txt");
    CHECK_THROWS_WITH_AS(load_tum_sequence(dir, cfg), doctest::Contains("depth.txt"), IoError);
  }
  std::filesystem::remove_all(dir);
}
