#include <doctest.h>

#include <random>

#include "rdvo/geometry.hpp"
#include "rdvo/pose.hpp"
#include "rdvo/pose_estimation.hpp"
#include "test_helpers.hpp"

using namespace rdvo;
using namespace rdvo::testing;

namespace {

CameraIntrinsics test_camera() { return {500.0, 500.0, 320.0, 240.0, 640, 480}; }

double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond err = a.conjugate() * b;
  return 2.0 * std::atan2(err.vec().norm(), std::abs(err.w()));
}

// residual jacobian vs central differences in the xi parameterization
template <typename F>
double residual_fd_error(const Eigen::MatrixXd& analytic, const Pose& pose, F&& eval) {
  auto f = [&](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
    Vec6 v = xi;
    return eval(pose_from_xi(v));
  };
  const Eigen::MatrixXd num = numeric_jacobian(f, pose_to_xi(pose), 1e-5);
  return jacobian_rel_error(analytic, num);
}

PlaneParams make_plane(const Vec3& normal, double d, double cov_scale = 0.0) {
  PlaneParams p;
  p.normal = normal.normalized();
  p.d = d;
  p.theta_m = p.normal / d;
  p.cov_theta = Mat4::Identity() * cov_scale;
  return p;
}

// transports a plane across X_cur = R X_prev + t (points prev -> cur)
PlaneParams transform_plane(const PlaneParams& prev, const Pose& rel) {
  PlaneParams out = prev;
  out.normal = rel.q * prev.normal;
  out.d = prev.d - out.normal.dot(rel.t);
  out.theta_m = out.normal / out.d;
  return out;
}

}  // namespace

TEST_CASE("compose and inverse") {
  std::mt19937_64 rng(1);
  SUBCASE("identity is neutral") {
    const Pose T = random_pose(rng, 100.0, 0.5);
    const Pose out = compose(Pose::identity(), T);
    CHECK((out.t - T.t).norm() < 1e-12);
    CHECK(rotation_angle(out.q, T.q) < 1e-12);
  }
  SUBCASE("T composed with its inverse is identity") {
    for (int i = 0; i < 20; ++i) {
      const Pose T = random_pose(rng, 500.0, 1.0);
      const Pose out = compose(T, T.inverse());
      CHECK(out.t.norm() < 1e-9);
      CHECK(rotation_angle(out.q, Eigen::Quaterniond::Identity()) < 1e-12);
    }
  }
  SUBCASE("two quarter turns about z make a half turn") {
    Pose quarter;
    quarter.q = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()));
    const Pose half = compose(quarter, quarter);
    const Mat3 expected = Eigen::AngleAxisd(M_PI, Vec3::UnitZ()).toRotationMatrix();
    CHECK((half.rotation() - expected).norm() < 1e-12);
  }
  SUBCASE("associative to 1e-12") {
    for (int i = 0; i < 20; ++i) {
      const Pose a = random_pose(rng, 300.0, 0.8);
      const Pose b = random_pose(rng, 300.0, 0.8);
      const Pose c = random_pose(rng, 300.0, 0.8);
      const Pose left = compose(compose(a, b), c);
      const Pose right = compose(a, compose(b, c));
      CHECK((left.t - right.t).norm() < 1e-9);
      CHECK(rotation_angle(left.q, right.q) < 1e-12);
    }
  }
  SUBCASE("quaternion norm survives long chains") {
    Pose acc;
    const Pose step = random_pose(rng, 10.0, 0.02);
    for (int i = 0; i < 10000; ++i) acc = compose(step, acc);
    CHECK(std::abs(acc.q.norm() - 1.0) < 1e-12);
    CHECK(acc.q.w() >= 0.0);
  }
}

TEST_CASE("rotation jacobian helpers match central differences") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = random_pose(rng, 0.0, 1.2);
    const Vec3 p = random_vec(rng, 800.0);

    auto rot = [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
      Vec6 xi = Vec6::Zero();
      xi.tail<3>() = qv;
      return pose_from_xi(xi).q * p;
    };
    const Eigen::MatrixXd num = numeric_jacobian(rot, pose.qvec(), 1e-7);
    CHECK(jacobian_rel_error(rotate_jacobian_qvec(pose.q, p), num) < 1e-5);

    auto rot_t = [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
      Vec6 xi = Vec6::Zero();
      xi.tail<3>() = qv;
      return pose_from_xi(xi).q.conjugate() * p;
    };
    const Eigen::MatrixXd num_t = numeric_jacobian(rot_t, pose.qvec(), 1e-7);
    CHECK(jacobian_rel_error(rotate_transpose_jacobian_qvec(pose.q, p), num_t) < 1e-5);
  }
}

TEST_CASE("point residual") {
  const CameraIntrinsics K = test_camera();
  std::mt19937_64 rng(3);

  SUBCASE("identity pose and consistent observation vanish") {
    Point3 P;
    P.p = Vec3(120.0, -80.0, 1500.0);
    const Vec2 obs = K.project(P.p);
    const PointResidual r = point_residual(P, obs, Pose::identity(), K);
    CHECK(r.value.norm() < 1e-12);
  }
  SUBCASE("z-translation of a centered point keeps a zero residual") {
    Point3 P;
    P.p = Vec3(0.0, 0.0, 1000.0);
    Pose pose;
    pose.t = Vec3(0.0, 0.0, 123.0);
    const PointResidual r = point_residual(P, K.project(P.p), pose, K);
    CHECK(r.value.norm() < 1e-12);
  }
  SUBCASE("cheirality failure is flagged") {
    Point3 P;
    P.p = Vec3(0.0, 0.0, 100.0);
    Pose pose;
    pose.t = Vec3(0.0, 0.0, -200.0);
    CHECK_FALSE(point_residual(P, Vec2(320, 240), pose, K).cheirality_ok);
  }
  SUBCASE("jacobian matches finite differences") {
    for (int i = 0; i < 100; ++i) {
      const Pose pose = random_pose(rng, 80.0, 0.3);
      Point3 P;
      P.p = random_vec(rng, 400.0) + Vec3(0, 0, 1500.0);
      P.cov = random_psd(rng, 3.0);
      const Vec2 obs(100.0 + 400.0 * (i % 10) / 10.0, 200.0);
      const PointResidual r = point_residual(P, obs, pose, K);
      const double err = residual_fd_error(r.jacobian, pose, [&](const Pose& p) {
        return point_residual(P, obs, p, K).value;
      });
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("line residual") {
  const CameraIntrinsics K = test_camera();
  std::mt19937_64 rng(4);

  SUBCASE("endpoints on the observed line vanish") {
    LineMatch m;
    m.prev_p1 = Vec3(-100.0, 50.0, 1200.0);
    m.prev_p2 = Vec3(150.0, 50.0, 1200.0);
    const Vec2 a = K.project(m.prev_p1);
    const Vec2 b = K.project(m.prev_p2);
    m.cur_line = Vec3(-(b - a).y(), (b - a).x(), 0.0).normalized();
    m.cur_line.z() = -(m.cur_line.x() * a.x() + m.cur_line.y() * a.y());
    const LineResidual r = line_residual(m, Pose::identity(), K);
    CHECK(r.value.norm() < 1e-10);
  }
  SUBCASE("an endpoint 5 px off a horizontal line reads 5") {
    LineMatch m;
    m.prev_p1 = Vec3(0.0, 0.0, 1000.0);                 // projects to (320, 240)
    m.prev_p2 = Vec3(100.0, 10.0, 1000.0);              // projects to (370, 245)
    m.cur_line = Vec3(0.0, 1.0, -240.0);                // the line v = 240
    const LineResidual r = line_residual(m, Pose::identity(), K);
    CHECK(r.value(0) == doctest::Approx(0.0));
    CHECK(r.value(1) == doctest::Approx(5.0));
  }
  SUBCASE("jacobian matches finite differences") {
    for (int i = 0; i < 100; ++i) {
      const Pose pose = random_pose(rng, 60.0, 0.25);
      LineMatch m;
      m.prev_p1 = random_vec(rng, 300.0) + Vec3(0, 0, 1400.0);
      m.prev_p2 = random_vec(rng, 300.0) + Vec3(0, 0, 1400.0);
      m.cov_p1 = random_psd(rng, 2.0);
      m.cov_p2 = random_psd(rng, 2.0);
      const Vec2 d = random_vec(rng, 1.0).head<2>();
      Vec3 l(-d.y(), d.x(), 0.0);
      l.head<2>().normalize();
      l.z() = -120.0 + 240.0 * (i % 2);
      m.cur_line = l;
      const LineResidual r = line_residual(m, pose, K);
      const double err = residual_fd_error(r.jacobian, pose, [&](const Pose& p) {
        return line_residual(m, p, K).value;
      });
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("plane residual") {
  std::mt19937_64 rng(5);

  SUBCASE("identity pose with identical planes vanishes") {
    const PlaneParams p = make_plane(Vec3(0.3, -0.2, 0.93), 1400.0);
    const PlaneResidual r = plane_residual({p, p}, Pose::identity());
    CHECK(r.value.norm() < 1e-12);
  }
  SUBCASE("pure translation along a shared normal") {
    const PlaneParams prev = make_plane(Vec3::UnitZ(), 1000.0);
    Pose pose;
    pose.t = Vec3(7.0, -3.0, 50.0);
    // consistent current plane: d' = d - N.t = 950
    const PlaneParams cur_consistent = transform_plane(prev, pose);
    CHECK(plane_residual({prev, cur_consistent}, pose).value.norm() < 1e-12);

    // offset plane: the z component reads t_z + d' - d
    const PlaneParams cur = make_plane(Vec3::UnitZ(), 930.0);
    const PlaneResidual r = plane_residual({prev, cur}, pose);
    CHECK(r.value.x() == doctest::Approx(0.0));
    CHECK(r.value.y() == doctest::Approx(0.0));
    CHECK(r.value.z() == doctest::Approx(pose.t.z() + cur.d - prev.d));  // -20
  }
  SUBCASE("consistent planes under a full pose vanish") {
    for (int i = 0; i < 20; ++i) {
      const Pose pose = random_pose(rng, 100.0, 0.4);
      const PlaneParams prev = make_plane(random_vec(rng, 1.0), 800.0 + 40.0 * i);
      const PlaneParams cur = transform_plane(prev, pose);
      CHECK(plane_residual({prev, cur}, pose).value.norm() < 1e-9);
    }
  }
  SUBCASE("jacobian matches finite differences") {
    for (int i = 0; i < 100; ++i) {
      const Pose pose = random_pose(rng, 90.0, 0.3);
      PlaneMatch m;
      m.prev = make_plane(random_vec(rng, 1.0), 700.0 + 10.0 * i, 1e-8);
      m.cur = make_plane(random_vec(rng, 1.0), 750.0 + 10.0 * i, 1e-8);
      const PlaneResidual r = plane_residual(m, pose);
      const double err = residual_fd_error(r.jacobian, pose, [&](const Pose& p) {
        return plane_residual(m, p).value;
      });
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("tukey weights") {
  CHECK(tukey_weight(0.0, 1.0) == 1.0);
  CHECK(tukey_weight(4.685, 1.0) == 0.0);
  CHECK(tukey_weight(10.0, 1.0) == 0.0);
  CHECK(tukey_weight(4.685 / 2.0, 1.0) == doctest::Approx(0.5625));
}

namespace {

struct TwoFrameSetup {
  std::vector<PointMatch> points;
  std::vector<LineMatch> lines;
  std::vector<PlaneMatch> planes;
  Pose truth;  // current <- previous
};

TwoFrameSetup make_setup(std::mt19937_64& rng, int n_points, int n_lines, int n_planes,
                         double noise_px = 0.0) {
  const CameraIntrinsics K = test_camera();
  TwoFrameSetup setup;
  const Vec3 axis = random_vec(rng, 1.0).normalized();
  setup.truth.q = Eigen::Quaterniond(Eigen::AngleAxisd(5.0 * M_PI / 180.0, axis));
  setup.truth.t = random_vec(rng, 1.0).normalized() * 50.0;
  setup.truth.normalize();

  std::normal_distribution<double> g(0.0, noise_px);
  for (int i = 0; i < n_points; ++i) {
    PointMatch m;
    m.prev.p = random_vec(rng, 600.0) + Vec3(0, 0, 2000.0);
    m.prev.cov = Mat3::Identity() * 1.0;
    m.obs = K.project(setup.truth.apply(m.prev.p));
    if (noise_px > 0.0) m.obs += Vec2(g(rng), g(rng));
    setup.points.push_back(m);
  }
  for (int i = 0; i < n_lines; ++i) {
    LineMatch m;
    m.prev_p1 = random_vec(rng, 500.0) + Vec3(0, 0, 1800.0);
    m.prev_p2 = m.prev_p1 + random_vec(rng, 400.0);
    if (m.prev_p2.z() < 500.0) m.prev_p2.z() = 500.0;
    m.cov_p1 = Mat3::Identity();
    m.cov_p2 = Mat3::Identity();
    const Vec2 a = K.project(setup.truth.apply(m.prev_p1));
    const Vec2 b = K.project(setup.truth.apply(m.prev_p2));
    Vec3 l(-(b - a).y(), (b - a).x(), 0.0);
    l.head<2>().normalize();
    l.z() = -(l.x() * a.x() + l.y() * a.y());
    m.cur_line = l;
    setup.lines.push_back(m);
  }
  const Vec3 normals[3] = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  for (int i = 0; i < n_planes; ++i) {
    PlaneMatch m;
    m.prev = make_plane(normals[i % 3] + 0.05 * random_vec(rng, 1.0), 1500.0 + 200.0 * i, 1e-10);
    m.cur = transform_plane(m.prev, setup.truth);
    m.cur.cov_theta = Mat4::Identity() * 1e-10;
    setup.planes.push_back(m);
  }
  return setup;
}

}  // namespace

TEST_CASE("estimate_pose recovers noiseless configurations") {
  std::mt19937_64 rng(6);

  SUBCASE("30 point matches") {
    const TwoFrameSetup s = make_setup(rng, 30, 0, 0);
    const EstimateResult r =
        estimate_pose(s.points, s.lines, s.planes, test_camera(), Pose::identity());
    CHECK((r.pose.t - s.truth.t).norm() < 1e-6);
    CHECK(rotation_angle(r.pose.q, s.truth.q) < 1e-8);
    CHECK(r.converged);
  }
  SUBCASE("three orthogonal planes constrain all six degrees of freedom") {
    const TwoFrameSetup s = make_setup(rng, 0, 0, 3);
    const EstimateResult r =
        estimate_pose(s.points, s.lines, s.planes, test_camera(), Pose::identity());
    CHECK((r.pose.t - s.truth.t).norm() < 1e-6);
    CHECK(rotation_angle(r.pose.q, s.truth.q) < 1e-8);
  }
  SUBCASE("lines and planes jointly") {
    const TwoFrameSetup s = make_setup(rng, 0, 4, 2);
    const EstimateResult r =
        estimate_pose(s.points, s.lines, s.planes, test_camera(), Pose::identity());
    CHECK((r.pose.t - s.truth.t).norm() < 1e-3);
    CHECK(rotation_angle(r.pose.q, s.truth.q) < 1e-5);
  }
}

TEST_CASE("estimate_pose raises on degenerate configurations") {
  std::mt19937_64 rng(7);
  SUBCASE("fewer than six constraints") {
    TwoFrameSetup s = make_setup(rng, 2, 0, 0);
    CHECK_THROWS_AS(estimate_pose(s.points, {}, {}, test_camera(), Pose::identity()),
                    DegenerateError);
  }
  SUBCASE("three parallel planes") {
    TwoFrameSetup s = make_setup(rng, 0, 0, 1);
    std::vector<PlaneMatch> parallel;
    for (int i = 0; i < 3; ++i) {
      PlaneMatch m;
      m.prev = make_plane(Vec3::UnitZ(), 1000.0 + 300.0 * i, 1e-10);
      m.cur = transform_plane(m.prev, s.truth);
      m.cur.cov_theta = Mat4::Identity() * 1e-10;
      parallel.push_back(m);
    }
    CHECK_THROWS_AS(estimate_pose({}, {}, parallel, test_camera(), Pose::identity()),
                    DegenerateError);
  }
}

TEST_CASE("estimate_pose cost is monotone across accepted steps") {
  std::mt19937_64 rng(8);
  TwoFrameSetup s = make_setup(rng, 25, 3, 1, 0.4);
  std::vector<IterationStat> stats;
  estimate_pose(s.points, s.lines, s.planes, test_camera(), Pose::identity(), {}, &stats);
  REQUIRE(!stats.empty());
  for (const IterationStat& st : stats)
    if (st.accepted) CHECK(st.cost_after <= st.cost_before);
}

TEST_CASE("estimate_pose is equivariant under conjugation") {
  std::mt19937_64 rng(9);
  const CameraIntrinsics K = test_camera();
  const TwoFrameSetup s = make_setup(rng, 20, 0, 2);
  const EstimateResult base = estimate_pose(s.points, s.lines, s.planes, K, Pose::identity());

  // express both frames in new coordinates: X' = g X
  const Pose g = random_pose(rng, 200.0, 0.4);
  TwoFrameSetup conj = s;
  const Pose truth_conj = compose(compose(g, s.truth), g.inverse());
  for (PointMatch& m : conj.points) {
    m.prev.p = g.apply(m.prev.p);
    m.prev.cov = g.rotation() * m.prev.cov * g.rotation().transpose();
    m.obs = K.project(truth_conj.apply(m.prev.p));
  }
  for (PlaneMatch& m : conj.planes) {
    // transport both planes with g (plane coefficients move by the inverse)
    auto move = [&](const PlaneParams& p) {
      PlaneParams out = p;
      out.normal = g.q * p.normal;
      out.d = p.d - out.normal.dot(g.t);
      out.theta_m = out.normal / out.d;
      return out;
    };
    m.prev = move(m.prev);
    m.cur = move(m.cur);
  }
  const EstimateResult out = estimate_pose(conj.points, conj.lines, conj.planes, K,
                                           Pose::identity());
  CHECK((out.pose.t - truth_conj.t).norm() < 1e-6);
  CHECK(rotation_angle(out.pose.q, truth_conj.q) < 1e-6);
}

TEST_CASE("pose covariance shrinks as matches double") {
  std::mt19937_64 rng(10);
  const TwoFrameSetup small = make_setup(rng, 20, 0, 0);
  std::mt19937_64 rng2(10);
  const TwoFrameSetup big = make_setup(rng2, 40, 0, 0);
  const CameraIntrinsics K = test_camera();
  const EstimateResult rs = estimate_pose(small.points, {}, {}, K, Pose::identity());
  const EstimateResult rb = estimate_pose(big.points, {}, {}, K, Pose::identity());
  CHECK(rb.pose.cov.trace() < rs.pose.cov.trace());
  Eigen::SelfAdjointEigenSolver<Mat6> es(rs.pose.cov);
  CHECK(es.eigenvalues().minCoeff() > -1e-9 * rs.pose.cov.trace());
}

TEST_CASE("tukey IRLS survives 20% outliers") {
  std::mt19937_64 rng(11);
  const CameraIntrinsics K = test_camera();
  TwoFrameSetup s = make_setup(rng, 30, 0, 0, 0.4);
  const EstimateResult clean = estimate_pose(s.points, {}, {}, K, Pose::identity());
  const double err_clean_t = (clean.pose.t - s.truth.t).norm();
  const double err_clean_r = rotation_angle(clean.pose.q, s.truth.q);

  std::uniform_real_distribution<double> upix(0.0, 639.0), vpix(0.0, 479.0);
  TwoFrameSetup dirty = s;
  for (int i = 0; i < 8; ++i) {  // ~20% of 38
    PointMatch m;
    m.prev.p = random_vec(rng, 600.0) + Vec3(0, 0, 2000.0);
    m.prev.cov = Mat3::Identity();
    m.obs = Vec2(upix(rng), vpix(rng));  // wrong association
    dirty.points.push_back(m);
  }
  const EstimateResult robust = estimate_pose(dirty.points, {}, {}, K, Pose::identity());
  CHECK((robust.pose.t - s.truth.t).norm() < 5.0 * err_clean_t + 1e-9);
  CHECK(rotation_angle(robust.pose.q, s.truth.q) < 5.0 * err_clean_r + 1e-9);
}

TEST_CASE("validate_pose gates on the translation block") {
  CHECK(validate_pose(Mat6::Zero(), 25.0));
  Mat6 cov = Mat6::Zero();
  cov(0, 0) = 50.0;
  CHECK_FALSE(validate_pose(cov, 25.0));

  // near-collinear points leave the pose weakly constrained
  std::mt19937_64 rng(12);
  const CameraIntrinsics K = test_camera();
  std::normal_distribution<double> g(0.0, 2.0);
  Pose truth;
  truth.t = Vec3(10.0, 0.0, 0.0);
  std::vector<PointMatch> pts;
  for (int i = 0; i < 12; ++i) {
    PointMatch m;
    m.prev.p = Vec3(-300.0 + 50.0 * i, g(rng), 2000.0 + g(rng));
    m.prev.cov = Mat3::Identity();
    m.obs = K.project(truth.apply(m.prev.p));
    pts.push_back(m);
  }
  const EstimateResult r = estimate_pose(pts, {}, {}, K, Pose::identity());
  CHECK_FALSE(validate_pose(r.pose.cov, 25.0));
}

TEST_CASE("propagate_uncertainty") {
  std::mt19937_64 rng(13);
  SUBCASE("identity step with zero prior returns the process noise") {
    Mat6 Q = Mat6::Identity() * 3.0;
    const Mat6 out = propagate_uncertainty(Mat6::Zero(), Q, Pose::identity(), Pose::identity());
    CHECK((out - Q).norm() < 1e-12);
  }
  SUBCASE("transition jacobians match finite differences") {
    for (int i = 0; i < 100; ++i) {
      const Pose step = random_pose(rng, 100.0, 0.4);
      const Pose prev = random_pose(rng, 100.0, 0.4);
      const ComposeJacobians j = compose_with_jacobians(step, prev);

      auto f_prev = [&](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
        Vec6 v = xi;
        Pose composed = compose(step, pose_from_xi(v));
        return pose_to_xi(composed);
      };
      const Eigen::MatrixXd num_f = numeric_jacobian(f_prev, pose_to_xi(prev), 1e-5);
      CHECK(jacobian_rel_error(j.wrt_prev, num_f) < 1e-5);

      auto f_step = [&](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
        Vec6 v = xi;
        Pose composed = compose(pose_from_xi(v), prev);
        return pose_to_xi(composed);
      };
      const Eigen::MatrixXd num_g = numeric_jacobian(f_step, pose_to_xi(step), 1e-5);
      CHECK(jacobian_rel_error(j.wrt_step, num_g) < 1e-5);
    }
  }
  SUBCASE("trace grows monotonically under repeated propagation") {
    Mat6 Q = Mat6::Identity() * 0.5;
    Mat6 cov = Mat6::Zero();
    Pose cum;
    double last = 0.0;
    std::mt19937_64 rng2(14);
    for (int i = 0; i < 100; ++i) {
      Pose step = random_pose(rng2, 20.0, 0.05);
      cov = propagate_uncertainty(cov, Q, step, cum);
      cum = compose(step, cum);
      CHECK(cov.trace() >= last - 1e-9);
      last = cov.trace();
      Eigen::SelfAdjointEigenSolver<Mat6> es(cov);
      CHECK(es.eigenvalues().minCoeff() > -1e-9 * cov.trace());
    }
  }
}

TEST_CASE("velocity decay") {
  Pose prior;
  prior.t = Vec3(10.0, 0.0, 0.0);
  prior.cov = Mat6::Identity();
  const Pose out = velocity_decay(prior, 0.9);
  CHECK((out.t - Vec3(9.0, 0.0, 0.0)).norm() < 1e-12);
  CHECK(out.cov(0, 0) == doctest::Approx(1.0 / 0.81));

  // rotation decays about the same axis
  Pose rot;
  rot.q = Eigen::Quaterniond(Eigen::AngleAxisd(10.0 * M_PI / 180.0, Vec3::UnitY()));
  const Pose decayed = velocity_decay(rot, 0.9);
  const Eigen::AngleAxisd aa(decayed.q);
  CHECK(aa.angle() * 180.0 / M_PI == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(std::abs(aa.axis().dot(Vec3::UnitY())) == doctest::Approx(1.0));

  // repeated fallback converges to identity
  Pose p = prior;
  p.q = rot.q;
  for (int i = 0; i < 200; ++i) p = velocity_decay(p, 0.9);
  CHECK(p.t.norm() < 1e-6);
  CHECK(rotation_angle(p.q, Eigen::Quaterniond::Identity()) < 1e-6);
}
