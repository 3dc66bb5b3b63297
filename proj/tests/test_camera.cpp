#include <doctest.h>

#include <Eigen/Dense>

#include "mvmc/camera.hpp"
#include "mvmc/rng.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

CameraParams identity_camera(int id = 0) {
  return CameraParams(id, Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity(),
                      Eigen::Vector3d::Zero());
}

}  // namespace

TEST_CASE("project: optical axis maps to principal point") {
  const auto cam = identity_camera();
  const auto p = project(cam, {0, 0, 5});
  CHECK(p.u == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.confidence == 1.0);
}

TEST_CASE("project: pinhole division by depth") {
  const auto cam = identity_camera();
  const auto p = project(cam, {1, 1, 2});
  CHECK(p.u == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("project: matches homogeneous-coordinate oracle on random cameras") {
  CounterRng rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto cam = oracle::random_camera(rng, i);
    Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (cam.depth(x) <= 1e-6) continue;
    const auto expected = oracle::project_homogeneous(cam.projection_matrix(), x);
    const auto got = project(cam, x);
    CHECK(got.u == doctest::Approx(expected.x()).epsilon(1e-12));
    CHECK(got.v == doctest::Approx(expected.y()).epsilon(1e-12));
  }
}

TEST_CASE("project: degenerate depth throws") {
  const auto cam = identity_camera();
  CHECK_THROWS_AS(project(cam, {0, 0, 0}), DegenerateDepth);
  CHECK_THROWS_AS(project(cam, {0, 0, -1}), DegenerateDepth);
}

TEST_CASE("camera invariants are validated") {
  Eigen::Matrix3d bad_r = Eigen::Matrix3d::Identity();
  bad_r(0, 0) = 2.0;
  CHECK_THROWS_AS(CameraParams(0, Eigen::Matrix3d::Identity(), bad_r, Eigen::Vector3d::Zero()),
                  Error);
  Eigen::Matrix3d bad_k = Eigen::Matrix3d::Identity();
  bad_k(1, 0) = 3.0;
  CHECK_THROWS_AS(
      CameraParams(0, bad_k, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()), Error);
  // projection_matrix() == K [R | t] exactly
  CounterRng rng(7);
  const auto cam = oracle::random_camera(rng, 3);
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = cam.rotation();
  rt.col(3) = cam.translation();
  CHECK((cam.projection_matrix() - cam.intrinsics() * rt).norm() == 0.0);
}

TEST_CASE("fundamental_matrix: epipolar identity on random points") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  CounterRng rng(23);
  double max_violation = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d x(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                            rng.uniform(0.2, 1.8));
    const auto p1 = project(cams[0], x);
    const auto p2 = project(cams[1], x);
    const double v = std::abs(p2.homogeneous().dot(f21 * p1.homogeneous())) /
                     (p1.homogeneous().norm() * p2.homogeneous().norm());
    max_violation = std::max(max_violation, v);
  }
  CHECK(max_violation < 1e-8);
}

TEST_CASE("fundamental_matrix: rank 2") {
  const auto cams = oracle::ring_cameras(3, 3.0, 1.5, {0, 0, 1});
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const Eigen::Matrix3d f = fundamental_matrix(cams[a], cams[b]);
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(f);
      CHECK(svd.singularValues()(2) < 1e-8 * svd.singularValues()(0));
    }
  }
}

TEST_CASE("fundamental_matrix: swap gives transpose up to scale") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  Eigen::Matrix3d f12t = fundamental_matrix(cams[1], cams[0]).transpose();
  // Both are unit-norm: align signs and compare.
  if ((f12t - f21).norm() > (f12t + f21).norm()) f12t = -f12t;
  CHECK((f12t - f21).norm() < 1e-10);
}

TEST_CASE("fundamental_matrix: zero baseline throws") {
  const auto cam = identity_camera();
  Eigen::Matrix3d r = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const CameraParams rotated(1, Eigen::Matrix3d::Identity(), r, Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(fundamental_matrix(cam, rotated), ZeroBaseline);
}

TEST_CASE("epipolar_line: hand-evaluated skew matrix product") {
  Eigen::Matrix3d f;
  f << 0, 0, 0, 0, 0, -1, 0, 1, 0;  // skew([1, 0, 0])
  const auto line = epipolar_line(f, PixelPoint{0, 0, 1});
  // F [0 0 1]^T = (0, -1, 0): horizontal line through the origin.
  CHECK(line.a == 0.0);
  CHECK(line.b == -1.0);
  CHECK(line.c == 0.0);
}

TEST_CASE("epipolar_line: projection of a shared point lies on the line") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const Eigen::Vector3d x(0.2, -0.3, 1.1);
  const auto p1 = project(cams[0], x);
  const auto p2 = project(cams[1], x);
  CHECK(point_line_distance(p2, epipolar_line(f21, p1)) < 1e-8);
}

TEST_CASE("epipolar_line: scaling F leaves the point-line distance unchanged") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const PixelPoint p{100, 200, 1};
  const PixelPoint q{400, 350, 1};
  const auto l1 = epipolar_line(f21, p);
  const auto l7 = epipolar_line(Eigen::Matrix3d(7.0 * f21), p);
  CHECK(l7.a == doctest::Approx(7.0 * l1.a));
  CHECK(l7.b == doctest::Approx(7.0 * l1.b));
  CHECK(l7.c == doctest::Approx(7.0 * l1.c));
  CHECK(point_line_distance(q, l7) == doctest::Approx(point_line_distance(q, l1)).epsilon(1e-12));
}

TEST_CASE("epipolar_distance: exact correspondence is zero") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const Eigen::Matrix3d f12 = fundamental_matrix(cams[1], cams[0]);
  const Eigen::Vector3d x(0.3, 0.1, 0.9);
  const auto p1 = project(cams[0], x);
  const auto p2 = project(cams[1], x);
  CHECK(epipolar_distance(p1, p2, f12, f21) < 1e-8);
}

TEST_CASE("epipolar_distance: perpendicular displacement adds exactly its size") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const Eigen::Vector3d x(0.3, 0.1, 0.9);
  const auto p1 = project(cams[0], x);
  auto p2 = project(cams[1], x);

  // Displace p2 by 3 px perpendicular to its epipolar line l_c2 = F21 p1.
  const auto l = epipolar_line(f21, p1);
  const double norm = std::hypot(l.a, l.b);
  p2.u += 3.0 * l.a / norm;
  p2.v += 3.0 * l.b / norm;
  const double displaced_term = point_line_distance(p2, l);
  CHECK(displaced_term == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("epipolar_distance: non-corresponding points are strictly positive") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const Eigen::Matrix3d f12 = fundamental_matrix(cams[1], cams[0]);
  CounterRng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto p1 = project(cams[0], {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0});
    const auto p2 = project(cams[1], {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.4});
    CHECK(epipolar_distance(p1, p2, f12, f21) > 0.0);
  }
}

TEST_CASE("epipolar_distance: noise monotonicity (Spearman over 1000 trials)") {
  const auto cams = oracle::ring_cameras(2, 3.0, 1.5, {0, 0, 1});
  const Eigen::Matrix3d f21 = fundamental_matrix(cams[0], cams[1]);
  const Eigen::Matrix3d f12 = fundamental_matrix(cams[1], cams[0]);
  CounterRng rng(99);
  std::vector<double> sigmas, dists;
  for (int i = 0; i < 1000; ++i) {
    const double sigma = rng.uniform(0.0, 10.0);
    double mean = 0.0;
    const int reps = 8;
    for (int r = 0; r < reps; ++r) {
      const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                              rng.uniform(0.6, 1.4));
      const auto p1 = project(cams[0], x);
      auto p2 = project(cams[1], x);
      p2.u += sigma * rng.normal();
      p2.v += sigma * rng.normal();
      mean += epipolar_distance(p1, p2, f12, f21) / reps;
    }
    sigmas.push_back(sigma);
    dists.push_back(mean);
  }
  CHECK(oracle::spearman(sigmas, dists) > 0.9);
}
