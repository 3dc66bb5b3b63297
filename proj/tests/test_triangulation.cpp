#include <doctest.h>

#include "mvmc/rng.hpp"
#include "mvmc/triangulation.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

std::vector<WeightedObservation> observe(const Eigen::Vector3d& x,
                                         const std::vector<CameraParams>& cams,
                                         double mu = 1.0) {
  std::vector<WeightedObservation> obs;
  for (const auto& cam : cams) {
    auto p = project(cam, x);
    p.confidence = mu;
    obs.push_back({cam.id(), p});
  }
  return obs;
}

}  // namespace

TEST_CASE("triangulate_weighted: exact on noiseless projections") {
  const auto cams = oracle::ring_cameras(3, 3.0, 1.5, {0, 0, 1});
  const Eigen::Vector3d x(1.0, 0.5, 4.0);
  // Make sure the point is in front of every camera of this rig.
  const Eigen::Vector3d target(0.3, 0.1, 1.2);
  const auto obs = observe(target, cams);
  const auto got = triangulate_weighted(obs, cams);
  CHECK((got.position - target).norm() < 1e-9);
  CHECK(got.confidence == doctest::Approx(1.0));
  CHECK(got.reprojection_rms < 1e-9);
  (void)x;
}

TEST_CASE("triangulate_weighted: zero-weight camera is annihilated") {
  const auto cams = oracle::ring_cameras(3, 3.0, 1.5, {0, 0, 1});
  const Eigen::Vector3d target(0.2, -0.1, 1.1);
  auto obs3 = observe(target, cams);
  obs3[2].pixel.u += 50.0;  // corrupt the third view
  obs3[2].pixel.confidence = 0.0;
  auto obs2 = std::vector<WeightedObservation>{obs3[0], obs3[1]};
  const auto a = triangulate_weighted(obs3, cams);
  const auto b = triangulate_weighted(obs2, cams);
  CHECK((a.position - b.position).norm() < 1e-12);
  CHECK(a.confidence == doctest::Approx(b.confidence));
}

TEST_CASE("triangulate_weighted: within 2 mm of the Gauss-Newton oracle under noise") {
  // 4-camera rig, ~2 m baseline, ~3 m depth.
  const auto cams = oracle::ring_cameras(4, 3.0, 1.5, {0, 0, 1});
  CounterRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                            rng.uniform(0.7, 1.5));
    std::vector<WeightedObservation> obs;
    std::vector<Eigen::Vector2d> pixels;
    std::vector<double> weights;
    for (const auto& cam : cams) {
      auto p = project(cam, x);
      p.u += rng.normal();
      p.v += rng.normal();
      p.confidence = rng.uniform(0.5, 1.0);
      obs.push_back({cam.id(), p});
      pixels.emplace_back(p.u, p.v);
      weights.push_back(p.confidence);
    }
    const auto dlt = triangulate_weighted(obs, cams);
    const auto refined = oracle::refine_reprojection(dlt.position, pixels, weights, cams);
    CHECK((dlt.position - refined).norm() < 2e-3);
  }
}

TEST_CASE("triangulate_weighted: fewer than two usable views throws") {
  const auto cams = oracle::ring_cameras(3, 3.0, 1.5, {0, 0, 1});
  auto obs = observe({0.1, 0.1, 1.0}, cams);
  obs[0].pixel.confidence = 0.0;
  obs[1].pixel.confidence = 0.0;
  CHECK_THROWS_AS(triangulate_weighted(obs, cams), InsufficientViews);
}

TEST_CASE("triangulate_weighted: round trip reprojects exactly") {
  CounterRng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const auto cams =
        oracle::ring_cameras(2 + static_cast<int>(rng.uniform_index(3)), rng.uniform(2.5, 4.0),
                             rng.uniform(1.0, 2.0), {0, 0, 1});
    const Eigen::Vector3d x(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                            rng.uniform(0.5, 1.5));
    const auto obs = observe(x, cams);
    const auto tri = triangulate_weighted(obs, cams);
    for (const auto& cam : cams) {
      const auto orig = project(cam, x);
      const auto rep = project(cam, tri.position);
      CHECK(std::hypot(rep.u - orig.u, rep.v - orig.v) < 1e-7);
    }
  }
}

TEST_CASE("triangulate_weighted: common weight scaling leaves the position unchanged") {
  const auto cams = oracle::ring_cameras(4, 3.0, 1.5, {0, 0, 1});
  CounterRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                            rng.uniform(0.7, 1.4));
    auto obs = observe(x, cams, 0.6);
    for (auto& o : obs) {
      o.pixel.u += 0.5 * rng.normal();
      o.pixel.v += 0.5 * rng.normal();
    }
    auto scaled = obs;
    for (auto& o : scaled) o.pixel.confidence *= 0.35;
    const auto a = triangulate_weighted(obs, cams);
    const auto b = triangulate_weighted(scaled, cams);
    CHECK((a.position - b.position).norm() < 1e-10);
  }
}

TEST_CASE("triangulate_weighted: error shrinks from 2 to 4 cameras") {
  const auto cams4 = oracle::ring_cameras(4, 3.0, 1.5, {0, 0, 1});
  const std::vector<CameraParams> cams2 = {cams4[0], cams4[1]};
  CounterRng rng(37);
  double err2 = 0.0, err4 = 0.0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                            rng.uniform(0.7, 1.4));
    auto noisy = [&](const std::vector<CameraParams>& cams) {
      auto obs = observe(x, cams);
      for (auto& o : obs) {
        o.pixel.u += rng.normal();
        o.pixel.v += rng.normal();
      }
      return triangulate_weighted(obs, cams);
    };
    err2 += (noisy(cams2).position - x).norm() / trials;
    err4 += (noisy(cams4).position - x).norm() / trials;
  }
  CHECK(err4 < err2);
}

TEST_CASE("smooth_spline: fills an interior gap of a cubic exactly at zero smoothing") {
  JointTrajectory traj;
  traj.frame_rate_hz = 60.0;
  auto cubic = [](double t) {
    return Eigen::Vector3d(1e-4 * t * t * t - 2e-3 * t * t + 0.01 * t,
                           -5e-5 * t * t * t + 0.02 * t, 0.5 + 1e-3 * t * t);
  };
  for (int t = 0; t < 40; ++t) {
    if (t >= 18 && t <= 20) {
      traj.frames.push_back(std::nullopt);
    } else {
      traj.frames.push_back(TriangulatedPoint{cubic(t), 0.9, 0.0});
    }
  }
  SplineConfig cfg;
  cfg.lambda = 0.0;
  const auto out = smooth_spline(traj, cfg);
  for (int t = 18; t <= 20; ++t) {
    REQUIRE(out.frames[t].has_value());
    CHECK((out.frames[t]->position - cubic(t)).norm() < 1e-6);
    CHECK(out.frames[t]->confidence == doctest::Approx(0.9));
  }
}

TEST_CASE("smooth_spline: variance of noise around a constant is reduced") {
  JointTrajectory traj;
  CounterRng rng(53);
  const Eigen::Vector3d c(0.3, -0.2, 1.0);
  for (int t = 0; t < 1000; ++t) {
    traj.frames.push_back(TriangulatedPoint{c + 0.005 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()), 1.0, 0.0});
  }
  const auto out = smooth_spline(traj);
  double var_in = 0.0, var_out = 0.0;
  for (int t = 0; t < 1000; ++t) {
    var_in += (traj.frames[t]->position - c).squaredNorm();
    var_out += (out.frames[t]->position - c).squaredNorm();
  }
  CHECK(var_out < var_in);
}

TEST_CASE("smooth_spline: interpolating spline reproduces samples at zero smoothing") {
  JointTrajectory traj;
  CounterRng rng(59);
  for (int t = 0; t < 30; ++t) {
    traj.frames.push_back(TriangulatedPoint{
        Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 2)), 1.0, 0.0});
  }
  SplineConfig cfg;
  cfg.lambda = 0.0;
  const auto out = smooth_spline(traj, cfg);
  for (int t = 0; t < 30; ++t) {
    CHECK((out.frames[t]->position - traj.frames[t]->position).norm() < 1e-9);
  }
}

TEST_CASE("smooth_spline: refuses long gaps and never extrapolates") {
  JointTrajectory traj;
  for (int t = 0; t < 60; ++t) {
    const bool boundary_gap = t < 3 || t >= 55;
    const bool long_gap = t >= 20 && t < 35;  // 15 frames > max_gap
    const bool short_gap = t >= 45 && t < 48;
    if (boundary_gap || long_gap || short_gap) {
      traj.frames.push_back(std::nullopt);
    } else {
      traj.frames.push_back(TriangulatedPoint{{0.01 * t, 0, 1}, 1.0, 0.0});
    }
  }
  const auto out = smooth_spline(traj);
  for (int t = 0; t < 3; ++t) CHECK(!out.frames[t].has_value());
  for (int t = 55; t < 60; ++t) CHECK(!out.frames[t].has_value());
  for (int t = 20; t < 35; ++t) CHECK(!out.frames[t].has_value());
  for (int t = 45; t < 48; ++t) CHECK(out.frames[t].has_value());
}

TEST_CASE("smooth_spline: too sparse throws") {
  JointTrajectory traj;
  traj.frames.resize(10);
  traj.frames[0] = TriangulatedPoint{{0, 0, 0}, 1, 0};
  traj.frames[5] = TriangulatedPoint{{1, 0, 0}, 1, 0};
  traj.frames[9] = TriangulatedPoint{{2, 0, 0}, 1, 0};
  CHECK_THROWS_AS(smooth_spline(traj), TooSparse);
}

TEST_CASE("ekf_fill: linear continuation across a gap") {
  JointTrajectory traj;
  traj.frame_rate_hz = 60.0;
  const Eigen::Vector3d v(0.01, 0.0, 0.0);  // m/frame
  for (int t = 0; t < 60; ++t) {
    if (t >= 40 && t < 45) {
      traj.frames.push_back(std::nullopt);
    } else {
      traj.frames.push_back(TriangulatedPoint{Eigen::Vector3d(0.1, 0.2, 1.0) + t * v, 1.0, 0.0});
    }
  }
  KalmanConfig cfg;
  cfg.meas_noise = 0.0;  // trust measurements exactly
  const auto out = ekf_fill(traj, cfg);
  for (int t = 40; t < 45; ++t) {
    const Eigen::Vector3d expected = Eigen::Vector3d(0.1, 0.2, 1.0) + t * v;
    CHECK((out.frames[t]->position - expected).norm() < 1e-6);
    CHECK(out.frames[t]->confidence == doctest::Approx(std::pow(0.8, t - 39)));
  }
}

TEST_CASE("ekf_fill: stationary point with zero measurement noise is reproduced") {
  JointTrajectory traj;
  const Eigen::Vector3d c(0.4, 0.1, 0.9);
  for (int t = 0; t < 50; ++t) traj.frames.push_back(TriangulatedPoint{c, 1.0, 0.0});
  KalmanConfig cfg;
  cfg.meas_noise = 0.0;
  const auto out = ekf_fill(traj, cfg);
  for (int t = 10; t < 50; ++t) {
    CHECK((out.frames[t]->position - c).norm() < 1e-9);
  }
}

TEST_CASE("ekf_fill: quadratic continuation across a gap") {
  JointTrajectory traj;
  traj.frame_rate_hz = 60.0;
  const double dt = 1.0 / 60.0;
  const Eigen::Vector3d a(0.5, -0.2, 0.1);  // m/s^2
  auto pos = [&](int t) {
    const double s = t * dt;
    return Eigen::Vector3d(0.1, 0.0, 1.0) + 0.5 * s * s * a;
  };
  for (int t = 0; t < 80; ++t) {
    if (t >= 60 && t < 64) {
      traj.frames.push_back(std::nullopt);
    } else {
      traj.frames.push_back(TriangulatedPoint{pos(t), 1.0, 0.0});
    }
  }
  KalmanConfig cfg;
  cfg.meas_noise = 0.0;
  const auto out = ekf_fill(traj, cfg);
  for (int t = 60; t < 64; ++t) {
    CHECK((out.frames[t]->position - pos(t)).norm() < 1e-4);
  }
}

TEST_CASE("ekf_fill: fewer than two present frames throws") {
  JointTrajectory traj;
  traj.frames.resize(5);
  traj.frames[2] = TriangulatedPoint{{0, 0, 0}, 1, 0};
  CHECK_THROWS_AS(ekf_fill(traj), TooSparse);
}

TEST_CASE("filter_trajectory: spline fills short gaps, Kalman covers the rest") {
  JointTrajectory traj;
  traj.frame_rate_hz = 60.0;
  for (int t = 0; t < 50; ++t) {
    const bool head_gap = t < 2;
    const bool short_gap = t >= 20 && t < 23;
    if (head_gap || short_gap) {
      traj.frames.push_back(std::nullopt);
    } else {
      traj.frames.push_back(TriangulatedPoint{{0.01 * t, 0.2, 1.0}, 1.0, 0.0});
    }
  }
  const auto out = filter_trajectory(traj);
  CHECK(out.present_count() == 50);
}
