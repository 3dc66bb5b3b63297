#include <doctest.h>

#include "mvmc/rng.hpp"
#include "mvmc/skeleton.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

Pose random_pose(const SkeletonShape& shape, CounterRng& rng, double angle_scale = 0.5) {
  Pose p = Pose::rest(shape);
  p.root_position = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 2));
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  p.root_orientation = q;
  for (int i = 0; i < p.joint_angles.size(); ++i) {
    p.joint_angles(i) = angle_scale * rng.uniform(-1, 1);
  }
  return p;
}

SkeletonShape two_bone_chain() {
  std::vector<JointSpec> j(3);
  j[0].name = "base";
  j[0].parent = -1;
  j[1].name = "mid";
  j[1].parent = 0;
  j[1].offset = Eigen::Vector3d(0.4, 0, 0);
  j[1].dof = JointDof::Hinge;
  j[1].hinge_axis = Eigen::Vector3d::UnitZ();
  j[1].limit_lo = Eigen::VectorXd::Constant(1, -3.0);
  j[1].limit_hi = Eigen::VectorXd::Constant(1, 3.0);
  j[2].name = "tip";
  j[2].parent = 1;
  j[2].offset = Eigen::Vector3d(0.3, 0, 0);
  j[2].dof = JointDof::Ball;
  j[2].limit_lo = Eigen::Vector3d::Constant(-3.0);
  j[2].limit_hi = Eigen::Vector3d::Constant(3.0);
  return SkeletonShape(j);
}

}  // namespace

TEST_CASE("forward_kinematics: rest pose lands on accumulated offsets") {
  const auto shape = default_skeleton();
  const auto fk = forward_kinematics(shape, Pose::rest(shape));
  for (int j = 1; j < shape.joint_count(); ++j) {
    Eigen::Vector3d expected = Eigen::Vector3d::Zero();
    int k = j;
    while (k > 0) {
      expected += shape.joint(k).offset;
      k = shape.joint(k).parent;
    }
    CHECK((fk.positions[j] - expected).norm() < 1e-12);
  }
  // Total reach along the left arm chain equals the summed bone lengths.
  double reach = 0.0;
  for (int k = 22; k > 0; k = shape.joint(k).parent) reach += shape.bone_length(k);
  CHECK((fk.positions[22] - fk.positions[0]).norm() <= reach + 1e-12);
}

TEST_CASE("forward_kinematics: root translation moves every joint") {
  const auto shape = default_skeleton();
  CounterRng rng(71);
  Pose p = random_pose(shape, rng);
  const auto fk0 = forward_kinematics(shape, p);
  p.root_position += Eigen::Vector3d(1, 2, 3);
  const auto fk1 = forward_kinematics(shape, p);
  for (int j = 0; j < shape.joint_count(); ++j) {
    CHECK((fk1.positions[j] - fk0.positions[j] - Eigen::Vector3d(1, 2, 3)).norm() < 1e-12);
  }
}

TEST_CASE("forward_kinematics: planar two-bone chain, hinge at 90 degrees") {
  const auto shape = two_bone_chain();
  Pose p = Pose::rest(shape);
  p.joint_angles(0) = M_PI / 2.0;  // hinge about +z at the middle joint
  const auto fk = forward_kinematics(shape, p);
  CHECK((fk.positions[1] - Eigen::Vector3d(0.4, 0, 0)).norm() < 1e-12);
  // Tip rotates about the middle joint: (0.4, 0.3, 0).
  CHECK((fk.positions[2] - Eigen::Vector3d(0.4, 0.3, 0)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: edge lengths equal bone lengths for random poses") {
  const auto shape = default_skeleton();
  CounterRng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fk = forward_kinematics(shape, random_pose(shape, rng, 1.2));
    for (int j = 1; j < shape.joint_count(); ++j) {
      const double len = (fk.positions[j] - fk.positions[shape.joint(j).parent]).norm();
      CHECK(len == doctest::Approx(shape.bone_length(j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward_kinematics: dimension mismatch throws") {
  const auto shape = default_skeleton();
  Pose p = Pose::rest(shape);
  p.joint_angles.resize(3);
  CHECK_THROWS_AS(forward_kinematics(shape, p), DimensionMismatch);
}

TEST_CASE("FkJacobian: matches finite differences on a quadratic in positions") {
  const auto shape = default_skeleton();
  CounterRng rng(79);
  std::vector<Eigen::Vector3d> anchors(shape.joint_count());
  for (auto& a : anchors) a = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());

  const int nd = 7 + shape.total_angle_dofs();
  auto unpack = [&](const Eigen::VectorXd& x) {
    Pose p;
    p.root_position = x.head<3>();
    p.root_orientation = Eigen::Quaterniond(x(3), x(4), x(5), x(6));
    p.joint_angles = x.tail(shape.total_angle_dofs());
    return p;
  };
  auto f = [&](const Eigen::VectorXd& x) {
    const auto fk = forward_kinematics(shape, unpack(x));
    double v = 0;
    for (int j = 0; j < shape.joint_count(); ++j) {
      v += (fk.positions[j] - anchors[j]).squaredNorm();
    }
    return v;
  };

  for (int trial = 0; trial < 5; ++trial) {
    const Pose p = random_pose(shape, rng);
    Eigen::VectorXd x(nd);
    x.head<3>() = p.root_position;
    x(3) = p.root_orientation.w();
    x(4) = p.root_orientation.x();
    x(5) = p.root_orientation.y();
    x(6) = p.root_orientation.z();
    x.tail(shape.total_angle_dofs()) = p.joint_angles;

    FkJacobian jac(shape, p);
    std::vector<Eigen::Vector3d> g(shape.joint_count());
    for (int j = 0; j < shape.joint_count(); ++j) {
      g[j] = 2.0 * (jac.fk().positions[j] - anchors[j]);
    }
    const auto pg = jac.accumulate(g);
    Eigen::VectorXd analytic(nd);
    analytic.head<3>() = pg.root_position;
    analytic.segment<4>(3) = pg.root_orientation;
    analytic.tail(shape.total_angle_dofs()) = pg.joint_angles;

    const Eigen::VectorXd fd = oracle::fd_gradient(f, x);
    CHECK((analytic - fd).norm() < 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("fit_shape: exact recovery from noiseless FK") {
  const auto shape = default_skeleton();
  CounterRng rng(83);
  std::vector<std::vector<Eigen::Vector3d>> frames;
  for (int t = 0; t < 20; ++t) {
    frames.push_back(forward_kinematics(shape, random_pose(shape, rng)).positions);
  }
  const auto fitted = fit_shape(shape, frames);
  for (int j = 1; j < shape.joint_count(); ++j) {
    CHECK(fitted.bone_length(j) == doctest::Approx(shape.bone_length(j)).epsilon(1e-9));
  }
}

TEST_CASE("fit_shape: 5 mm noise over 100 frames recovers lengths within 2 mm") {
  const auto shape = default_skeleton();
  CounterRng rng(89);
  const double sigma = 0.005 / std::sqrt(3.0);  // 5 mm RMS isotropic displacement
  std::vector<std::vector<Eigen::Vector3d>> frames;
  for (int t = 0; t < 100; ++t) {
    auto pos = forward_kinematics(shape, random_pose(shape, rng)).positions;
    for (auto& p : pos) {
      p += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    }
    frames.push_back(pos);
  }
  const auto fitted = fit_shape(shape, frames);
  for (int j = 1; j < shape.joint_count(); ++j) {
    CHECK(std::abs(fitted.bone_length(j) - shape.bone_length(j)) < 2e-3);
  }
}

TEST_CASE("fit_shape: a single wild outlier frame barely moves the median") {
  const auto shape = default_skeleton();
  CounterRng rng(97);
  std::vector<std::vector<Eigen::Vector3d>> frames;
  for (int t = 0; t < 50; ++t) {
    frames.push_back(forward_kinematics(shape, random_pose(shape, rng)).positions);
  }
  auto outlier = frames[25];
  for (auto& p : outlier) p *= 10.0;
  frames[25] = outlier;
  const auto fitted = fit_shape(shape, frames);
  for (int j = 1; j < shape.joint_count(); ++j) {
    CHECK(std::abs(fitted.bone_length(j) - shape.bone_length(j)) < 1e-3);
  }
}

TEST_CASE("fit_shape: too few frames throws") {
  const auto shape = default_skeleton();
  std::vector<std::vector<Eigen::Vector3d>> frames(5);
  for (auto& f : frames) f = forward_kinematics(shape, Pose::rest(shape)).positions;
  CHECK_THROWS_AS(fit_shape(shape, frames), TooSparse);
}
