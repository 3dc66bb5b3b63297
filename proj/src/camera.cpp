#include "mvmc/camera.hpp"

#include <cmath>
#include <string>

namespace mvmc {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

CameraParams::CameraParams(int id, const Eigen::Matrix3d& intrinsics,
                           const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : id_(id), intrinsics_(intrinsics), rotation_(rotation), translation_(translation) {
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).norm() > 1e-9) {
    throw Error("camera " + std::to_string(id) + ": rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error("camera " + std::to_string(id) + ": rotation determinant is not +1");
  }
  if (std::abs(intrinsics(1, 0)) > 0 || std::abs(intrinsics(2, 0)) > 0 ||
      std::abs(intrinsics(2, 1)) > 0) {
    throw Error("camera " + std::to_string(id) + ": intrinsics not upper triangular");
  }
  if (intrinsics(0, 0) <= 0 || intrinsics(1, 1) <= 0 || intrinsics(2, 2) <= 0) {
    throw Error("camera " + std::to_string(id) + ": intrinsics diagonal must be positive");
  }
  projection_.leftCols<3>() = intrinsics_ * rotation_;
  projection_.col(3) = intrinsics_ * translation_;
}

PixelPoint project(const CameraParams& camera, const Eigen::Vector3d& point) {
  const double z = camera.depth(point);
  if (z <= 1e-9) {
    throw DegenerateDepth("point at depth " + std::to_string(z) + " m in camera " +
                          std::to_string(camera.id()));
  }
  const Eigen::Vector3d s = camera.projection_matrix() * point.homogeneous();
  return PixelPoint{s.x() / s.z(), s.y() / s.z(), 1.0};
}

Eigen::Matrix3d fundamental_matrix(const CameraParams& cam1, const CameraParams& cam2) {
  const Eigen::Vector3d baseline = cam2.center() - cam1.center();
  if (baseline.norm() <= 1e-9) {
    throw ZeroBaseline("cameras " + std::to_string(cam1.id()) + " and " +
                       std::to_string(cam2.id()) + " share a center");
  }
  // Relative pose of camera 2 w.r.t. camera 1, then F = K2^-T [t]x R K1^-1.
  const Eigen::Matrix3d r_rel = cam2.rotation() * cam1.rotation().transpose();
  const Eigen::Vector3d t_rel = cam2.translation() - r_rel * cam1.translation();
  const Eigen::Matrix3d essential = skew(t_rel) * r_rel;
  Eigen::Matrix3d f = cam2.intrinsics().transpose().inverse() * essential *
                      cam1.intrinsics().inverse();
  f /= f.norm();
  // Deterministic sign: largest-magnitude entry positive.
  int r = 0, c = 0;
  f.cwiseAbs().maxCoeff(&r, &c);
  if (f(r, c) < 0) f = -f;
  return f;
}

EpipolarLine epipolar_line(const Eigen::Matrix3d& F, const PixelPoint& p) {
  const Eigen::Vector3d l = F * p.homogeneous();
  return EpipolarLine{l.x(), l.y(), l.z()};
}

double point_line_distance(const PixelPoint& p, const EpipolarLine& line) {
  const double dir = std::hypot(line.a, line.b);
  if (dir < 1e-12 * std::max(1.0, std::abs(line.c))) {
    throw DegenerateLine("epipolar line with zero direction norm");
  }
  return std::abs(line.a * p.u + line.b * p.v + line.c) / dir;
}

double epipolar_distance(const PixelPoint& p1, const PixelPoint& p2, const Eigen::Matrix3d& F12,
                         const Eigen::Matrix3d& F21) {
  const double d1 = point_line_distance(p1, epipolar_line(F12, p2));
  const double d2 = point_line_distance(p2, epipolar_line(F21, p1));
  return d1 + d2;
}

}  // namespace mvmc
