#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mvmc/error.hpp"

namespace mvmc {

/// A 2D detection in pixels with a confidence in [0, 1].
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double confidence = 1.0;

  Eigen::Vector3d homogeneous() const { return {u, v, 1.0}; }
};

/// Homogeneous image line a*u + b*v + c = 0.
struct EpipolarLine {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Calibrated pinhole camera: intrinsics K (upper triangular, positive
/// diagonal) and world-to-camera extrinsics [R | t].
class CameraParams {
 public:
  CameraParams(int id, const Eigen::Matrix3d& intrinsics, const Eigen::Matrix3d& rotation,
               const Eigen::Vector3d& translation);

  int id() const { return id_; }
  const Eigen::Matrix3d& intrinsics() const { return intrinsics_; }
  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  /// K * [R | t], 3x4.
  const Eigen::Matrix<double, 3, 4>& projection_matrix() const { return projection_; }

  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const { return -rotation_.transpose() * translation_; }

  /// Depth of a world point along the optical axis (camera-frame z).
  double depth(const Eigen::Vector3d& point) const {
    return (rotation_ * point + translation_).z();
  }

 private:
  int id_;
  Eigen::Matrix3d intrinsics_;
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
  Eigen::Matrix<double, 3, 4> projection_;
};

/// Perspective projection of a world point. Throws DegenerateDepth for points
/// on (or behind) the principal plane.
PixelPoint project(const CameraParams& camera, const Eigen::Vector3d& point);

/// Fundamental matrix F21 with p2^T F21 p1 = 0 for corresponding pixels.
/// Normalized to unit Frobenius norm with a deterministic sign. Throws
/// ZeroBaseline when the camera centers coincide.
Eigen::Matrix3d fundamental_matrix(const CameraParams& cam1, const CameraParams& cam2);

/// Epipolar line F * [u v 1]^T of a pixel in the other view.
EpipolarLine epipolar_line(const Eigen::Matrix3d& F, const PixelPoint& p);

/// Perpendicular point-to-line distance in pixels. Throws DegenerateLine when
/// the line direction vanishes (pixel at the epipole).
double point_line_distance(const PixelPoint& p, const EpipolarLine& line);

/// Symmetric epipolar distance d(p1, F12*p2) + d(p2, F21*p1), Eq. of the
/// two-view correspondence residual. F12 maps view-2 pixels to view-1 lines
/// (i.e. F12 = F21^T for a consistent pair).
double epipolar_distance(const PixelPoint& p1, const PixelPoint& p2, const Eigen::Matrix3d& F12,
                         const Eigen::Matrix3d& F21);

}  // namespace mvmc
