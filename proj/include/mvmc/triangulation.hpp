#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mvmc/camera.hpp"

namespace mvmc {

/// A 2D joint detection attributed to a camera, weighted by confidence.
struct WeightedObservation {
  int camera_id = 0;
  PixelPoint pixel;
};

struct TriangulatedPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double confidence = 0.0;       // mean confidence of the contributing detections
  double reprojection_rms = 0.0; // px, over contributing views
};

/// Confidence-weighted DLT: stacks rows mu_j (P1j - u_j P3j), mu_j (P2j - v_j P3j)
/// for every observation with positive weight and takes the smallest right
/// singular vector. Observations with mu = 0 contribute nothing. Throws
/// InsufficientViews (< 2 usable observations), DegenerateGeometry (ambiguous
/// or unnormalizable solution) or BehindCamera (negative depth everywhere).
TriangulatedPoint triangulate_weighted(const std::vector<WeightedObservation>& observations,
                                       const std::vector<CameraParams>& cameras);

/// Per-joint time series with explicit gaps.
struct JointTrajectory {
  std::vector<std::optional<TriangulatedPoint>> frames;
  double frame_rate_hz = 60.0;
  int joint_id = 0;

  int present_count() const {
    int n = 0;
    for (const auto& f : frames) n += f.has_value() ? 1 : 0;
    return n;
  }
};

struct SplineConfig {
  double lambda = 1e-3;  // smoothing strength, frame-index time units
  int max_gap = 10;      // longest interior gap the spline will fill, frames
};

/// Cubic smoothing spline per coordinate over the present frames. Fills
/// interior gaps up to max_gap frames; frames outside the first/last present
/// frame and longer gaps stay absent. Filled frames carry the minimum
/// confidence of the bracketing present frames. Throws TooSparse (< 4 present).
JointTrajectory smooth_spline(const JointTrajectory& traj, const SplineConfig& config = {});

struct KalmanConfig {
  double jerk_psd = 10.0;       // white-jerk spectral density, m/s^3
  double meas_noise = 0.005;    // measurement std, m
  double confidence_decay = 0.8;  // per predicted frame
};

/// Constant-acceleration Kalman filter run forward over all frames (the
/// linear special case of the extended form; the model hook is the config).
/// Measured frames update, gap frames predict, and every output frame carries
/// an estimate. Throws TooSparse (< 2 present frames).
JointTrajectory ekf_fill(const JointTrajectory& traj, const KalmanConfig& config = {});

struct FilterConfig {
  SplineConfig spline;
  KalmanConfig kalman;
  double rms_failure_px = 20.0;  // triangulations above this are treated as missing
};

/// Pipeline stage ordering: spline first, Kalman prediction for the gaps the
/// spline refused (boundary gaps and gaps longer than max_gap).
JointTrajectory filter_trajectory(const JointTrajectory& traj, const FilterConfig& config = {});

}  // namespace mvmc
