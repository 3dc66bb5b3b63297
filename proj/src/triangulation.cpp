#include "mvmc/triangulation.hpp"

#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace mvmc {

namespace {

const CameraParams& camera_by_id(const std::vector<CameraParams>& cameras, int id) {
  for (const auto& c : cameras) {
    if (c.id() == id) return c;
  }
  throw Error("unknown camera id " + std::to_string(id));
}

}  // namespace

TriangulatedPoint triangulate_weighted(const std::vector<WeightedObservation>& observations,
                                       const std::vector<CameraParams>& cameras) {
  std::vector<const WeightedObservation*> used;
  for (const auto& obs : observations) {
    if (obs.pixel.confidence > 0.0) used.push_back(&obs);
  }
  if (used.size() < 2) {
    throw InsufficientViews("triangulation needs >= 2 weighted observations, got " +
                            std::to_string(used.size()));
  }

  Eigen::MatrixXd a(2 * used.size(), 4);
  for (size_t i = 0; i < used.size(); ++i) {
    const auto& obs = *used[i];
    const auto& p = camera_by_id(cameras, obs.camera_id).projection_matrix();
    const double mu = obs.pixel.confidence;
    a.row(2 * i) = mu * (p.row(0) - obs.pixel.u * p.row(2));
    a.row(2 * i + 1) = mu * (p.row(1) - obs.pixel.v * p.row(2));
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if ((s(2) - s(3)) < 1e-12 * std::max(s(0), 1e-300)) {
    throw DegenerateGeometry("ambiguous triangulation: two smallest singular values coincide");
  }
  const Eigen::Vector4d x_h = svd.matrixV().col(3);
  if (std::abs(x_h(3)) < 1e-12) {
    throw DegenerateGeometry("triangulated point at infinity (|w| < 1e-12)");
  }
  const Eigen::Vector3d x = x_h.head<3>() / x_h(3);

  bool any_in_front = false;
  double sq_err = 0.0;
  double conf = 0.0;
  for (const auto* obs : used) {
    const auto& cam = camera_by_id(cameras, obs->camera_id);
    if (cam.depth(x) > 0.0) any_in_front = true;
    conf += obs->pixel.confidence;
    const Eigen::Vector3d s3 = cam.projection_matrix() * x.homogeneous();
    const double du = s3.x() / s3.z() - obs->pixel.u;
    const double dv = s3.y() / s3.z() - obs->pixel.v;
    sq_err += du * du + dv * dv;
  }
  if (!any_in_front) {
    throw BehindCamera("triangulated point has negative depth in every contributing camera");
  }

  TriangulatedPoint out;
  out.position = x;
  out.confidence = conf / static_cast<double>(used.size());
  out.reprojection_rms = std::sqrt(sq_err / static_cast<double>(used.size()));
  return out;
}

namespace {

// Natural cubic smoothing spline (Reinsch): solve (W + lambda D D^T) g = D y
// for interior second derivatives g, fitted values a = y - lambda D^T g.
// With lambda = 0 this is the interpolating natural spline.
struct FittedSpline {
  std::vector<double> x;      // knot positions (frame indices)
  std::vector<double> a;      // fitted values at knots
  std::vector<double> gamma;  // second derivatives at knots (natural: ends 0)

  double eval(double t) const {
    const int n = static_cast<int>(x.size());
    int i = static_cast<int>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    const double h = x[i + 1] - x[i];
    const double u = (t - x[i]) / h;
    const double w = 1.0 - u;
    // Standard cubic-spline segment form with second derivatives gamma.
    return w * a[i] + u * a[i + 1] +
           h * h / 6.0 * ((w * w * w - w) * gamma[i] + (u * u * u - u) * gamma[i + 1]);
  }
};

FittedSpline fit_smoothing_spline(const std::vector<double>& x, const std::vector<double>& y,
                                  double lambda) {
  const int n = static_cast<int>(x.size());
  FittedSpline s;
  s.x = x;
  s.a = y;
  s.gamma.assign(n, 0.0);
  if (n < 3) return s;  // a straight line has no curvature to smooth

  const int m = n - 2;
  Eigen::SparseMatrix<double> d(m, n);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> h(n - 1);
  for (int i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];
  for (int i = 0; i < m; ++i) {
    trip.emplace_back(i, i, 1.0 / h[i]);
    trip.emplace_back(i, i + 1, -1.0 / h[i] - 1.0 / h[i + 1]);
    trip.emplace_back(i, i + 2, 1.0 / h[i + 1]);
  }
  d.setFromTriplets(trip.begin(), trip.end());

  Eigen::SparseMatrix<double> w(m, m);
  trip.clear();
  for (int i = 0; i < m; ++i) {
    trip.emplace_back(i, i, (h[i] + h[i + 1]) / 3.0);
    if (i + 1 < m) {
      trip.emplace_back(i, i + 1, h[i + 1] / 6.0);
      trip.emplace_back(i + 1, i, h[i + 1] / 6.0);
    }
  }
  w.setFromTriplets(trip.begin(), trip.end());

  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::SparseMatrix<double> lhs = w;
  if (lambda > 0.0) {
    lhs = w + lambda * Eigen::SparseMatrix<double>(d * Eigen::SparseMatrix<double>(d.transpose()));
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lhs);
  if (solver.info() != Eigen::Success) throw Error("spline solve failed");
  const Eigen::VectorXd g = solver.solve(d * yv);

  Eigen::VectorXd a = yv;
  if (lambda > 0.0) a -= lambda * (Eigen::SparseMatrix<double>(d.transpose()) * g);
  for (int i = 0; i < n; ++i) s.a[i] = a(i);
  for (int i = 0; i < m; ++i) s.gamma[i + 1] = g(i);
  return s;
}

}  // namespace

JointTrajectory smooth_spline(const JointTrajectory& traj, const SplineConfig& config) {
  std::vector<int> present;
  for (int t = 0; t < static_cast<int>(traj.frames.size()); ++t) {
    if (traj.frames[t].has_value()) present.push_back(t);
  }
  if (present.size() < 4) {
    throw TooSparse("smoothing spline needs >= 4 present frames, got " +
                    std::to_string(present.size()));
  }

  std::vector<double> xs(present.begin(), present.end());
  std::array<FittedSpline, 3> splines;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> ys(present.size());
    for (size_t i = 0; i < present.size(); ++i) ys[i] = (*traj.frames[present[i]]).position(c);
    splines[c] = fit_smoothing_spline(xs, ys, config.lambda);
  }

  JointTrajectory out = traj;
  // Smoothed values at present frames.
  for (size_t i = 0; i < present.size(); ++i) {
    auto& f = *out.frames[present[i]];
    for (int c = 0; c < 3; ++c) f.position(c) = splines[c].a[i];
  }
  // Interior gaps up to max_gap frames; never extrapolate.
  for (size_t i = 0; i + 1 < present.size(); ++i) {
    const int gap = present[i + 1] - present[i] - 1;
    if (gap == 0 || gap > config.max_gap) continue;
    const double conf = std::min((*traj.frames[present[i]]).confidence,
                                 (*traj.frames[present[i + 1]]).confidence);
    for (int t = present[i] + 1; t < present[i + 1]; ++t) {
      TriangulatedPoint p;
      for (int c = 0; c < 3; ++c) p.position(c) = splines[c].eval(t);
      p.confidence = conf;
      p.reprojection_rms = 0.0;
      out.frames[t] = p;
    }
  }
  return out;
}

JointTrajectory ekf_fill(const JointTrajectory& traj, const KalmanConfig& config) {
  std::vector<int> present;
  for (int t = 0; t < static_cast<int>(traj.frames.size()); ++t) {
    if (traj.frames[t].has_value()) present.push_back(t);
  }
  if (present.size() < 2) {
    throw TooSparse("Kalman fill needs >= 2 present frames, got " +
                    std::to_string(present.size()));
  }

  const double dt = 1.0 / traj.frame_rate_hz;
  Eigen::Matrix3d f;  // per-axis [p v a] transition
  f << 1, dt, 0.5 * dt * dt, 0, 1, dt, 0, 0, 1;
  Eigen::Matrix3d qm;
  const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt, d5 = d4 * dt;
  qm << d5 / 20, d4 / 8, d3 / 6, d4 / 8, d3 / 3, d2 / 2, d3 / 6, d2 / 2, dt;
  qm *= config.jerk_psd;
  const double r = config.meas_noise * config.meas_noise;

  const int first = present.front();
  // State per axis: position, velocity, acceleration.
  Eigen::Matrix3d cov[3];
  Eigen::Vector3d state[3];
  const Eigen::Vector3d p0 = (*traj.frames[first]).position;
  for (int c = 0; c < 3; ++c) {
    state[c] = Eigen::Vector3d(p0(c), 0.0, 0.0);
    cov[c] = Eigen::Vector3d(1e-4, 1e2, 1e2).asDiagonal();
  }

  JointTrajectory out = traj;
  int since_meas = 0;
  double last_conf = (*traj.frames[first]).confidence;
  for (int t = first; t < static_cast<int>(traj.frames.size()); ++t) {
    if (t > first) {
      for (int c = 0; c < 3; ++c) {
        state[c] = f * state[c];
        cov[c] = f * cov[c] * f.transpose() + qm;
      }
    }
    const bool measured = traj.frames[t].has_value();
    if (measured) {
      const auto& meas = *traj.frames[t];
      for (int c = 0; c < 3; ++c) {
        const double innov = meas.position(c) - state[c](0);
        const double s = cov[c](0, 0) + r;
        const Eigen::Vector3d gain = cov[c].col(0) / s;
        state[c] += gain * innov;
        cov[c] -= gain * cov[c].row(0);
      }
      since_meas = 0;
      last_conf = meas.confidence;
      auto& frame = *out.frames[t];
      frame.position = Eigen::Vector3d(state[0](0), state[1](0), state[2](0));
      frame.confidence = meas.confidence;
    } else {
      ++since_meas;
      TriangulatedPoint p;
      p.position = Eigen::Vector3d(state[0](0), state[1](0), state[2](0));
      p.confidence = last_conf * std::pow(config.confidence_decay, since_meas);
      p.reprojection_rms = 0.0;
      out.frames[t] = p;
    }
  }
  // Frames before the first measurement: hold the first estimate, decayed.
  const Eigen::Vector3d first_pos = (*out.frames[first]).position;
  for (int t = first - 1; t >= 0; --t) {
    TriangulatedPoint p;
    p.position = first_pos;
    p.confidence =
        (*traj.frames[first]).confidence * std::pow(config.confidence_decay, first - t);
    out.frames[t] = p;
  }
  return out;
}

JointTrajectory filter_trajectory(const JointTrajectory& traj, const FilterConfig& config) {
  JointTrajectory cleaned = traj;
  for (auto& f : cleaned.frames) {
    if (f.has_value() && f->reprojection_rms > config.rms_failure_px) f.reset();
  }
  if (cleaned.present_count() < 4) {
    return cleaned.present_count() >= 2 ? ekf_fill(cleaned, config.kalman) : cleaned;
  }
  JointTrajectory smoothed = smooth_spline(cleaned, config.spline);
  if (smoothed.present_count() == static_cast<int>(smoothed.frames.size())) return smoothed;
  return ekf_fill(smoothed, config.kalman);
}

}  // namespace mvmc
