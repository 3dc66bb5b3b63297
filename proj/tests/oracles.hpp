#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "mvmc/camera.hpp"
#include "mvmc/rng.hpp"

namespace oracle {

/// Direct homogeneous projection: 3x4 matrix times 4-vector, dehomogenized.
inline Eigen::Vector2d project_homogeneous(const Eigen::Matrix<double, 3, 4>& p,
                                           const Eigen::Vector3d& x) {
  const Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
  const Eigen::Vector3d s = p * xh;
  return {s.x() / s.z(), s.y() / s.z()};
}

/// Cameras on a ring looking at a target point.
inline std::vector<mvmc::CameraParams> ring_cameras(int count, double radius, double height,
                                                    const Eigen::Vector3d& target,
                                                    double focal = 1100.0) {
  std::vector<mvmc::CameraParams> cams;
  Eigen::Matrix3d k;
  k << focal, 0, 960, 0, focal, 540, 0, 0, 1;
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * M_PI * i / count;
    const Eigen::Vector3d center(radius * std::cos(phi), radius * std::sin(phi), height);
    const Eigen::Vector3d z = (target - center).normalized();
    Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d x = z.cross(up).normalized();
    if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitX();
    const Eigen::Vector3d y = z.cross(x).normalized();
    Eigen::Matrix3d r;
    r.row(0) = x;
    r.row(1) = y;
    r.row(2) = z;
    cams.emplace_back(i, k, r, -r * center);
  }
  return cams;
}

/// Random valid camera: random rotation (via quaternion), random K.
inline mvmc::CameraParams random_camera(mvmc::CounterRng& rng, int id) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  Eigen::Matrix3d k;
  k << 800 + 600 * rng.uniform(), 0, 500 + 400 * rng.uniform(), 0, 800 + 600 * rng.uniform(),
      300 + 300 * rng.uniform(), 0, 0, 1;
  const Eigen::Vector3d t(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 5));
  return mvmc::CameraParams(id, k, q.toRotationMatrix(), t);
}

/// Gauss-Newton minimizer of the summed squared reprojection error. Oracle
/// for the weighted-DLT accuracy criterion.
inline Eigen::Vector3d refine_reprojection(const Eigen::Vector3d& x0,
                                           const std::vector<Eigen::Vector2d>& pixels,
                                           const std::vector<double>& weights,
                                           const std::vector<mvmc::CameraParams>& cams,
                                           int iters = 50) {
  Eigen::Vector3d x = x0;
  for (int it = 0; it < iters; ++it) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < cams.size(); ++i) {
      const auto& p = cams[i].projection_matrix();
      const Eigen::Vector3d s = p * x.homogeneous();
      const Eigen::Vector2d proj(s.x() / s.z(), s.y() / s.z());
      Eigen::Matrix<double, 2, 3> j;
      j.row(0) = (p.row(0).head<3>() - proj.x() * p.row(2).head<3>()) / s.z();
      j.row(1) = (p.row(1).head<3>() - proj.y() * p.row(2).head<3>()) / s.z();
      const Eigen::Vector2d r = proj - pixels[i];
      const double w = weights[i] * weights[i];
      h += w * j.transpose() * j;
      b += w * j.transpose() * r;
    }
    const Eigen::Vector3d step = h.ldlt().solve(b);
    x -= step;
    if (step.norm() < 1e-14) break;
  }
  return x;
}

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Spearman rank correlation.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n - 1) / 2.0;
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return num / std::sqrt(da * db);
}

/// All permutations of 0..n-1 (n small).
inline std::vector<std::vector<int>> permutations(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace oracle
