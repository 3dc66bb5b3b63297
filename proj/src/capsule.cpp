#include "mvmc/capsule.hpp"

#include <algorithm>
#include <cmath>

namespace mvmc {

double Capsule::volume() const {
  const double r = radius;
  return M_PI * r * r * length() + 4.0 / 3.0 * M_PI * r * r * r;
}

Eigen::Matrix3d Capsule::inertia(double density) const {
  const double r = radius;
  const double l = length();
  const double r2 = r * r;
  const double m_cyl = density * M_PI * r2 * l;
  const double m_caps = density * 4.0 / 3.0 * M_PI * r2 * r;  // both hemispheres
  const double dist_cap = 0.5 * l + 3.0 / 8.0 * r;  // centroid offset of a hemisphere pair
  const double i_axial = 2.0 * m_caps * r2 / 5.0 + 0.5 * m_cyl * r2;
  const double i_perp = (83.0 / 320.0) * m_caps * r2 + m_caps * dist_cap * dist_cap +
                        (1.0 / 12.0) * m_cyl * (3.0 * r2 + l * l);

  Eigen::Vector3d axis = p1 - p0;
  if (l < 1e-12) axis = Eigen::Vector3d::UnitX();
  axis.normalize();
  // Orthonormal frame with the capsule axis first.
  Eigen::Vector3d u = axis.unitOrthogonal();
  Eigen::Vector3d w = axis.cross(u);
  Eigen::Matrix3d frame;
  frame.col(0) = axis;
  frame.col(1) = u;
  frame.col(2) = w;
  return frame * Eigen::Vector3d(i_axial, i_perp, i_perp).asDiagonal() * frame.transpose();
}

double segment_segment_closest(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                               const Eigen::Vector3d& b0, const Eigen::Vector3d& b1,
                               Eigen::Vector3d* on_a, Eigen::Vector3d* on_b) {
  const Eigen::Vector3d d1 = a1 - a0;
  const Eigen::Vector3d d2 = b1 - b0;
  const Eigen::Vector3d r = a0 - b0;
  const double la = d1.squaredNorm();
  const double lb = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (la <= 1e-18 && lb <= 1e-18) {
    // two points
  } else if (la <= 1e-18) {
    t = std::clamp(f / lb, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (lb <= 1e-18) {
      s = std::clamp(-c / la, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = la * lb - b * b;
      if (denom > 1e-18) {
        s = std::clamp((b * f - c * lb) / denom, 0.0, 1.0);
      }
      t = (b * s + f) / lb;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / la, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / la, 0.0, 1.0);
      }
    }
  }
  const Eigen::Vector3d pa = a0 + s * d1;
  const Eigen::Vector3d pb = b0 + t * d2;
  if (on_a) *on_a = pa;
  if (on_b) *on_b = pb;
  return (pa - pb).squaredNorm();
}

std::optional<CapsuleContact> capsule_capsule_contact(const Capsule& a, const Capsule& b) {
  Eigen::Vector3d pa, pb;
  const double d2 = segment_segment_closest(a.p0, a.p1, b.p0, b.p1, &pa, &pb);
  const double dist = std::sqrt(d2);
  const double depth = a.radius + b.radius - dist;
  if (depth < 0.0) return std::nullopt;
  CapsuleContact c;
  if (dist > 1e-9) {
    c.normal = (pb - pa) / dist;
  } else {
    c.normal = Eigen::Vector3d::UnitZ();  // axes intersect; any direction separates
  }
  c.depth = depth;
  c.point = 0.5 * ((pa + a.radius * c.normal) + (pb - b.radius * c.normal));
  return c;
}

int capsule_ground_contacts(const Capsule& c, CapsuleContact out[2]) {
  int n = 0;
  for (const Eigen::Vector3d& e : {c.p0, c.p1}) {
    const double depth = c.radius - e.z();
    if (depth >= 0.0) {
      out[n].normal = Eigen::Vector3d::UnitZ();
      out[n].depth = depth;
      out[n].point = Eigen::Vector3d(e.x(), e.y(), e.z() - c.radius + 0.5 * depth);
      ++n;
    }
  }
  return n;
}

}  // namespace mvmc
