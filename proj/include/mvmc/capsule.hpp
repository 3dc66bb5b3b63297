#pragma once

#include <Eigen/Dense>
#include <optional>

namespace mvmc {

/// Capsule (sphere-swept segment) between two endpoints.
struct Capsule {
  Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d p1 = Eigen::Vector3d::Zero();
  double radius = 0.0;

  double length() const { return (p1 - p0).norm(); }
  double volume() const;
  Eigen::Vector3d centroid() const { return 0.5 * (p0 + p1); }

  /// Inertia tensor about the centroid for the given density, in the frame
  /// the endpoints are expressed in.
  Eigen::Matrix3d inertia(double density) const;
};

/// Closest points between two segments (Ericson, robust for degenerate and
/// parallel configurations). Returns squared distance; fills the closest
/// points.
double segment_segment_closest(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1,
                               const Eigen::Vector3d& b0, const Eigen::Vector3d& b1,
                               Eigen::Vector3d* on_a, Eigen::Vector3d* on_b);

struct CapsuleContact {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();   // mid-penetration point
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ(); // from a toward b
  double depth = 0.0;                                // overlap, >= 0
};

/// Overlap between two capsules; nullopt when separated.
std::optional<CapsuleContact> capsule_capsule_contact(const Capsule& a, const Capsule& b);

/// Contacts of a capsule with the ground plane z = 0 (normal +z, one contact
/// per penetrating endpoint sphere, tangency included).
int capsule_ground_contacts(const Capsule& c, CapsuleContact out[2]);

}  // namespace mvmc
