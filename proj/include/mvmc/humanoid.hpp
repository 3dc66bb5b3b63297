#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mvmc/capsule.hpp"
#include "mvmc/skeleton.hpp"

namespace mvmc {

enum class PhysJointType { Free, Ball, Hinge };

/// One rigid body of the articulated model: all bones emanating from a single
/// non-leaf skeleton joint, with the connecting joint at the body origin.
struct RigidBody {
  std::string name;
  int skeleton_joint = 0;
  int parent = -1;  // body index; -1 for the root body
  PhysJointType joint = PhysJointType::Free;
  Eigen::Vector3d anchor_in_parent = Eigen::Vector3d::Zero();  // rest offset, parent frame
  Eigen::Vector3d hinge_axis = Eigen::Vector3d::UnitY();
  Eigen::VectorXd limit_lo, limit_hi;

  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();      // body frame
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about com, body frame
  std::vector<Capsule> capsules;                      // body frame
};

/// Leaf skeleton joints carry no DOFs; their positions are fixed sites on the
/// parent body.
struct LeafSite {
  int skeleton_joint = 0;
  int body = 0;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // body frame
};

struct HumanoidBuildOptions {
  double density = 985.0;   // kg/m^3
  double radius_ratio = 0.12;
  double radius_min = 0.03;
  double radius_max = 0.12;
};

class HumanoidPhysicsModel {
 public:
  HumanoidPhysicsModel(std::vector<RigidBody> bodies, std::vector<LeafSite> leaf_sites,
                       int skeleton_joint_count);

  const std::vector<RigidBody>& bodies() const { return bodies_; }
  const std::vector<LeafSite>& leaf_sites() const { return leaf_sites_; }
  int skeleton_joint_count() const { return skeleton_joint_count_; }

  int nq() const { return nq_; }  // 7 + joint angles
  int nv() const { return nv_; }  // 6 + joint angles
  int nu() const { return nu_; }  // actuated joint angles (root unactuated)
  double total_mass() const { return total_mass_; }

  /// DOF count of body b's joint (0 angles for the free root; its 6 DOFs are
  /// handled separately).
  int body_dofs(int b) const;
  /// Offset of body b's angles within the angle block (after the root's 7/6).
  int angle_offset(int b) const { return angle_offsets_[b]; }

  /// Pairs of bodies excluded from self-collision: parent-child plus pairs
  /// that already overlap at the rest pose.
  const std::vector<std::pair<int, int>>& collision_exclusions() const { return exclusions_; }

 private:
  std::vector<RigidBody> bodies_;
  std::vector<LeafSite> leaf_sites_;
  std::vector<int> angle_offsets_;
  std::vector<std::pair<int, int>> exclusions_;
  int skeleton_joint_count_ = 0;
  int nq_ = 0, nv_ = 0, nu_ = 0;
  double total_mass_ = 0.0;

  friend HumanoidPhysicsModel build_humanoid(const SkeletonShape&,
                                             const std::vector<Eigen::Vector3d>&,
                                             const HumanoidBuildOptions&);
};

/// Builds the articulated rigid-body model from a skeleton: one capsule per
/// bone (radius = ratio * length, clamped), mass = density * volume, analytic
/// capsule inertia, joint graph mirroring the tree. Throws DegenerateBone for
/// bones shorter than 1 cm.
HumanoidPhysicsModel build_humanoid(const SkeletonShape& shape,
                                    const std::vector<Eigen::Vector3d>& rest_positions,
                                    const HumanoidBuildOptions& options = {});
HumanoidPhysicsModel build_humanoid(const SkeletonShape& shape,
                                    const HumanoidBuildOptions& options = {});

}  // namespace mvmc
