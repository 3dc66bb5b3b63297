#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "mvmc/error.hpp"

namespace mvmc {

enum class JointDof { Ball, Hinge };

struct JointSpec {
  std::string name;
  int parent = -1;                                   // -1 for the root
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // rest offset from parent, meters
  JointDof dof = JointDof::Ball;
  Eigen::Vector3d hinge_axis = Eigen::Vector3d::UnitY();
  Eigen::VectorXd limit_lo;  // per angle DOF, radians
  Eigen::VectorXd limit_hi;
};

/// Parametric kinematic tree. Shape is the set of bone lengths (offset
/// norms); joint 0 is the root and parents precede children.
class SkeletonShape {
 public:
  explicit SkeletonShape(std::vector<JointSpec> joints);

  int joint_count() const { return static_cast<int>(joints_.size()); }
  const JointSpec& joint(int j) const { return joints_[j]; }
  const std::vector<JointSpec>& joints() const { return joints_; }

  /// Angle DOFs of joint j (root excluded from the angle vector).
  int dof_count(int j) const { return j == 0 ? 0 : (joints_[j].dof == JointDof::Ball ? 3 : 1); }
  int angle_offset(int j) const { return angle_offsets_[j]; }
  int total_angle_dofs() const { return total_angle_dofs_; }

  double bone_length(int j) const { return joints_[j].offset.norm(); }
  void set_bone_length(int j, double length);

  const std::vector<int>& children(int j) const { return children_[j]; }
  bool is_leaf(int j) const { return children_[j].empty(); }

 private:
  std::vector<JointSpec> joints_;
  std::vector<std::vector<int>> children_;
  std::vector<int> angle_offsets_;
  int total_angle_dofs_ = 0;
};

/// Default 24-joint humanoid tree (pelvis root, hinge knees/elbows, ball
/// joints elsewhere), z-up, sized for a ~1.75 m person standing at the
/// origin with root height 0.89 m.
SkeletonShape default_skeleton();

/// Per-frame pose: root transform plus stacked joint angles.
struct Pose {
  Eigen::Vector3d root_position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond root_orientation = Eigen::Quaterniond::Identity();
  Eigen::VectorXd joint_angles;

  static Pose rest(const SkeletonShape& shape) {
    Pose p;
    p.joint_angles = Eigen::VectorXd::Zero(shape.total_angle_dofs());
    return p;
  }

  /// Angles clamped to the shape's limits.
  Pose clamped(const SkeletonShape& shape) const;
};

/// Fixed-rate pose sequence for one person.
struct PoseSequence {
  std::vector<Pose> poses;
  double frame_rate_hz = 60.0;
  int person_id = 0;
};

struct FkResult {
  std::vector<Eigen::Vector3d> positions;  // world joint positions
  std::vector<Eigen::Matrix3d> rotations;  // world joint frames
};

/// Forward kinematics by composing parent transforms root-to-leaf. Inter-joint
/// distances along edges equal bone lengths exactly. Throws DimensionMismatch
/// when the pose does not match the shape.
FkResult forward_kinematics(const SkeletonShape& shape, const Pose& pose);

/// Gradient of a scalar loss through FK. Build once per (shape, pose), feed
/// per-joint position gradients, read the pose-space gradient.
class FkJacobian {
 public:
  FkJacobian(const SkeletonShape& shape, const Pose& pose);

  const FkResult& fk() const { return fk_; }

  struct PoseGradient {
    Eigen::Vector3d root_position = Eigen::Vector3d::Zero();
    Eigen::Vector4d root_orientation = Eigen::Vector4d::Zero();  // d/d(w,x,y,z), raw components
    Eigen::VectorXd joint_angles;
  };

  /// position_gradients[j] = dL/d(world position of joint j).
  PoseGradient accumulate(const std::vector<Eigen::Vector3d>& position_gradients) const;

  /// Root quaternion after normalization, (w, x, y, z).
  const Eigen::Vector4d& quat_normalized() const { return quat_normalized_; }

  /// Chains a gradient w.r.t. the normalized quaternion back to the raw
  /// stored components.
  Eigen::Vector4d quat_chain(const Eigen::Vector4d& grad_hat) const {
    return (Eigen::Matrix4d::Identity() - quat_normalized_ * quat_normalized_.transpose()) *
           grad_hat / quat_norm_;
  }

 private:
  const SkeletonShape& shape_;
  FkResult fk_;
  std::vector<Eigen::Vector3d> dof_axis_;    // world, per angle DOF
  std::vector<Eigen::Vector3d> dof_origin_;  // world anchor, per angle DOF
  Eigen::Matrix3d rot_normalized_;
  Eigen::Vector4d quat_normalized_;  // (w, x, y, z)
  double quat_norm_ = 1.0;
};

/// Median-of-frames bone length estimate. Frames must contain all joints;
/// throws TooSparse with fewer than 10 usable frames.
SkeletonShape fit_shape(const SkeletonShape& tree,
                        const std::vector<std::vector<Eigen::Vector3d>>& frames);

}  // namespace mvmc
