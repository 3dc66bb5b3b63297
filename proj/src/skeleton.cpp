#include "mvmc/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mvmc {

SkeletonShape::SkeletonShape(std::vector<JointSpec> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) throw Error("skeleton: no joints");
  if (joints_[0].parent != -1) throw Error("skeleton: joint 0 must be the root");
  children_.resize(joints_.size());
  angle_offsets_.resize(joints_.size(), 0);
  for (size_t j = 1; j < joints_.size(); ++j) {
    const int p = joints_[j].parent;
    if (p < 0 || p >= static_cast<int>(j)) {
      throw Error("skeleton: joint " + std::to_string(j) + " parent " + std::to_string(p) +
                  " must precede it (topological order)");
    }
    if (joints_[j].offset.norm() <= 0.0) {
      throw Error("skeleton: joint " + std::to_string(j) + " has zero bone length");
    }
    if (joints_[j].dof == JointDof::Hinge) joints_[j].hinge_axis.normalize();
    children_[p].push_back(static_cast<int>(j));
  }
  for (size_t j = 0; j < joints_.size(); ++j) {
    angle_offsets_[j] = total_angle_dofs_;
    total_angle_dofs_ += dof_count(static_cast<int>(j));
    const auto& spec = joints_[j];
    if (spec.limit_lo.size() != spec.limit_hi.size()) {
      throw Error("skeleton: joint " + std::to_string(j) + " limit size mismatch");
    }
    for (int k = 0; k < spec.limit_lo.size(); ++k) {
      if (spec.limit_lo(k) > spec.limit_hi(k)) {
        throw Error("skeleton: joint " + std::to_string(j) + " has lo > hi");
      }
    }
  }
}

void SkeletonShape::set_bone_length(int j, double length) {
  if (j <= 0 || j >= joint_count()) throw Error("set_bone_length: bad joint index");
  if (length <= 0.0) throw Error("set_bone_length: length must be positive");
  joints_[j].offset = joints_[j].offset.normalized() * length;
}

namespace {

JointSpec make_joint(std::string name, int parent, const Eigen::Vector3d& offset, JointDof dof,
                     double lim, const Eigen::Vector3d& axis = Eigen::Vector3d::UnitY(),
                     double hinge_lo = 0.0, double hinge_hi = 2.6) {
  JointSpec s;
  s.name = std::move(name);
  s.parent = parent;
  s.offset = offset;
  s.dof = dof;
  s.hinge_axis = axis;
  if (dof == JointDof::Ball) {
    s.limit_lo = Eigen::Vector3d::Constant(-lim);
    s.limit_hi = Eigen::Vector3d::Constant(lim);
  } else {
    s.limit_lo = Eigen::VectorXd::Constant(1, hinge_lo);
    s.limit_hi = Eigen::VectorXd::Constant(1, hinge_hi);
  }
  return s;
}

}  // namespace

SkeletonShape default_skeleton() {
  using V = Eigen::Vector3d;
  std::vector<JointSpec> j;
  j.push_back(make_joint("pelvis", -1, V::Zero(), JointDof::Ball, 0.0));
  j[0].limit_lo.resize(0);
  j[0].limit_hi.resize(0);
  j.push_back(make_joint("hip_l", 0, V(0, 0.09, -0.05), JointDof::Ball, 2.6));
  j.push_back(make_joint("hip_r", 0, V(0, -0.09, -0.05), JointDof::Ball, 2.6));
  j.push_back(make_joint("spine1", 0, V(0, 0, 0.11), JointDof::Ball, 1.0));
  j.push_back(make_joint("knee_l", 1, V(0, 0, -0.38), JointDof::Hinge, 0, V(0, 1, 0)));
  j.push_back(make_joint("knee_r", 2, V(0, 0, -0.38), JointDof::Hinge, 0, V(0, 1, 0)));
  j.push_back(make_joint("spine2", 3, V(0, 0, 0.12), JointDof::Ball, 1.0));
  j.push_back(make_joint("ankle_l", 4, V(0, 0, -0.40), JointDof::Ball, 1.0));
  j.push_back(make_joint("ankle_r", 5, V(0, 0, -0.40), JointDof::Ball, 1.0));
  j.push_back(make_joint("spine3", 6, V(0, 0, 0.13), JointDof::Ball, 1.0));
  j.push_back(make_joint("toe_l", 7, V(0.14, 0, -0.042), JointDof::Ball, 0.8));
  j.push_back(make_joint("toe_r", 8, V(0.14, 0, -0.042), JointDof::Ball, 0.8));
  j.push_back(make_joint("neck", 9, V(0, 0, 0.14), JointDof::Ball, 1.0));
  j.push_back(make_joint("collar_l", 9, V(0, 0.08, 0.08), JointDof::Ball, 0.8));
  j.push_back(make_joint("collar_r", 9, V(0, -0.08, 0.08), JointDof::Ball, 0.8));
  j.push_back(make_joint("head", 12, V(0, 0, 0.12), JointDof::Ball, 1.0));
  j.push_back(make_joint("shoulder_l", 13, V(0, 0.10, 0), JointDof::Ball, 2.6));
  j.push_back(make_joint("shoulder_r", 14, V(0, -0.10, 0), JointDof::Ball, 2.6));
  j.push_back(make_joint("elbow_l", 16, V(0, 0.26, 0), JointDof::Hinge, 0, V(0, 0, -1)));
  j.push_back(make_joint("elbow_r", 17, V(0, -0.26, 0), JointDof::Hinge, 0, V(0, 0, 1)));
  j.push_back(make_joint("wrist_l", 18, V(0, 0.25, 0), JointDof::Ball, 1.6));
  j.push_back(make_joint("wrist_r", 19, V(0, -0.25, 0), JointDof::Ball, 1.6));
  j.push_back(make_joint("hand_l", 20, V(0, 0.08, 0), JointDof::Ball, 0.8));
  j.push_back(make_joint("hand_r", 21, V(0, -0.08, 0), JointDof::Ball, 0.8));
  return SkeletonShape(std::move(j));
}

Pose Pose::clamped(const SkeletonShape& shape) const {
  Pose out = *this;
  out.root_orientation.normalize();
  for (int j = 1; j < shape.joint_count(); ++j) {
    const auto& spec = shape.joint(j);
    const int off = shape.angle_offset(j);
    for (int k = 0; k < shape.dof_count(j); ++k) {
      out.joint_angles(off + k) =
          std::clamp(joint_angles(off + k), spec.limit_lo(k), spec.limit_hi(k));
    }
  }
  return out;
}

namespace {

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  const double c = std::cos(a), s = std::sin(a);
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  const double c = std::cos(a), s = std::sin(a);
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  const double c = std::cos(a), s = std::sin(a);
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

struct FkScratch {
  FkResult fk;
  std::vector<Eigen::Vector3d> axis;
  std::vector<Eigen::Vector3d> origin;
  Eigen::Matrix3d root_rot;
  Eigen::Vector4d quat_hat;
  double quat_norm;
};

FkScratch run_fk(const SkeletonShape& shape, const Pose& pose, bool record_axes) {
  if (pose.joint_angles.size() != shape.total_angle_dofs()) {
    throw DimensionMismatch("pose has " + std::to_string(pose.joint_angles.size()) +
                            " angle DOFs, skeleton expects " +
                            std::to_string(shape.total_angle_dofs()));
  }
  FkScratch s;
  const int nj = shape.joint_count();
  s.fk.positions.resize(nj);
  s.fk.rotations.resize(nj);
  if (record_axes) {
    s.axis.resize(shape.total_angle_dofs());
    s.origin.resize(shape.total_angle_dofs());
  }

  const Eigen::Vector4d q_raw(pose.root_orientation.w(), pose.root_orientation.x(),
                              pose.root_orientation.y(), pose.root_orientation.z());
  s.quat_norm = q_raw.norm();
  if (s.quat_norm < 1e-12) throw Error("FK: zero root quaternion");
  s.quat_hat = q_raw / s.quat_norm;
  s.root_rot = Eigen::Quaterniond(s.quat_hat(0), s.quat_hat(1), s.quat_hat(2), s.quat_hat(3))
                   .toRotationMatrix();

  s.fk.positions[0] = pose.root_position;
  s.fk.rotations[0] = s.root_rot;
  for (int j = 1; j < nj; ++j) {
    const auto& spec = shape.joint(j);
    const Eigen::Matrix3d& parent_rot = s.fk.rotations[spec.parent];
    s.fk.positions[j] = s.fk.positions[spec.parent] + parent_rot * spec.offset;

    const int off = shape.angle_offset(j);
    Eigen::Matrix3d local;
    if (spec.dof == JointDof::Hinge) {
      const double a = pose.joint_angles(off);
      local = Eigen::AngleAxisd(a, spec.hinge_axis).toRotationMatrix();
      if (record_axes) {
        s.axis[off] = parent_rot * spec.hinge_axis;
        s.origin[off] = s.fk.positions[j];
      }
    } else {
      const double a1 = pose.joint_angles(off);
      const double a2 = pose.joint_angles(off + 1);
      const double a3 = pose.joint_angles(off + 2);
      const Eigen::Matrix3d rx = rot_x(a1);
      const Eigen::Matrix3d ry = rot_y(a2);
      local = rx * ry * rot_z(a3);
      if (record_axes) {
        s.axis[off] = parent_rot * Eigen::Vector3d::UnitX();
        s.axis[off + 1] = parent_rot * rx * Eigen::Vector3d::UnitY();
        s.axis[off + 2] = parent_rot * rx * ry * Eigen::Vector3d::UnitZ();
        s.origin[off] = s.origin[off + 1] = s.origin[off + 2] = s.fk.positions[j];
      }
    }
    s.fk.rotations[j] = parent_rot * local;
  }
  return s;
}

// dR/dq for a unit quaternion (w, x, y, z).
std::array<Eigen::Matrix3d, 4> rotation_quat_derivatives(const Eigen::Vector4d& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

}  // namespace

FkResult forward_kinematics(const SkeletonShape& shape, const Pose& pose) {
  return run_fk(shape, pose, false).fk;
}

FkJacobian::FkJacobian(const SkeletonShape& shape, const Pose& pose) : shape_(shape) {
  FkScratch s = run_fk(shape, pose, true);
  fk_ = std::move(s.fk);
  dof_axis_ = std::move(s.axis);
  dof_origin_ = std::move(s.origin);
  rot_normalized_ = s.root_rot;
  quat_normalized_ = s.quat_hat;
  quat_norm_ = s.quat_norm;
}

FkJacobian::PoseGradient FkJacobian::accumulate(
    const std::vector<Eigen::Vector3d>& position_gradients) const {
  const int nj = shape_.joint_count();
  if (static_cast<int>(position_gradients.size()) != nj) {
    throw DimensionMismatch("gradient accumulation: wrong joint count");
  }
  PoseGradient grad;
  grad.joint_angles = Eigen::VectorXd::Zero(shape_.total_angle_dofs());

  // Subtree sums: s1 = sum of g_m, s2 = sum of p_m x g_m over each subtree.
  std::vector<Eigen::Vector3d> s1(nj), s2(nj);
  Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();  // sum (p_m - p_root) g_m^T
  for (int j = nj - 1; j >= 0; --j) {
    s1[j] = position_gradients[j];
    s2[j] = fk_.positions[j].cross(position_gradients[j]);
    for (int c : shape_.children(j)) {
      s1[j] += s1[c];
      s2[j] += s2[c];
    }
    grad.root_position += position_gradients[j];
    moment += (fk_.positions[j] - fk_.positions[0]) * position_gradients[j].transpose();
  }

  // Revolute DOFs of joint j move the strict subtree below j.
  for (int j = 1; j < nj; ++j) {
    const int nd = shape_.dof_count(j);
    if (nd == 0 || shape_.is_leaf(j)) continue;
    Eigen::Vector3d sub1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d sub2 = Eigen::Vector3d::Zero();
    for (int c : shape_.children(j)) {
      sub1 += s1[c];
      sub2 += s2[c];
    }
    const int off = shape_.angle_offset(j);
    for (int k = 0; k < nd; ++k) {
      grad.joint_angles(off + k) =
          dof_axis_[off + k].dot(sub2 - dof_origin_[off + k].cross(sub1));
    }
  }

  // Root orientation: through R(q / |q|).
  const Eigen::Matrix3d m = rot_normalized_.transpose() * moment;
  const auto dr = rotation_quat_derivatives(quat_normalized_);
  Eigen::Vector4d g_hat;
  for (int k = 0; k < 4; ++k) g_hat(k) = (dr[k] * m).trace();
  grad.root_orientation =
      (Eigen::Matrix4d::Identity() - quat_normalized_ * quat_normalized_.transpose()) * g_hat /
      quat_norm_;
  return grad;
}

SkeletonShape fit_shape(const SkeletonShape& tree,
                        const std::vector<std::vector<Eigen::Vector3d>>& frames) {
  const int nj = tree.joint_count();
  std::vector<const std::vector<Eigen::Vector3d>*> usable;
  for (const auto& f : frames) {
    if (static_cast<int>(f.size()) == nj) usable.push_back(&f);
  }
  if (usable.size() < 10) {
    throw TooSparse("shape fit needs >= 10 complete frames, got " +
                    std::to_string(usable.size()));
  }
  SkeletonShape out = tree;
  std::vector<double> lengths(usable.size());
  for (int j = 1; j < nj; ++j) {
    const int p = tree.joint(j).parent;
    for (size_t i = 0; i < usable.size(); ++i) {
      lengths[i] = ((*usable[i])[j] - (*usable[i])[p]).norm();
    }
    std::nth_element(lengths.begin(), lengths.begin() + lengths.size() / 2, lengths.end());
    double median = lengths[lengths.size() / 2];
    if (lengths.size() % 2 == 0) {
      const double hi = median;
      std::nth_element(lengths.begin(), lengths.begin() + lengths.size() / 2 - 1, lengths.end());
      median = 0.5 * (lengths[lengths.size() / 2 - 1] + hi);
    }
    out.set_bone_length(j, median);
  }
  return out;
}

}  // namespace mvmc
