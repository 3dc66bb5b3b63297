#include "mvmc/humanoid.hpp"

#include <algorithm>
#include <cmath>

namespace mvmc {

HumanoidPhysicsModel::HumanoidPhysicsModel(std::vector<RigidBody> bodies,
                                           std::vector<LeafSite> leaf_sites,
                                           int skeleton_joint_count)
    : bodies_(std::move(bodies)),
      leaf_sites_(std::move(leaf_sites)),
      skeleton_joint_count_(skeleton_joint_count) {
  angle_offsets_.resize(bodies_.size(), 0);
  int angles = 0;
  for (size_t b = 0; b < bodies_.size(); ++b) {
    angle_offsets_[b] = angles;
    angles += body_dofs(static_cast<int>(b));
    total_mass_ += bodies_[b].mass;
    if (bodies_[b].mass <= 0.0) throw Error("physics body " + bodies_[b].name + " has no mass");
    // Symmetric positive-definite inertia.
    const Eigen::Matrix3d sym = 0.5 * (bodies_[b].inertia + bodies_[b].inertia.transpose());
    if ((sym - bodies_[b].inertia).norm() > 1e-9 ||
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(sym).eigenvalues().minCoeff() <= 0.0) {
      throw Error("physics body " + bodies_[b].name + " has invalid inertia");
    }
  }
  nq_ = 7 + angles;
  nv_ = 6 + angles;
  nu_ = angles;
}

int HumanoidPhysicsModel::body_dofs(int b) const {
  switch (bodies_[b].joint) {
    case PhysJointType::Free:
      return 0;
    case PhysJointType::Ball:
      return 3;
    case PhysJointType::Hinge:
      return 1;
  }
  return 0;
}

namespace {

std::vector<Eigen::Vector3d> rest_positions_from_shape(const SkeletonShape& shape) {
  std::vector<Eigen::Vector3d> rest(shape.joint_count(), Eigen::Vector3d::Zero());
  for (int j = 1; j < shape.joint_count(); ++j) {
    rest[j] = rest[shape.joint(j).parent] + shape.joint(j).offset;
  }
  return rest;
}

}  // namespace

HumanoidPhysicsModel build_humanoid(const SkeletonShape& shape,
                                    const HumanoidBuildOptions& options) {
  return build_humanoid(shape, rest_positions_from_shape(shape), options);
}

HumanoidPhysicsModel build_humanoid(const SkeletonShape& shape,
                                    const std::vector<Eigen::Vector3d>& rest_positions,
                                    const HumanoidBuildOptions& options) {
  const int nj = shape.joint_count();
  if (static_cast<int>(rest_positions.size()) != nj) {
    throw DimensionMismatch("rest positions do not match skeleton joints");
  }

  // Bodies for non-leaf joints, in skeleton order.
  std::vector<int> body_of_joint(nj, -1);
  std::vector<RigidBody> bodies;
  std::vector<LeafSite> leaves;
  for (int j = 0; j < nj; ++j) {
    if (shape.is_leaf(j)) continue;
    RigidBody body;
    body.name = shape.joint(j).name;
    body.skeleton_joint = j;
    if (j == 0) {
      body.parent = -1;
      body.joint = PhysJointType::Free;
    } else {
      // Parent body: the nearest non-leaf ancestor (the direct parent is
      // non-leaf by construction).
      body.parent = body_of_joint[shape.joint(j).parent];
      body.joint = shape.joint(j).dof == JointDof::Hinge ? PhysJointType::Hinge
                                                         : PhysJointType::Ball;
      body.anchor_in_parent = rest_positions[j] - rest_positions[shape.joint(j).parent];
      body.hinge_axis = shape.joint(j).hinge_axis;
      body.limit_lo = shape.joint(j).limit_lo;
      body.limit_hi = shape.joint(j).limit_hi;
    }
    body_of_joint[j] = static_cast<int>(bodies.size());
    bodies.push_back(std::move(body));
  }

  // One capsule per bone, attached to the bone's proximal body.
  for (int c = 1; c < nj; ++c) {
    const int j = shape.joint(c).parent;
    const int b = body_of_joint[j];
    const Eigen::Vector3d bone = rest_positions[c] - rest_positions[j];
    const double length = bone.norm();
    if (length < 0.01) {
      throw DegenerateBone("bone to joint " + shape.joint(c).name + " is " +
                           std::to_string(length) + " m");
    }
    Capsule cap;
    cap.p0 = Eigen::Vector3d::Zero();
    cap.p1 = bone;
    cap.radius = std::clamp(options.radius_ratio * length, options.radius_min,
                            options.radius_max);
    bodies[b].capsules.push_back(cap);
    if (shape.is_leaf(c)) {
      leaves.push_back(LeafSite{c, b, bone});
    }
  }

  // Mass properties per body from its capsules.
  for (auto& body : bodies) {
    double m = 0.0;
    Eigen::Vector3d weighted = Eigen::Vector3d::Zero();
    for (const auto& cap : body.capsules) {
      const double cm = options.density * cap.volume();
      m += cm;
      weighted += cm * cap.centroid();
    }
    body.mass = m;
    body.com = weighted / m;
    Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();
    for (const auto& cap : body.capsules) {
      const double cm = options.density * cap.volume();
      const Eigen::Vector3d d = cap.centroid() - body.com;
      inertia += cap.inertia(options.density) +
                 cm * (d.squaredNorm() * Eigen::Matrix3d::Identity() - d * d.transpose());
    }
    body.inertia = inertia;
  }

  HumanoidPhysicsModel model(std::move(bodies), std::move(leaves), nj);

  // Self-collision exclusions: parent-child pairs plus anything already
  // overlapping at the rest pose.
  std::vector<std::pair<int, int>> excl;
  const auto& bs = model.bodies();
  for (size_t i = 0; i < bs.size(); ++i) {
    for (size_t k = i + 1; k < bs.size(); ++k) {
      const bool adjacent = bs[k].parent == static_cast<int>(i) ||
                            bs[i].parent == static_cast<int>(k);
      bool overlap = false;
      if (!adjacent) {
        for (const auto& ca : bs[i].capsules) {
          for (const auto& cb : bs[k].capsules) {
            Capsule wa = ca, wb = cb;
            const Eigen::Vector3d oa = rest_positions[bs[i].skeleton_joint];
            const Eigen::Vector3d ob = rest_positions[bs[k].skeleton_joint];
            wa.p0 += oa;
            wa.p1 += oa;
            wb.p0 += ob;
            wb.p1 += ob;
            if (capsule_capsule_contact(wa, wb).has_value()) overlap = true;
          }
        }
      }
      if (adjacent || overlap) excl.emplace_back(static_cast<int>(i), static_cast<int>(k));
    }
  }
  model.exclusions_ = std::move(excl);
  return model;
}

}  // namespace mvmc
