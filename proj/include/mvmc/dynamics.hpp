#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mvmc/humanoid.hpp"

namespace mvmc {

/// Combined minimal-coordinate state of all humanoids.
/// Per humanoid, q = [root xyz, root quat wxyz, joint angles] and
/// v = [root linear velocity (world), root angular velocity (world), rates].
struct MultiHumanoidState {
  Eigen::VectorXd q;
  Eigen::VectorXd v;
  double time = 0.0;
};

/// Stacked joint torques over the actuated DOFs (roots are unactuated).
struct Control {
  Eigen::VectorXd u;
};

/// One detected overlap. body_b = -1 for ground contacts. The normal points
/// into body_a: the force applied to body_a acts along +normal.
struct Contact {
  int body_a = 0;
  int body_b = -1;
  double depth = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};
using ContactSet = std::vector<Contact>;

struct ContactForce {
  Contact contact;
  Eigen::Vector3d normal_force = Eigen::Vector3d::Zero();    // on body_a
  Eigen::Vector3d friction_force = Eigen::Vector3d::Zero();  // on body_a
};

struct SimulationParams {
  double gravity = 9.81;            // along -z
  double contact_stiffness = 2e4;   // N/m
  double contact_damping = 200.0;   // N s/m
  double friction = 1.0;            // Coulomb cone
  double friction_vel_eps = 1e-3;   // m/s, regularization of the sliding direction
  double joint_damping = 0.1;       // N m s/rad on interior joints
  double armature = 0.01;           // kg m^2 reflected inertia per joint DOF
  int substeps = 4;                 // internal Euler substeps per frame step
  bool cross_person_contacts = true;
  bool ground = true;
};

/// The multi-humanoid simulator: recursive Newton-Euler dynamics per humanoid
/// (humanoids couple only through contact forces), penalty ground and
/// body-body contacts with a regularized Coulomb cone, semi-implicit Euler
/// integration. Deterministic: no allocation-order or time dependence.
class MultiHumanoidModel {
 public:
  MultiHumanoidModel(std::vector<HumanoidPhysicsModel> humanoids, SimulationParams params = {});

  int count() const { return static_cast<int>(humanoids_.size()); }
  const HumanoidPhysicsModel& humanoid(int h) const { return humanoids_[h]; }
  const SimulationParams& params() const { return params_; }
  SimulationParams& params() { return params_; }

  int nq() const { return nq_; }
  int nv() const { return nv_; }
  int nu() const { return nu_; }
  int q_offset(int h) const { return q_off_[h]; }
  int v_offset(int h) const { return v_off_[h]; }
  int u_offset(int h) const { return u_off_[h]; }
  int body_offset(int h) const { return body_off_[h]; }
  int total_bodies() const { return body_off_.back(); }

  /// State with every humanoid at its rest pose, roots at the given
  /// positions, zero velocity.
  MultiHumanoidState default_state(const std::vector<Eigen::Vector3d>& root_positions) const;

  /// One semi-implicit Euler step of length dt (dt = 0 is a no-op). Throws
  /// NonFiniteState naming the first bad coordinate.
  MultiHumanoidState step(const MultiHumanoidState& x, const Control& u, double dt) const;

  /// Frame-level step: params().substeps Euler substeps under a zero-order
  /// hold on u. This is the map the trajectory optimizer differentiates.
  MultiHumanoidState step_frame(const MultiHumanoidState& x, const Control& u,
                                double dt_frame) const;

  /// All capsule-capsule and capsule-ground overlaps at configuration q,
  /// self-collision exclusions applied, ordered by (body_a, body_b).
  ContactSet collision_detect(const Eigen::VectorXd& q) const;

  /// Penalty and friction forces at the given state (diagnostic surface for
  /// the cone and non-negativity checks).
  std::vector<ContactForce> contact_forces(const MultiHumanoidState& x) const;

  /// World positions of every skeleton joint, per humanoid.
  std::vector<std::vector<Eigen::Vector3d>> joint_positions(const Eigen::VectorXd& q) const;

  /// World-space capsules of one humanoid with their global body indices.
  std::vector<std::pair<int, Capsule>> world_capsules(const Eigen::VectorXd& q, int h) const;

  double kinetic_energy(const MultiHumanoidState& x) const;
  Eigen::Vector3d linear_momentum(const MultiHumanoidState& x, int h) const;

  /// Positions of humanoid h's skeleton joints plus their kinematic
  /// Jacobians w.r.t. the humanoid's velocity coordinates.
  struct JointJacobians {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Matrix3Xd> jacobians;  // 3 x nv(h)
  };
  JointJacobians joint_position_jacobians(const Eigen::VectorXd& q, int h) const;

  /// Depth and configuration-tangent gradient of every body-body overlap
  /// (ground contacts excluded), for penetration costs.
  struct DepthGradient {
    double depth = 0.0;
    Eigen::VectorXd grad;  // nv total
    int body_a = 0, body_b = 0;
  };
  std::vector<DepthGradient> body_contact_depth_gradients(const Eigen::VectorXd& q) const;

  /// Smallest surface clearance between different humanoids (+inf for a
  /// single humanoid or when every pair overlaps are disabled).
  double cross_person_clearance(const Eigen::VectorXd& q) const;

  /// Inverse dynamics for one humanoid: generalized forces required to
  /// realize acceleration vdot at (q, v) under gravity, without contacts.
  /// Rows 0..5 are the root wrench; the rest are joint torques.
  Eigen::VectorXd inverse_dynamics(int h, const Eigen::VectorXd& q_h, const Eigen::VectorXd& v_h,
                                   const Eigen::VectorXd& vdot_h) const;

 private:
  struct Link {
    int parent = -1;
    int body = -1;      // model body index when this link carries mass/geometry
    int q_index = -1;   // angle index within the humanoid (revolute links)
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
    double mass = 0.0;
    Eigen::Vector3d com = Eigen::Vector3d::Zero();
    Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();
  };
  struct LinkState {
    Eigen::Matrix3d rot;
    Eigen::Vector3d origin;
    Eigen::Vector3d omega;
    Eigen::Vector3d vel;
    Eigen::Vector3d axis_w;
  };

  void forward_kinematics_links(int h, const Eigen::VectorXd& q, const Eigen::VectorXd* v,
                                std::vector<LinkState>& ls) const;
  Eigen::VectorXd rnea(int h, const std::vector<LinkState>& ls, const Eigen::VectorXd& qdd,
                       const std::vector<Eigen::Vector3d>& ext_force,
                       const std::vector<Eigen::Vector3d>& ext_torque, double gravity) const;
  Eigen::MatrixXd mass_matrix(int h, const std::vector<LinkState>& ls) const;
  void accumulate_contact_forces(const MultiHumanoidState& x,
                                 const std::vector<std::vector<LinkState>>& ls,
                                 std::vector<Eigen::Vector3d>& force,
                                 std::vector<Eigen::Vector3d>& torque,
                                 std::vector<ContactForce>* record) const;

  std::vector<HumanoidPhysicsModel> humanoids_;
  SimulationParams params_;
  std::vector<std::vector<Link>> links_;          // per humanoid
  std::vector<std::vector<int>> body_link_;       // model body -> carrying link
  std::vector<int> q_off_, v_off_, u_off_, body_off_;
  int nq_ = 0, nv_ = 0, nu_ = 0;
};

}  // namespace mvmc
