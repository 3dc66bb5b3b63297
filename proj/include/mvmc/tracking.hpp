#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "mvmc/dynamics.hpp"
#include "mvmc/ilqr.hpp"
#include "mvmc/skeleton.hpp"

namespace mvmc {

/// Kinematic pose -> physics configuration (leaf-joint angles carry no DOFs
/// and are dropped).
Eigen::VectorXd pose_to_q(const HumanoidPhysicsModel& model, const SkeletonShape& shape,
                          const Pose& pose);
Pose q_to_pose(const HumanoidPhysicsModel& model, const SkeletonShape& shape,
               const Eigen::VectorXd& q_h);

/// Reference trajectories for the tracking objective, one entry per frame at
/// the simulation rate: stacked configurations, velocities (finite
/// differences) and tracked points (world root plus root-frame interior
/// joints per humanoid).
struct TrackingReference {
  std::vector<Eigen::VectorXd> q;
  std::vector<Eigen::VectorXd> v;
  std::vector<Eigen::VectorXd> points;
  double dt = 1.0 / 60.0;
};

/// Retargets kinematic sequences (one per humanoid) onto the model set,
/// linearly resampling when the sequence rate differs from 1/dt.
TrackingReference build_reference(const MultiHumanoidModel& sim,
                                  const std::vector<SkeletonShape>& shapes,
                                  const std::vector<PoseSequence>& sequences, double dt);

/// Tracked-point vector of a configuration: per humanoid [root world(3),
/// R_root^T (p_j - p_root) for every interior joint].
Eigen::VectorXd tracked_points(const MultiHumanoidModel& sim, const Eigen::VectorXd& q);

struct TrackingWeights {
  double w1 = 0.001;  // ||v||^2 + ||u||^2
  double w2 = 10.0;   // tracked-point error
  double w3 = 0.1;    // velocity error
  double w4 = 20.0;   // body-body penetration depth^2
};

/// iLQR state vector [q; v] over the model set. The tangent is laid out per
/// humanoid as [config tangent(nv_h), velocity(nv_h)] so humanoids outside
/// contact range form independent blocks for finite differencing.
///
/// The control is a feedforward torque around an inner posture hold: each
/// substep applies u + kp (q_ref_joints - q_joints) - kd qdot_joints against
/// the reference frame of the current step index. The hold stabilizes the
/// contact-rich plant so the optimizer works on a conditioned system; with
/// kp = kd = 0 (or no reference) the control is the raw torque.
class HumanoidTrackingSystem : public DynamicalSystem {
 public:
  HumanoidTrackingSystem(const MultiHumanoidModel& sim, double dt_frame,
                         const TrackingReference* reference = nullptr, int frame_offset = 0,
                         double hold_kp = 0.0, double hold_kd = 0.0,
                         double decouple_clearance = 0.05);

  int state_dim() const override { return sim_.nq() + sim_.nv(); }
  int tangent_dim() const override { return 2 * sim_.nv(); }
  int control_dim() const override { return sim_.nu(); }
  Eigen::VectorXd step(int t, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override;
  Eigen::VectorXd state_add(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const override;
  Eigen::VectorXd state_diff(const Eigen::VectorXd& x2,
                             const Eigen::VectorXd& x1) const override;
  std::vector<Block> independent_blocks(const Eigen::VectorXd& x) const override;

  /// Torque the plant actually receives at the beginning of step t.
  Eigen::VectorXd applied_control(int t, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) const;
  /// d(applied)/d(state tangent); zero without an active hold.
  void applied_control_jacobian(Eigen::MatrixXd& jac) const;

  Eigen::VectorXd pack(const MultiHumanoidState& s) const;
  MultiHumanoidState unpack(const Eigen::VectorXd& x) const;
  const MultiHumanoidModel& sim() const { return sim_; }
  double dt() const { return dt_; }
  double hold_kp() const { return hold_kp_; }
  double hold_kd() const { return hold_kd_; }

 private:
  Eigen::VectorXd hold_torque(int t, const MultiHumanoidState& s) const;

  const MultiHumanoidModel& sim_;
  double dt_;
  const TrackingReference* reference_;
  int frame_offset_;
  double hold_kp_, hold_kd_;
  double decouple_clearance_;
};

/// Eq.-style tracking cost: w1 (||v||^2 + ||u||^2) + w2 ||p - p_ref||^2 +
/// w3 ||v - v_ref||^2 + w4 sum d_overlap^2 over body-body contacts. Ground
/// non-penetration is the simulator's job, so ground contacts do not enter
/// the cost. Gauss-Newton quadratics with analytic point Jacobians.
class HumanoidTrackingCost : public TrajectoryCostModel {
 public:
  HumanoidTrackingCost(const HumanoidTrackingSystem& system, const TrackingReference& reference,
                       int frame_offset, TrackingWeights weights);

  double stage_cost(int t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  double final_cost(const Eigen::VectorXd& x) const override;
  Quadratics quadratics(int t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u) const override;
  Quadratics final_quadratics(const Eigen::VectorXd& x) const override;
  std::map<std::string, double> term_breakdown(
      const std::vector<Eigen::VectorXd>& states,
      const std::vector<Eigen::VectorXd>& controls) const override;

 private:
  struct Terms {
    double reg_v = 0, reg_u = 0, position = 0, velocity = 0, collision = 0;
    double total(const TrackingWeights& w) const {
      return w.w1 * (reg_v + reg_u) + w.w2 * position + w.w3 * velocity + w.w4 * collision;
    }
  };
  Terms evaluate(int t, const Eigen::VectorXd& x, const Eigen::VectorXd* u) const;
  Quadratics expand(int t, const Eigen::VectorXd& x, const Eigen::VectorXd* u) const;
  int ref_index(int t) const;

  const HumanoidTrackingSystem& system_;
  const TrackingReference& reference_;
  int frame_offset_;
  TrackingWeights weights_;
};

/// Total cost and per-term breakdown of a state/control trajectory against a
/// reference (the standalone costing surface; the optimizer uses the same
/// implementation). Throws DimensionMismatch when the reference does not
/// cover the trajectory.
std::pair<double, std::map<std::string, double>> trajectory_cost(
    const HumanoidTrackingSystem& system, const std::vector<Eigen::VectorXd>& states,
    const std::vector<Eigen::VectorXd>& controls, const TrackingReference& reference,
    const TrackingWeights& weights, int frame_offset = 0);

struct TrackingConfig {
  TrackingWeights weights;
  IlqrConfig ilqr;
  int horizon = 60;
  int overlap = 10;
  double dt = 1.0 / 60.0;
  double hold_kp = 60.0;  // inner posture-hold gains
  double hold_kd = 1.0;
  TrackingConfig() { ilqr.max_iterations = 100; }
};

struct TrackingResult {
  std::vector<MultiHumanoidState> states;  // one per reference frame
  std::vector<Eigen::VectorXd> controls;   // frames - 1
  std::vector<double> cost_trace;          // per window, concatenated
  std::map<std::string, double> final_terms;
  std::string status;
};

/// Receding-horizon trajectory refinement of kinematic sequences: windows of
/// config.horizon frames with config.overlap overlap, initial torques from
/// contact-free inverse dynamics along the reference.
TrackingResult track_sequences(const MultiHumanoidModel& sim,
                               const std::vector<SkeletonShape>& shapes,
                               const std::vector<PoseSequence>& sequences,
                               const TrackingConfig& config = {});

}  // namespace mvmc
