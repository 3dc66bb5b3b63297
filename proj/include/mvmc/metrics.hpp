#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mvmc/dynamics.hpp"
#include "mvmc/skeleton.hpp"

namespace mvmc {

/// World joint positions, [frame][joint].
using JointSequence = std::vector<std::vector<Eigen::Vector3d>>;

struct Limb {
  Eigen::Vector3d a, b;
};

/// Percentage of correctly estimated parts: a limb counts when both predicted
/// endpoints lie within threshold_ratio times the true limb length of their
/// ground-truth positions. Throws EmptyLimbSet.
double pcp(const std::vector<Limb>& predicted, const std::vector<Limb>& ground_truth,
           double threshold_ratio = 0.5);

/// Limbs of a skeleton at given joint positions (one per tree edge).
std::vector<Limb> limbs_from_joints(const SkeletonShape& shape,
                                    const std::vector<Eigen::Vector3d>& joints);

/// Mean per-joint position error in millimeters.
double mpjpe_mm(const JointSequence& predicted, const JointSequence& ground_truth);

/// MPJPE after per-frame similarity (Procrustes) alignment.
double pa_mpjpe_mm(const JointSequence& predicted, const JointSequence& ground_truth);

struct PhysicsMetrics {
  double foot_z_mm = 0.0;              // mean max(0, -z) over foot joints
  double ground_penetration_mm = 0.0;  // same quantity, reported under both names
  double skating_mm_per_frame = 0.0;   // horizontal foot speed during contact
  double smoothness_mm_per_frame2 = 0.0;  // mean second-difference magnitude
  double penetration_mm = 0.0;         // mean over frames of max cross-person overlap
};

struct FootMetricConfig {
  std::vector<int> foot_joints = {7, 8, 10, 11};  // ankles and toes of the default tree
  double contact_threshold = 0.005;               // m
};

/// Physical-plausibility metrics of per-person joint trajectories. When a
/// model set and per-frame configurations are supplied, cross-person capsule
/// penetration is measured as well. Throws TooShort for < 3 frames.
PhysicsMetrics physics_metrics(const std::vector<JointSequence>& per_person,
                               const FootMetricConfig& feet = {},
                               const MultiHumanoidModel* sim = nullptr,
                               const std::vector<Eigen::VectorXd>* configurations = nullptr);

struct MetricsReport {
  std::vector<double> pcp_per_actor;
  double pcp_avg = 0.0;
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  PhysicsMetrics physics;
};

/// Full report for aligned per-person predictions against ground truth.
MetricsReport evaluate_poses(const SkeletonShape& shape,
                             const std::vector<JointSequence>& predicted,
                             const std::vector<JointSequence>& ground_truth,
                             const FootMetricConfig& feet = {},
                             const MultiHumanoidModel* sim = nullptr,
                             const std::vector<Eigen::VectorXd>* configurations = nullptr);

}  // namespace mvmc
