#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvmc/camera.hpp"
#include "mvmc/humanoid.hpp"
#include "mvmc/metrics.hpp"
#include "mvmc/scenegen.hpp"
#include "mvmc/skeleton.hpp"
#include "mvmc/triangulation.hpp"

namespace mvmc {

// Calibration: JSON array of {id, K (9 row-major), R (9 row-major), t (3)}.
void save_calibration(const std::string& path, const std::vector<CameraParams>& cameras);
std::vector<CameraParams> load_calibration(const std::string& path);

// Detections: CSV frame,view,person,joint,u,v,conf.
void save_detections(const std::string& path, const ObservationSet& observations);
ObservationSet load_detections(const std::string& path);

// Triangulated trajectories: CSV frame,person,joint,x,y,z,confidence.
// Keyed per person; absent frames omitted.
using PersonTrajectories = std::map<int, std::vector<JointTrajectory>>;
void save_trajectories(const std::string& path, const PersonTrajectories& trajectories);
PersonTrajectories load_trajectories(const std::string& path, double frame_rate_hz);

// Skeleton: JSON {joints: [{name, parent, offset, dof, limits}]}.
void save_skeleton(const std::string& path, const SkeletonShape& shape);
SkeletonShape load_skeleton(const std::string& path);

// Pose sequences: CSV frame,person,root_x..z,qw,qx,qy,qz,angle_0..angle_K.
void save_pose_sequences(const std::string& path, const std::vector<PoseSequence>& sequences);
std::vector<PoseSequence> load_pose_sequences(const std::string& path, double frame_rate_hz);

// Physics model: JSON mirror of HumanoidPhysicsModel.
void save_physics_model(const std::string& path, const HumanoidPhysicsModel& model);

// Joint position sequences: CSV frame,person,joint,x,y,z (for evaluation and plots).
void save_joint_sequences(const std::string& path, const std::vector<JointSequence>& per_person);
std::vector<JointSequence> load_joint_sequences(const std::string& path);

// Dynamics result: CSV t,q...,v...,u...,cost terms.
struct DynamicsRecord {
  double time = 0.0;
  Eigen::VectorXd q, v, u;
  std::map<std::string, double> costs;
};
void save_dynamics_result(const std::string& path, const std::vector<DynamicsRecord>& records);

// Metrics: JSON object and an aligned plain-text table over named stages.
void save_metrics_json(const std::string& path,
                       const std::map<std::string, MetricsReport>& by_stage);
void save_metrics_table(const std::string& path,
                        const std::map<std::string, MetricsReport>& by_stage);

}  // namespace mvmc
