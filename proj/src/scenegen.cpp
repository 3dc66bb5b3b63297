#include "mvmc/scenegen.hpp"

#include <algorithm>
#include <cmath>

#include "mvmc/dynamics.hpp"
#include "mvmc/rng.hpp"

namespace mvmc {

namespace {

constexpr std::uint64_t kStreamDetection = 101;
constexpr std::uint64_t kStreamSwap = 202;

SkeletonShape scaled_skeleton(double scale) {
  auto joints = default_skeleton().joints();
  for (auto& j : joints) j.offset *= scale;
  return SkeletonShape(std::move(joints));
}

double smooth_bump(double t, double t0, double t1) {
  if (t <= t0 || t >= t1) return 0.0;
  const double u = (t - t0) / (t1 - t0);
  const double s = std::sin(M_PI * u);
  return s * s;
}

Pose standing_pose(const SkeletonShape& shape, int person, double yaw, double time,
                   double lean, const Eigen::Vector2d& position) {
  Pose p = Pose::rest(shape);
  p.root_position = Eigen::Vector3d(position.x(), position.y(), 0.88);
  p.root_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  const double phase = person * 1.3;
  const double s1 = std::sin(2.0 * M_PI * 0.9 * time + phase);
  const double s2 = std::sin(2.0 * M_PI * 1.3 * time + 0.7 + phase);
  // Guard-like upper body: shoulders swing, elbows flex, slight spine sway.
  p.joint_angles(shape.angle_offset(16) + 2) = -0.9 + 0.25 * s1;  // shoulder_l toward front
  p.joint_angles(shape.angle_offset(17) + 2) = 0.9 - 0.25 * s2;   // shoulder_r
  p.joint_angles(shape.angle_offset(16) + 0) = 0.15 * s2;
  p.joint_angles(shape.angle_offset(17) + 0) = -0.15 * s1;
  p.joint_angles(shape.angle_offset(18)) = 1.1 + 0.35 * s2;  // elbows
  p.joint_angles(shape.angle_offset(19)) = 1.1 + 0.35 * s1;
  p.joint_angles(shape.angle_offset(3) + 1) = 0.10 * s1 + lean;   // spine pitch
  p.joint_angles(shape.angle_offset(6) + 1) = 0.06 * s2 + 0.5 * lean;
  p.joint_angles(shape.angle_offset(12) + 2) = 0.2 * s2;  // neck yaw
  return p;
}

Pose walking_pose(const SkeletonShape& shape, int person, double yaw, double time,
                  const Eigen::Vector2d& start) {
  Pose p = Pose::rest(shape);
  const double speed = 0.5;  // m/s
  const double stride = 2.0 * M_PI * 1.4;
  const double ph = stride * time + person * 2.1;
  p.root_position =
      Eigen::Vector3d(start.x() + speed * time * std::cos(yaw),
                      start.y() + speed * time * std::sin(yaw), 0.88 + 0.012 * std::sin(2 * ph));
  p.root_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  const double swing = std::sin(ph);
  p.joint_angles(shape.angle_offset(1) + 1) = -0.35 * swing;  // hip pitch
  p.joint_angles(shape.angle_offset(2) + 1) = 0.35 * swing;
  p.joint_angles(shape.angle_offset(4)) = 0.35 + 0.3 * std::max(0.0, std::sin(ph + 1.2));
  p.joint_angles(shape.angle_offset(5)) = 0.35 + 0.3 * std::max(0.0, std::sin(ph + 1.2 + M_PI));
  p.joint_angles(shape.angle_offset(16) + 0) = 0.4 * swing;  // arm counter-swing
  p.joint_angles(shape.angle_offset(17) + 0) = -0.4 * swing;
  p.joint_angles(shape.angle_offset(18)) = 0.5;
  p.joint_angles(shape.angle_offset(19)) = 0.5;
  return p;
}

Pose reach_pose(const SkeletonShape& shape, double yaw, const Eigen::Vector2d& position) {
  // Static stance with both arms extended forward.
  Pose p = Pose::rest(shape);
  p.root_position = Eigen::Vector3d(position.x(), position.y(), 0.88);
  p.root_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  p.joint_angles(shape.angle_offset(16) + 2) = -M_PI / 2.0;
  p.joint_angles(shape.angle_offset(17) + 2) = M_PI / 2.0;
  return p;
}

// Distance between the two reaching persons at which the deepest cross-person
// capsule overlap equals the requested depth.
double overlap_spacing(const std::vector<SkeletonShape>& shapes, double depth) {
  MultiHumanoidModel sim({build_humanoid(shapes[0]), build_humanoid(shapes[1])});
  auto deepest = [&](double spacing) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(sim.nq());
    for (int h = 0; h < 2; ++h) {
      const Pose pose = reach_pose(shapes[h], h == 0 ? 0.0 : M_PI,
                                   Eigen::Vector2d(h == 0 ? -spacing / 2 : spacing / 2, 0));
      const auto fk_q = [&]() {
        Eigen::VectorXd out(sim.humanoid(h).nq());
        out.segment<3>(0) = pose.root_position;
        const auto quat = pose.root_orientation;
        out(3) = quat.w();
        out(4) = quat.x();
        out(5) = quat.y();
        out(6) = quat.z();
        for (size_t b = 0; b < sim.humanoid(h).bodies().size(); ++b) {
          const auto& body = sim.humanoid(h).bodies()[b];
          if (body.joint == PhysJointType::Free) continue;
          const int nd = sim.humanoid(h).body_dofs(static_cast<int>(b));
          out.segment(7 + sim.humanoid(h).angle_offset(static_cast<int>(b)), nd) =
              pose.joint_angles.segment(shapes[h].angle_offset(body.skeleton_joint), nd);
        }
        return out;
      }();
      q.segment(sim.q_offset(h), sim.humanoid(h).nq()) = fk_q;
    }
    double max_depth = 0.0;
    for (const auto& c : sim.collision_detect(q)) {
      if (c.body_b < 0) continue;
      int ha = 0, hb = 0;
      while (c.body_a >= sim.body_offset(ha + 1)) ++ha;
      while (c.body_b >= sim.body_offset(hb + 1)) ++hb;
      if (ha != hb) max_depth = std::max(max_depth, c.depth);
    }
    return max_depth;
  };
  double lo = 0.4, hi = 1.6;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deepest(mid) > depth) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::pair<SyntheticScene, ObservationSet> generate_scene(const SceneConfig& config) {
  if (config.persons < 1 || config.cameras < 2 ||
      config.frames < static_cast<int>(config.fps)) {
    throw InvalidConfig("scene needs >= 1 person, >= 2 cameras and >= 1 s of frames");
  }
  if (config.motion != "standing" && config.motion != "walking" && config.motion != "overlap") {
    throw InvalidConfig("unknown motion script: " + config.motion);
  }
  if (config.motion == "overlap" && config.persons != 2) {
    throw InvalidConfig("the overlap script is defined for exactly 2 persons");
  }

  SyntheticScene scene;
  scene.config = config;
  for (int k = 0; k < config.persons; ++k) {
    scene.shapes.push_back(scaled_skeleton(1.0 - 0.04 * (k % 2)));
  }

  // Camera ring around the action.
  Eigen::Matrix3d intr;
  intr << config.focal_px, 0, 960, 0, config.focal_px, 540, 0, 0, 1;
  for (int c = 0; c < config.cameras; ++c) {
    const double phi = 2.0 * M_PI * c / config.cameras + 0.3;
    const Eigen::Vector3d center(config.camera_radius * std::cos(phi),
                                 config.camera_radius * std::sin(phi), config.camera_height);
    const Eigen::Vector3d target(0, 0, 1.0);
    const Eigen::Vector3d z = (target - center).normalized();
    const Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ()).normalized();
    const Eigen::Vector3d y = z.cross(x).normalized();
    Eigen::Matrix3d rot;
    rot.row(0) = x;
    rot.row(1) = y;
    rot.row(2) = z;
    scene.cameras.emplace_back(c, intr, rot, -rot * center);
  }

  // Person placement: pairs face each other across x, extras ring outwards.
  std::vector<Eigen::Vector2d> positions(config.persons);
  std::vector<double> yaws(config.persons);
  double spacing = config.spacing;
  if (config.motion == "overlap") {
    spacing = overlap_spacing(scene.shapes, config.overlap_depth);
  }
  for (int k = 0; k < config.persons; ++k) {
    if (k < 2) {
      positions[k] = Eigen::Vector2d(k == 0 ? -spacing / 2 : spacing / 2, 0);
      yaws[k] = k == 0 ? 0.0 : M_PI;
    } else {
      const double phi = 2.0 * M_PI * (k - 2) / std::max(1, config.persons - 2);
      positions[k] = 1.2 * Eigen::Vector2d(std::cos(phi), std::sin(phi));
      yaws[k] = phi + M_PI;
    }
  }

  for (int k = 0; k < config.persons; ++k) {
    PoseSequence seq;
    seq.frame_rate_hz = config.fps;
    seq.person_id = k;
    for (int t = 0; t < config.frames; ++t) {
      const double time = t / config.fps;
      Pose pose;
      if (config.motion == "walking") {
        pose = walking_pose(scene.shapes[k], k, yaws[k], time, positions[k]);
      } else if (config.motion == "overlap") {
        pose = reach_pose(scene.shapes[k], yaws[k], positions[k]);
      } else {
        // Mid-sequence lean toward the opposite person.
        const double lean =
            0.22 * smooth_bump(t, 0.40 * config.frames, 0.62 * config.frames);
        pose = standing_pose(scene.shapes[k], k, yaws[k], time, lean, positions[k]);
      }
      seq.poses.push_back(pose);
    }
    scene.gt_poses.push_back(std::move(seq));
  }

  // Per-view identity-swap schedule: contiguous 5-20 frame segments.
  // swapped[v][t] = pair of persons exchanged at frame t in view v (-1: none).
  std::vector<std::vector<std::pair<int, int>>> swapped(
      config.cameras, std::vector<std::pair<int, int>>(config.frames, {-1, -1}));
  if (config.noise.swap_rate > 0.0 && config.persons >= 2) {
    for (int v = 0; v < config.cameras; ++v) {
      int active_until = -1;
      std::pair<int, int> pair{-1, -1};
      for (int t = 0; t < config.frames; ++t) {
        CounterRng rng(config.seed, kStreamSwap, v, t);
        if (t > active_until && rng.uniform() < config.noise.swap_rate) {
          const int a = static_cast<int>(rng.uniform_index(config.persons));
          int b = static_cast<int>(rng.uniform_index(config.persons - 1));
          if (b >= a) ++b;
          pair = {std::min(a, b), std::max(a, b)};
          active_until = t + 5 + static_cast<int>(rng.uniform_index(16));
        }
        if (t <= active_until) swapped[v][t] = pair;
      }
    }
  }

  ObservationSet observations;
  observations.frames.resize(config.frames);
  for (int t = 0; t < config.frames; ++t) {
    observations.frames[t].resize(config.cameras);
    for (int v = 0; v < config.cameras; ++v) {
      for (int k = 0; k < config.persons; ++k) {
        const auto fk = forward_kinematics(scene.shapes[k], scene.gt_poses[k].poses[t]);
        TrackDetections track;
        track.local_id = k;
        const auto& [sa, sb] = swapped[v][t];
        if (k == sa) track.local_id = sb;
        if (k == sb) track.local_id = sa;
        track.joints.resize(scene.shapes[k].joint_count());
        for (int j = 0; j < scene.shapes[k].joint_count(); ++j) {
          CounterRng rng(config.seed, kStreamDetection, t,
                         (static_cast<std::uint64_t>(v) << 32) ^
                             (static_cast<std::uint64_t>(k) << 16) ^ j);
          if (rng.uniform() < config.noise.dropout) continue;
          PixelPoint p = project(scene.cameras[v], fk.positions[j]);
          p.u += config.noise.pixel_sigma * rng.normal();
          p.v += config.noise.pixel_sigma * rng.normal();
          p.confidence = rng.beta_8_2();
          track.joints[j] = p;
        }
        observations.frames[t][v].push_back(track);
      }
    }
  }
  return {std::move(scene), std::move(observations)};
}

}  // namespace mvmc
