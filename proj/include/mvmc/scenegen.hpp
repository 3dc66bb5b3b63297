#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvmc/camera.hpp"
#include "mvmc/skeleton.hpp"

namespace mvmc {

struct NoiseSpec {
  double pixel_sigma = 0.0;  // isotropic detection noise, px
  double dropout = 0.0;      // per-joint missing-detection probability
  double swap_rate = 0.0;    // per-view, per-frame probability of starting an id swap
};

struct SceneConfig {
  int persons = 2;
  int cameras = 4;
  int frames = 300;
  double fps = 60.0;
  // "standing": planted feet, upper-body guard motion with a lean-in segment.
  // "walking": sinusoidal gait advancing along +x.
  // "overlap": static close stance with sustained forearm interpenetration.
  std::string motion = "standing";
  double spacing = 0.8;        // distance between the two center persons, m
  double overlap_depth = 0.02; // target sustained penetration for "overlap", m
  double camera_radius = 4.0;
  double camera_height = 1.7;
  double focal_px = 1100.0;
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  std::vector<SkeletonShape> shapes;
  std::vector<PoseSequence> gt_poses;
  std::vector<CameraParams> cameras;
  SceneConfig config;
};

/// Per-view tracked detections of one person. The local id is the view's
/// track label and is subject to injected identity swaps.
struct TrackDetections {
  int local_id = 0;
  std::vector<std::optional<PixelPoint>> joints;
};

/// observations[frame][view] is the list of tracks seen in that view.
struct ObservationSet {
  std::vector<std::vector<std::vector<TrackDetections>>> frames;
};

/// Scripted ground truth plus corrupted detections. Deterministic in
/// (seed, config): all randomness is counter-based per (frame, view, person,
/// joint), so any evaluation order reproduces the same scene. Throws
/// InvalidConfig.
std::pair<SyntheticScene, ObservationSet> generate_scene(const SceneConfig& config);

}  // namespace mvmc
