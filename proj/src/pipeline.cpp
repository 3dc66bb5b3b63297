#include "mvmc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>

#include "mvmc/hungarian.hpp"
#include "mvmc/io.hpp"
#include "mvmc/parallel.hpp"

namespace mvmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string path_in(const PipelineConfig& config, const std::string& name) {
  return (fs::path(config.work_dir) / name).string();
}

void require_input(const PipelineConfig& config, const std::string& name) {
  if (!fs::exists(path_in(config, name))) {
    throw MissingInput(path_in(config, name));
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class StageScope {
 public:
  StageScope(const PipelineConfig& config, const std::string& stage)
      : config_(config), stage_(stage), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(config.work_dir);
    if (config.verbose) std::cerr << "[" << stage << "] start\n";
    set_worker_count(config.workers);
  }
  ~StageScope() {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    // Deterministic manifest: config hash, seed, version.
    json manifest{{"stage", stage_},
                  {"seed", config_.seed},
                  {"version", "0.1.0"},
                  {"config_hash", fnv1a(pipeline_config_to_toml(config_).serialize())}};
    std::ofstream(path_in(config_, stage_ + "_manifest.json")) << manifest.dump(2) << "\n";
    // Timing lives in a separate file so primary artifacts stay byte-stable.
    json runinfo{{"stage", stage_}, {"wall_time_s", wall}};
    std::ofstream(path_in(config_, stage_ + "_runinfo.json")) << runinfo.dump(2) << "\n";
    if (config_.verbose) std::cerr << "[" << stage_ << "] done in " << wall << " s\n";
  }

 private:
  const PipelineConfig& config_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

double scene_fps(const PipelineConfig& config) {
  const std::string manifest = path_in(config, "manifest.toml");
  if (fs::exists(manifest)) {
    return TomlTable::load(manifest).get_double("scene", "fps", config.scene.fps);
  }
  return config.scene.fps;
}

int scene_person_count(const PipelineConfig& config) {
  const std::string manifest = path_in(config, "manifest.toml");
  if (fs::exists(manifest)) {
    return static_cast<int>(
        TomlTable::load(manifest).get_int("scene", "persons", config.scene.persons));
  }
  return config.scene.persons;
}

}  // namespace

void stage_generate(const PipelineConfig& config) {
  StageScope scope(config, "generate");
  SceneConfig scene_config = config.scene;
  scene_config.seed = config.seed;
  const auto [scene, observations] = generate_scene(scene_config);

  save_calibration(path_in(config, "calibration.json"), scene.cameras);
  save_detections(path_in(config, "detections.csv"), observations);
  save_pose_sequences(path_in(config, "gt_poses.csv"), scene.gt_poses);
  std::vector<JointSequence> gt_joints(scene.shapes.size());
  for (size_t k = 0; k < scene.shapes.size(); ++k) {
    save_skeleton(path_in(config, "gt_skeleton_" + std::to_string(k) + ".json"),
                  scene.shapes[k]);
    for (const auto& pose : scene.gt_poses[k].poses) {
      gt_joints[k].push_back(forward_kinematics(scene.shapes[k], pose).positions);
    }
  }
  save_joint_sequences(path_in(config, "gt_joints.csv"), gt_joints);

  TomlTable manifest;
  manifest.set("scene", "seed", static_cast<std::int64_t>(scene_config.seed));
  manifest.set("scene", "persons", static_cast<std::int64_t>(scene_config.persons));
  manifest.set("scene", "cameras", static_cast<std::int64_t>(scene_config.cameras));
  manifest.set("scene", "frames", static_cast<std::int64_t>(scene_config.frames));
  manifest.set("scene", "fps", scene_config.fps);
  manifest.set("scene", "motion", scene_config.motion);
  manifest.set("noise", "pixel_sigma", scene_config.noise.pixel_sigma);
  manifest.set("noise", "dropout", scene_config.noise.dropout);
  manifest.set("noise", "swap_rate", scene_config.noise.swap_rate);
  manifest.save(path_in(config, "manifest.toml"));
}

void stage_associate(const PipelineConfig& config) {
  StageScope scope(config, "associate");
  require_input(config, "calibration.json");
  require_input(config, "detections.csv");
  const auto cameras = load_calibration(path_in(config, "calibration.json"));
  const auto observations = load_detections(path_in(config, "detections.csv"));

  // Track centroids per frame/view feed the per-frame association; the
  // sequence wrapper rides out injected identity swaps.
  std::vector<std::vector<std::vector<ViewTrack>>> frames(observations.frames.size());
  for (size_t t = 0; t < observations.frames.size(); ++t) {
    frames[t].resize(observations.frames[t].size());
    for (size_t v = 0; v < observations.frames[t].size(); ++v) {
      for (const auto& track : observations.frames[t][v]) {
        double u = 0, w = 0, conf = 0;
        int n = 0;
        for (const auto& j : track.joints) {
          if (!j.has_value()) continue;
          u += j->u;
          w += j->v;
          conf += j->confidence;
          ++n;
        }
        if (n == 0) continue;
        frames[t][v].push_back(
            ViewTrack{track.local_id, PixelPoint{u / n, w / n, conf / n}});
      }
    }
  }
  const auto association = associate_sequence(frames, cameras, config.association);

  // Keep the persistent identities (transient fragments can appear around
  // id-swap boundaries), then rewrite detections with dense canonical ids.
  std::map<int, int> weight;
  for (size_t t = 0; t < observations.frames.size(); ++t) {
    for (size_t v = 0; v < observations.frames[t].size(); ++v) {
      for (const auto& track : observations.frames[t][v]) {
        const auto& mapping = association[t].view_local_to_global[v];
        const auto it = mapping.find(track.local_id);
        if (it != mapping.end()) ++weight[it->second];
      }
    }
  }
  std::vector<std::pair<int, int>> ranked;  // (-count, id)
  for (const auto& [id, count] : weight) ranked.emplace_back(-count, id);
  std::sort(ranked.begin(), ranked.end());
  const int keep = std::min<int>(scene_person_count(config), static_cast<int>(ranked.size()));
  std::map<int, int> dense;
  for (int k = 0; k < keep; ++k) dense[ranked[k].second] = k;

  ObservationSet out;
  out.frames.resize(observations.frames.size());
  for (size_t t = 0; t < observations.frames.size(); ++t) {
    out.frames[t].resize(observations.frames[t].size());
    for (size_t v = 0; v < observations.frames[t].size(); ++v) {
      for (const auto& track : observations.frames[t][v]) {
        const auto& mapping = association[t].view_local_to_global[v];
        const auto it = mapping.find(track.local_id);
        if (it == mapping.end() || !dense.count(it->second)) continue;
        TrackDetections renamed = track;
        renamed.local_id = dense[it->second];
        out.frames[t][v].push_back(std::move(renamed));
      }
    }
  }
  save_detections(path_in(config, "detections_assoc.csv"), out);
}

void stage_triangulate(const PipelineConfig& config) {
  StageScope scope(config, "triangulate");
  require_input(config, "calibration.json");
  require_input(config, "detections_assoc.csv");
  const auto cameras = load_calibration(path_in(config, "calibration.json"));
  const auto observations = load_detections(path_in(config, "detections_assoc.csv"));
  const double fps = scene_fps(config);

  const int frames = static_cast<int>(observations.frames.size());
  int persons = 0, joints = 0;
  for (const auto& frame : observations.frames) {
    for (const auto& view : frame) {
      for (const auto& track : view) {
        persons = std::max(persons, track.local_id + 1);
        joints = std::max(joints, static_cast<int>(track.joints.size()));
      }
    }
  }

  PersonTrajectories result;
  for (int k = 0; k < persons; ++k) {
    result[k].resize(joints);
    for (int j = 0; j < joints; ++j) {
      result[k][j].joint_id = j;
      result[k][j].frame_rate_hz = fps;
      result[k][j].frames.resize(frames);
    }
  }

  std::vector<std::tuple<int, int>> work;
  for (int k = 0; k < persons; ++k) {
    for (int j = 0; j < joints; ++j) work.emplace_back(k, j);
  }
  parallel_for(static_cast<int>(work.size()), [&](int w) {
    const auto [k, j] = work[w];
    auto& traj = result[k][j];
    for (int t = 0; t < frames; ++t) {
      std::vector<WeightedObservation> obs;
      for (size_t v = 0; v < observations.frames[t].size(); ++v) {
        for (const auto& track : observations.frames[t][v]) {
          if (track.local_id != k || j >= static_cast<int>(track.joints.size())) continue;
          if (track.joints[j].has_value()) {
            obs.push_back(WeightedObservation{static_cast<int>(v), *track.joints[j]});
          }
        }
      }
      if (obs.size() < 2) continue;
      try {
        traj.frames[t] = triangulate_weighted(obs, cameras);
      } catch (const Error&) {
        // degenerate or behind-camera: leave the gap for the filters
      }
    }
    traj = filter_trajectory(traj, config.filter);
  });
  save_trajectories(path_in(config, "triangulated.csv"), result);
}

void stage_kinfit(const PipelineConfig& config) {
  StageScope scope(config, "kinfit");
  require_input(config, "calibration.json");
  require_input(config, "detections_assoc.csv");
  require_input(config, "triangulated.csv");
  const auto cameras = load_calibration(path_in(config, "calibration.json"));
  const auto observations = load_detections(path_in(config, "detections_assoc.csv"));
  const double fps = scene_fps(config);
  const auto trajectories = load_trajectories(path_in(config, "triangulated.csv"), fps);

  const SkeletonShape tree = default_skeleton();
  std::vector<PoseSequence> fitted;
  std::vector<JointSequence> fitted_joints;
  std::vector<double> traces;

  for (const auto& [person, joints] : trajectories) {
    const int frames = joints.empty() ? 0 : static_cast<int>(joints[0].frames.size());
    // Shape from median limb lengths over fully observed frames.
    std::vector<std::vector<Eigen::Vector3d>> complete;
    SequenceTargets targets(frames);
    for (int t = 0; t < frames; ++t) {
      targets[t].joints.resize(tree.joint_count());
      std::vector<Eigen::Vector3d> frame_positions(tree.joint_count());
      bool full = joints.size() >= static_cast<size_t>(tree.joint_count());
      for (int j = 0; j < tree.joint_count(); ++j) {
        if (j < static_cast<int>(joints.size()) && joints[j].frames[t].has_value()) {
          targets[t].joints[j] = joints[j].frames[t];
          frame_positions[j] = joints[j].frames[t]->position;
        } else {
          full = false;
        }
      }
      if (full) complete.push_back(std::move(frame_positions));
    }
    if (static_cast<int>(complete.size()) < 10) {
      if (config.verbose) {
        std::cerr << "[kinfit] skipping person " << person << ": only " << complete.size()
                  << " complete frames\n";
      }
      continue;
    }
    const SkeletonShape shape = fit_shape(tree, complete);

    SequenceDetections detections(frames);
    for (int t = 0; t < frames; ++t) {
      detections[t].by_view.resize(cameras.size());
      for (size_t v = 0; v < cameras.size(); ++v) {
        detections[t].by_view[v].resize(tree.joint_count());
        for (const auto& track : observations.frames[t][v]) {
          if (track.local_id != person) continue;
          for (int j = 0;
               j < tree.joint_count() && j < static_cast<int>(track.joints.size()); ++j) {
            detections[t].by_view[v][j] = track.joints[j];
          }
        }
      }
    }

    const PoseSequence init = initialize_sequence(shape, targets, fps, person);
    const KinfitResult result =
        optimize_sequence(shape, init, detections, targets, cameras, config.kinfit);
    save_skeleton(path_in(config, "skeleton_" + std::to_string(person) + ".json"), shape);

    JointSequence joints_out;
    for (const auto& pose : result.sequence.poses) {
      joints_out.push_back(forward_kinematics(shape, pose).positions);
    }
    fitted.push_back(result.sequence);
    fitted_joints.push_back(std::move(joints_out));
    if (traces.empty() || result.cost_trace.size() > traces.size()) traces = result.cost_trace;
  }

  save_pose_sequences(path_in(config, "poses_kinfit.csv"), fitted);
  save_joint_sequences(path_in(config, "joints_kinfit.csv"), fitted_joints);
  std::ofstream trace_out(path_in(config, "cost_trace_kinfit.csv"));
  trace_out << "iteration,cost\n";
  for (size_t i = 0; i < traces.size(); ++i) {
    trace_out << i << "," << format_double(traces[i]) << "\n";
  }
}

void stage_dynamics(const PipelineConfig& config) {
  StageScope scope(config, "dynamics");
  require_input(config, "poses_kinfit.csv");
  const double fps = scene_fps(config);
  const auto sequences = load_pose_sequences(path_in(config, "poses_kinfit.csv"), fps);

  std::vector<SkeletonShape> shapes;
  std::vector<HumanoidPhysicsModel> models;
  for (size_t k = 0; k < sequences.size(); ++k) {
    require_input(config, "skeleton_" + std::to_string(k) + ".json");
    shapes.push_back(load_skeleton(path_in(config, "skeleton_" + std::to_string(k) + ".json")));
    models.push_back(build_humanoid(shapes.back()));
    save_physics_model(path_in(config, "physics_model_" + std::to_string(k) + ".json"),
                       models.back());
  }
  MultiHumanoidModel sim(std::move(models), config.simulation);
  const TrackingResult result = track_sequences(sim, shapes, sequences, config.tracking);

  // Per-frame record with q, v, u and the cost-term breakdown.
  HumanoidTrackingSystem system(sim, config.tracking.dt);
  std::vector<DynamicsRecord> records;
  const TrackingReference reference =
      build_reference(sim, shapes, sequences, config.tracking.dt);
  HumanoidTrackingSystem holder(sim, config.tracking.dt, &reference, 0,
                                config.tracking.hold_kp, config.tracking.hold_kd);
  for (size_t t = 0; t < result.states.size(); ++t) {
    DynamicsRecord rec;
    rec.time = result.states[t].time;
    rec.q = result.states[t].q;
    rec.v = result.states[t].v;
    rec.u = t < result.controls.size()
                ? holder.applied_control(static_cast<int>(t), holder.pack(result.states[t]),
                                         result.controls[t])
                : Eigen::VectorXd::Zero(sim.nu());
    records.push_back(std::move(rec));
  }
  save_dynamics_result(path_in(config, "dynamics_result.csv"), records);

  // Joint positions and pose-format output for evaluation.
  std::vector<JointSequence> joints_out(sim.count());
  std::vector<PoseSequence> poses_out(sim.count());
  for (int h = 0; h < sim.count(); ++h) {
    poses_out[h].frame_rate_hz = 1.0 / config.tracking.dt;
    poses_out[h].person_id = sequences[h].person_id;
  }
  for (const auto& state : result.states) {
    const auto joints = sim.joint_positions(state.q);
    for (int h = 0; h < sim.count(); ++h) {
      joints_out[h].push_back(joints[h]);
      poses_out[h].poses.push_back(
          q_to_pose(sim.humanoid(h), shapes[h],
                    state.q.segment(sim.q_offset(h), sim.humanoid(h).nq())));
    }
  }
  save_joint_sequences(path_in(config, "joints_dynamics.csv"), joints_out);
  save_pose_sequences(path_in(config, "poses_dynamics.csv"), poses_out);

  std::ofstream trace_out(path_in(config, "cost_trace_dynamics.csv"));
  trace_out << "iteration,cost\n";
  for (size_t i = 0; i < result.cost_trace.size(); ++i) {
    trace_out << i << "," << format_double(result.cost_trace[i]) << "\n";
  }
}

namespace {

// Persons are matched to ground-truth identities by total joint distance.
std::vector<int> align_persons(const std::vector<JointSequence>& predicted,
                               const std::vector<JointSequence>& gt) {
  const int n = static_cast<int>(std::min(predicted.size(), gt.size()));
  Eigen::MatrixXd cost(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      double sum = 0.0;
      const size_t frames = std::min(predicted[a].size(), gt[b].size());
      for (size_t t = 0; t < frames; t += 10) {
        const size_t joints = std::min(predicted[a][t].size(), gt[b][t].size());
        for (size_t j = 0; j < joints; ++j) sum += (predicted[a][t][j] - gt[b][t][j]).norm();
      }
      cost(a, b) = sum;
    }
  }
  return solve_assignment(cost).row_to_col;
}

std::vector<JointSequence> truncate_to(const std::vector<JointSequence>& seqs, size_t frames) {
  std::vector<JointSequence> out = seqs;
  for (auto& s : out) {
    if (s.size() > frames) s.resize(frames);
  }
  return out;
}

}  // namespace

void stage_evaluate(const PipelineConfig& config) {
  StageScope scope(config, "evaluate");
  require_input(config, "gt_joints.csv");
  const auto gt = load_joint_sequences(path_in(config, "gt_joints.csv"));
  const SkeletonShape tree = default_skeleton();

  std::map<std::string, MetricsReport> by_stage;
  for (const std::string stage : {"kinfit", "dynamics"}) {
    const std::string file = "joints_" + stage + ".csv";
    if (!fs::exists(path_in(config, file))) continue;
    auto predicted = load_joint_sequences(path_in(config, file));
    const size_t frames = std::min(predicted.empty() ? 0 : predicted[0].size(),
                                   gt.empty() ? 0 : gt[0].size());
    predicted = truncate_to(predicted, frames);
    const auto gt_cut = truncate_to(gt, frames);
    const auto order = align_persons(predicted, gt_cut);
    std::vector<JointSequence> aligned(gt_cut.size());
    for (size_t a = 0; a < order.size(); ++a) {
      if (order[a] >= 0) aligned[order[a]] = predicted[a];
    }

    // Cross-person penetration needs the physics models and configurations.
    std::unique_ptr<MultiHumanoidModel> sim;
    std::vector<Eigen::VectorXd> qs;
    const std::string pose_file =
        stage == "dynamics" ? "poses_dynamics.csv" : "poses_kinfit.csv";
    if (fs::exists(path_in(config, pose_file)) &&
        fs::exists(path_in(config, "skeleton_0.json"))) {
      const auto poses = load_pose_sequences(path_in(config, pose_file), scene_fps(config));
      std::vector<SkeletonShape> shapes;
      std::vector<HumanoidPhysicsModel> models;
      for (size_t k = 0; k < poses.size(); ++k) {
        shapes.push_back(
            load_skeleton(path_in(config, "skeleton_" + std::to_string(k) + ".json")));
        models.push_back(build_humanoid(shapes.back()));
      }
      if (poses.size() >= 2) {
        sim = std::make_unique<MultiHumanoidModel>(std::move(models), config.simulation);
        for (size_t t = 0; t < frames; ++t) {
          Eigen::VectorXd q(sim->nq());
          for (size_t k = 0; k < poses.size(); ++k) {
            q.segment(sim->q_offset(static_cast<int>(k)),
                      sim->humanoid(static_cast<int>(k)).nq()) =
                pose_to_q(sim->humanoid(static_cast<int>(k)), shapes[k],
                          poses[k].poses[std::min(t, poses[k].poses.size() - 1)]);
          }
          qs.push_back(std::move(q));
        }
      }
    }
    by_stage[stage] =
        evaluate_poses(tree, aligned, gt_cut, config.feet, sim.get(), sim ? &qs : nullptr);
  }

  // Triangulation row: masked PCP / MPJPE over present joints only.
  if (fs::exists(path_in(config, "triangulated.csv"))) {
    const auto trajectories =
        load_trajectories(path_in(config, "triangulated.csv"), scene_fps(config));
    MetricsReport tri;
    double err_sum = 0.0;
    int err_count = 0;
    int limb_total = 0, limb_ok = 0;
    std::vector<JointSequence> tri_joints;
    for (const auto& [person, joints] : trajectories) {
      if (person >= static_cast<int>(gt.size())) continue;
      JointSequence seq;
      const int frames = joints.empty() ? 0 : static_cast<int>(joints[0].frames.size());
      for (int t = 0; t < frames && t < static_cast<int>(gt[person].size()); ++t) {
        std::vector<Eigen::Vector3d> frame(tree.joint_count(), Eigen::Vector3d::Zero());
        for (int j = 0; j < tree.joint_count() && j < static_cast<int>(joints.size()); ++j) {
          if (!joints[j].frames[t].has_value()) continue;
          frame[j] = joints[j].frames[t]->position;
          err_sum += (frame[j] - gt[person][t][j]).norm();
          ++err_count;
        }
        for (int j = 1; j < tree.joint_count(); ++j) {
          const int p = tree.joint(j).parent;
          if (!joints[j].frames[t].has_value() || !joints[p].frames[t].has_value()) continue;
          ++limb_total;
          const double len = (gt[person][t][j] - gt[person][t][p]).norm();
          if ((frame[j] - gt[person][t][j]).norm() <= 0.5 * len &&
              (frame[p] - gt[person][t][p]).norm() <= 0.5 * len) {
            ++limb_ok;
          }
        }
      }
    }
    tri.mpjpe_mm = err_count > 0 ? 1000.0 * err_sum / err_count : 0.0;
    tri.pcp_avg = limb_total > 0 ? 100.0 * limb_ok / limb_total : 0.0;
    by_stage["triangulation"] = tri;
  }

  save_metrics_json(path_in(config, "metrics.json"), by_stage);
  save_metrics_table(path_in(config, "metrics.txt"), by_stage);
}

void stage_plot(const PipelineConfig& config) {
  StageScope scope(config, "plot");
  fs::create_directories(path_in(config, "plots"));
  // Per-joint trajectory data: frame,person,joint,x,y,z per available stage.
  for (const std::string stage : {"gt", "kinfit", "dynamics"}) {
    const std::string src = stage == "gt" ? "gt_joints.csv" : "joints_" + stage + ".csv";
    if (fs::exists(path_in(config, src))) {
      fs::copy_file(path_in(config, src),
                    path_in(config, "plots/trajectories_" + stage + ".csv"),
                    fs::copy_options::overwrite_existing);
    }
  }
  // Cost traces: iteration,cost.
  for (const std::string stage : {"kinfit", "dynamics"}) {
    const std::string src = "cost_trace_" + stage + ".csv";
    if (fs::exists(path_in(config, src))) {
      fs::copy_file(path_in(config, src), path_in(config, "plots/" + src),
                    fs::copy_options::overwrite_existing);
    }
  }
}

void run_pipeline(const PipelineConfig& config) {
  stage_generate(config);
  stage_associate(config);
  stage_triangulate(config);
  stage_kinfit(config);
  stage_dynamics(config);
  stage_evaluate(config);
  stage_plot(config);
}

PipelineConfig pipeline_config_from_toml(const TomlTable& t) {
  PipelineConfig c;
  c.work_dir = t.get_string("run", "work_dir", c.work_dir);
  c.seed = static_cast<std::uint64_t>(t.get_int("run", "seed", 0));
  c.workers = static_cast<int>(t.get_int("run", "workers", 0));
  c.verbose = t.get_bool("run", "verbose", false);

  c.scene.persons = static_cast<int>(t.get_int("scene", "persons", c.scene.persons));
  c.scene.cameras = static_cast<int>(t.get_int("scene", "cameras", c.scene.cameras));
  c.scene.frames = static_cast<int>(t.get_int("scene", "frames", c.scene.frames));
  c.scene.fps = t.get_double("scene", "fps", c.scene.fps);
  c.scene.motion = t.get_string("scene", "motion", c.scene.motion);
  c.scene.spacing = t.get_double("scene", "spacing", c.scene.spacing);
  c.scene.overlap_depth = t.get_double("scene", "overlap_depth", c.scene.overlap_depth);
  c.scene.noise.pixel_sigma = t.get_double("noise", "pixel_sigma", c.scene.noise.pixel_sigma);
  c.scene.noise.dropout = t.get_double("noise", "dropout", c.scene.noise.dropout);
  c.scene.noise.swap_rate = t.get_double("noise", "swap_rate", c.scene.noise.swap_rate);

  c.association.gate_px = t.get_double("associate", "gate_px", c.association.gate_px);

  c.filter.spline.lambda = t.get_double("triangulate", "spline_lambda", c.filter.spline.lambda);
  c.filter.spline.max_gap =
      static_cast<int>(t.get_int("triangulate", "spline_max_gap", c.filter.spline.max_gap));
  c.filter.kalman.jerk_psd = t.get_double("triangulate", "kalman_jerk_psd",
                                          c.filter.kalman.jerk_psd);
  c.filter.kalman.meas_noise =
      t.get_double("triangulate", "kalman_meas_noise", c.filter.kalman.meas_noise);
  c.filter.rms_failure_px = t.get_double("triangulate", "rms_failure_px", c.filter.rms_failure_px);

  c.kinfit.weights.w1 = t.get_double("kinfit", "w1", c.kinfit.weights.w1);
  c.kinfit.weights.w2 = t.get_double("kinfit", "w2", c.kinfit.weights.w2);
  c.kinfit.weights.w3 = t.get_double("kinfit", "w3", c.kinfit.weights.w3);
  c.kinfit.weights.w4 = t.get_double("kinfit", "w4", c.kinfit.weights.w4);
  c.kinfit.weights.w5 = t.get_double("kinfit", "w5", c.kinfit.weights.w5);
  c.kinfit.weights.w6 = t.get_double("kinfit", "w6", c.kinfit.weights.w6);
  c.kinfit.gm_sigma_px = t.get_double("kinfit", "gm_sigma_px", c.kinfit.gm_sigma_px);
  c.kinfit.conf_gate = t.get_double("kinfit", "conf_gate", c.kinfit.conf_gate);
  c.kinfit.lbfgs.max_iterations = static_cast<int>(
      t.get_int("kinfit", "max_iterations", c.kinfit.lbfgs.max_iterations));
  c.kinfit.window = static_cast<int>(t.get_int("kinfit", "window", c.kinfit.window));

  c.tracking.weights.w1 = t.get_double("dynamics", "w1", c.tracking.weights.w1);
  c.tracking.weights.w2 = t.get_double("dynamics", "w2", c.tracking.weights.w2);
  c.tracking.weights.w3 = t.get_double("dynamics", "w3", c.tracking.weights.w3);
  c.tracking.weights.w4 = t.get_double("dynamics", "w4", c.tracking.weights.w4);
  c.tracking.horizon = static_cast<int>(t.get_int("dynamics", "horizon", c.tracking.horizon));
  c.tracking.overlap = static_cast<int>(t.get_int("dynamics", "overlap", c.tracking.overlap));
  c.tracking.dt = t.get_double("dynamics", "dt", c.tracking.dt);
  c.tracking.hold_kp = t.get_double("dynamics", "hold_kp", c.tracking.hold_kp);
  c.tracking.hold_kd = t.get_double("dynamics", "hold_kd", c.tracking.hold_kd);
  c.tracking.ilqr.max_iterations = static_cast<int>(
      t.get_int("dynamics", "max_iters", c.tracking.ilqr.max_iterations));
  c.tracking.ilqr.alpha_min = t.get_double("dynamics", "alpha_min", c.tracking.ilqr.alpha_min);

  c.simulation.contact_stiffness =
      t.get_double("dynamics", "contact_stiffness", c.simulation.contact_stiffness);
  c.simulation.contact_damping =
      t.get_double("dynamics", "contact_damping", c.simulation.contact_damping);
  c.simulation.friction = t.get_double("dynamics", "friction", c.simulation.friction);
  c.simulation.substeps =
      static_cast<int>(t.get_int("dynamics", "substeps", c.simulation.substeps));
  c.simulation.joint_damping =
      t.get_double("dynamics", "joint_damping", c.simulation.joint_damping);
  c.simulation.cross_person_contacts = t.get_bool("dynamics", "cross_person_contacts",
                                                  c.simulation.cross_person_contacts);
  return c;
}

TomlTable pipeline_config_to_toml(const PipelineConfig& c) {
  TomlTable t;
  t.set("run", "work_dir", c.work_dir);
  t.set("run", "seed", static_cast<std::int64_t>(c.seed));
  t.set("run", "workers", static_cast<std::int64_t>(c.workers));
  t.set("run", "verbose", c.verbose);
  t.set("scene", "persons", static_cast<std::int64_t>(c.scene.persons));
  t.set("scene", "cameras", static_cast<std::int64_t>(c.scene.cameras));
  t.set("scene", "frames", static_cast<std::int64_t>(c.scene.frames));
  t.set("scene", "fps", c.scene.fps);
  t.set("scene", "motion", c.scene.motion);
  t.set("scene", "spacing", c.scene.spacing);
  t.set("scene", "overlap_depth", c.scene.overlap_depth);
  t.set("noise", "pixel_sigma", c.scene.noise.pixel_sigma);
  t.set("noise", "dropout", c.scene.noise.dropout);
  t.set("noise", "swap_rate", c.scene.noise.swap_rate);
  t.set("associate", "gate_px", c.association.gate_px);
  t.set("triangulate", "spline_lambda", c.filter.spline.lambda);
  t.set("triangulate", "spline_max_gap",
        static_cast<std::int64_t>(c.filter.spline.max_gap));
  t.set("triangulate", "kalman_jerk_psd", c.filter.kalman.jerk_psd);
  t.set("triangulate", "kalman_meas_noise", c.filter.kalman.meas_noise);
  t.set("triangulate", "rms_failure_px", c.filter.rms_failure_px);
  t.set("kinfit", "w1", c.kinfit.weights.w1);
  t.set("kinfit", "w2", c.kinfit.weights.w2);
  t.set("kinfit", "w3", c.kinfit.weights.w3);
  t.set("kinfit", "w4", c.kinfit.weights.w4);
  t.set("kinfit", "w5", c.kinfit.weights.w5);
  t.set("kinfit", "w6", c.kinfit.weights.w6);
  t.set("kinfit", "gm_sigma_px", c.kinfit.gm_sigma_px);
  t.set("kinfit", "conf_gate", c.kinfit.conf_gate);
  t.set("kinfit", "max_iterations",
        static_cast<std::int64_t>(c.kinfit.lbfgs.max_iterations));
  t.set("kinfit", "window", static_cast<std::int64_t>(c.kinfit.window));
  t.set("dynamics", "w1", c.tracking.weights.w1);
  t.set("dynamics", "w2", c.tracking.weights.w2);
  t.set("dynamics", "w3", c.tracking.weights.w3);
  t.set("dynamics", "w4", c.tracking.weights.w4);
  t.set("dynamics", "horizon", static_cast<std::int64_t>(c.tracking.horizon));
  t.set("dynamics", "overlap", static_cast<std::int64_t>(c.tracking.overlap));
  t.set("dynamics", "dt", c.tracking.dt);
  t.set("dynamics", "hold_kp", c.tracking.hold_kp);
  t.set("dynamics", "hold_kd", c.tracking.hold_kd);
  t.set("dynamics", "max_iters",
        static_cast<std::int64_t>(c.tracking.ilqr.max_iterations));
  t.set("dynamics", "alpha_min", c.tracking.ilqr.alpha_min);
  t.set("dynamics", "contact_stiffness", c.simulation.contact_stiffness);
  t.set("dynamics", "contact_damping", c.simulation.contact_damping);
  t.set("dynamics", "friction", c.simulation.friction);
  t.set("dynamics", "substeps", static_cast<std::int64_t>(c.simulation.substeps));
  t.set("dynamics", "joint_damping", c.simulation.joint_damping);
  t.set("dynamics", "cross_person_contacts", c.simulation.cross_person_contacts);
  return t;
}

std::string annotated_default_config() {
  const PipelineConfig c;
  std::ostringstream out;
  out << "[run]\n"
      << "work_dir = \"out\"\n"
      << "seed = 0\n"
      << "workers = 0            # 0 = all cores\n"
      << "verbose = false\n\n"
      << "[scene]\n"
      << "persons = 2\n"
      << "cameras = 4\n"
      << "frames = 300\n"
      << "fps = 60\n"
      << "motion = \"standing\"    # standing | walking | overlap\n"
      << "spacing = " << format_double(c.scene.spacing) << "\n"
      << "overlap_depth = " << format_double(c.scene.overlap_depth)
      << "  # sustained penetration of the overlap script, m\n\n"
      << "[noise]\n"
      << "pixel_sigma = 0        # detection noise, px\n"
      << "dropout = 0            # per-joint missing-detection rate\n"
      << "swap_rate = 0          # per-view identity-swap start probability\n\n"
      << "[associate]\n"
      << "gate_px = " << format_double(c.association.gate_px)
      << "          # epipolar gate above which tracks cannot match\n\n"
      << "[triangulate]\n"
      << "spline_lambda = " << format_double(c.filter.spline.lambda) << "\n"
      << "spline_max_gap = " << c.filter.spline.max_gap << "\n"
      << "kalman_jerk_psd = " << format_double(c.filter.kalman.jerk_psd) << "\n"
      << "kalman_meas_noise = " << format_double(c.filter.kalman.meas_noise) << "\n"
      << "rms_failure_px = " << format_double(c.filter.rms_failure_px) << "\n\n"
      << "[kinfit]\n"
      << "w1 = 0.001             # 2D re-projection weight\n"
      << "w2 = 1                 # 3D alignment weight\n"
      << "w3 = 0.01              # pose regularizer weight\n"
      << "w4 = 0.001             # temporal smoothness weight\n"
      << "w5 = 0.0001            # quadratic prior weight\n"
      << "w6 = 0.0001            # joint-limit prior weight\n"
      << "gm_sigma_px = 100      # robust kernel scale, px\n"
      << "conf_gate = 0.7        # detections at or below are ignored\n"
      << "max_iterations = 200\n"
      << "window = 300           # frames optimized jointly\n\n"
      << "[dynamics]\n"
      << "w1 = 0.001             # velocity + torque regularizer\n"
      << "w2 = 10                # position tracking weight\n"
      << "w3 = 0.1               # velocity tracking weight\n"
      << "w4 = 20                # penetration-depth^2 weight\n"
      << "horizon = 60           # receding-horizon window, frames\n"
      << "overlap = 10\n"
      << "dt = " << format_double(c.tracking.dt) << "\n"
      << "hold_kp = " << format_double(c.tracking.hold_kp)
      << "          # inner posture-hold gains\n"
      << "hold_kd = " << format_double(c.tracking.hold_kd) << "\n"
      << "max_iters = 100\n"
      << "alpha_min = " << format_double(c.tracking.ilqr.alpha_min) << "\n"
      << "contact_stiffness = " << format_double(c.simulation.contact_stiffness) << "\n"
      << "contact_damping = " << format_double(c.simulation.contact_damping) << "\n"
      << "friction = " << format_double(c.simulation.friction) << "\n"
      << "substeps = " << c.simulation.substeps << "\n"
      << "joint_damping = " << format_double(c.simulation.joint_damping) << "\n"
      << "cross_person_contacts = true\n"
      << "\n# humanoid generator: density 985 kg/m^3 (average human body),\n"
      << "# capsule radius = 0.12 x bone length clamped to [0.03, 0.12] m\n";
  return out.str();
}

}  // namespace mvmc
