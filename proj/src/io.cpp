#include "mvmc/io.hpp"

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "mvmc/toml.hpp"

namespace mvmc {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open " + path);
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void save_calibration(const std::string& path, const std::vector<CameraParams>& cameras) {
  json arr = json::array();
  for (const auto& cam : cameras) {
    json k = json::array(), r = json::array(), t = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        k.push_back(cam.intrinsics()(i, j));
        r.push_back(cam.rotation()(i, j));
      }
      t.push_back(cam.translation()(i));
    }
    arr.push_back(json{{"id", cam.id()}, {"K", k}, {"R", r}, {"t", t}});
  }
  open_out(path) << arr.dump(2) << "\n";
}

std::vector<CameraParams> load_calibration(const std::string& path) {
  json arr = json::parse(open_in(path));
  std::vector<CameraParams> cameras;
  for (const auto& item : arr) {
    Eigen::Matrix3d k, r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        k(i, j) = item["K"][3 * i + j].get<double>();
        r(i, j) = item["R"][3 * i + j].get<double>();
      }
      t(i) = item["t"][i].get<double>();
    }
    cameras.emplace_back(item["id"].get<int>(), k, r, t);
  }
  return cameras;
}

void save_detections(const std::string& path, const ObservationSet& observations) {
  auto out = open_out(path);
  out << "frame,view,person,joint,u,v,conf\n";
  for (size_t t = 0; t < observations.frames.size(); ++t) {
    for (size_t v = 0; v < observations.frames[t].size(); ++v) {
      for (const auto& track : observations.frames[t][v]) {
        for (size_t j = 0; j < track.joints.size(); ++j) {
          if (!track.joints[j].has_value()) continue;
          out << t << "," << v << "," << track.local_id << "," << j << ","
              << format_double(track.joints[j]->u) << "," << format_double(track.joints[j]->v)
              << "," << format_double(track.joints[j]->confidence) << "\n";
        }
      }
    }
  }
}

ObservationSet load_detections(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);  // header
  ObservationSet obs;
  // (frame, view, person) -> joints
  std::map<std::tuple<int, int, int>, std::vector<std::pair<int, PixelPoint>>> rows;
  int max_frame = -1, max_view = -1, max_joint = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const int frame = std::stoi(f[0]);
    const int view = std::stoi(f[1]);
    const int person = std::stoi(f[2]);
    const int joint = std::stoi(f[3]);
    rows[{frame, view, person}].emplace_back(
        joint, PixelPoint{std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
    max_frame = std::max(max_frame, frame);
    max_view = std::max(max_view, view);
    max_joint = std::max(max_joint, joint);
  }
  obs.frames.resize(max_frame + 1);
  for (auto& frame : obs.frames) frame.resize(max_view + 1);
  for (const auto& [key, joints] : rows) {
    const auto [frame, view, person] = key;
    TrackDetections track;
    track.local_id = person;
    track.joints.resize(max_joint + 1);
    for (const auto& [j, p] : joints) track.joints[j] = p;
    obs.frames[frame][view].push_back(std::move(track));
  }
  return obs;
}

void save_trajectories(const std::string& path, const PersonTrajectories& trajectories) {
  auto out = open_out(path);
  out << "frame,person,joint,x,y,z,confidence\n";
  for (const auto& [person, joints] : trajectories) {
    for (const auto& traj : joints) {
      for (size_t t = 0; t < traj.frames.size(); ++t) {
        if (!traj.frames[t].has_value()) continue;
        const auto& p = *traj.frames[t];
        out << t << "," << person << "," << traj.joint_id << ","
            << format_double(p.position.x()) << "," << format_double(p.position.y()) << ","
            << format_double(p.position.z()) << "," << format_double(p.confidence) << "\n";
      }
    }
  }
}

PersonTrajectories load_trajectories(const std::string& path, double frame_rate_hz) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  struct Row {
    int frame, person, joint;
    TriangulatedPoint point;
  };
  std::vector<Row> rows;
  int max_frame = -1;
  std::map<int, int> max_joint;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    Row r;
    r.frame = std::stoi(f[0]);
    r.person = std::stoi(f[1]);
    r.joint = std::stoi(f[2]);
    r.point.position = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
    r.point.confidence = std::stod(f[6]);
    max_frame = std::max(max_frame, r.frame);
    max_joint[r.person] = std::max(max_joint[r.person], r.joint);
    rows.push_back(r);
  }
  PersonTrajectories out;
  for (const auto& [person, mj] : max_joint) {
    out[person].resize(mj + 1);
    for (int j = 0; j <= mj; ++j) {
      out[person][j].joint_id = j;
      out[person][j].frame_rate_hz = frame_rate_hz;
      out[person][j].frames.resize(max_frame + 1);
    }
  }
  for (const auto& r : rows) out[r.person][r.joint].frames[r.frame] = r.point;
  return out;
}

void save_skeleton(const std::string& path, const SkeletonShape& shape) {
  json joints = json::array();
  for (int j = 0; j < shape.joint_count(); ++j) {
    const auto& spec = shape.joint(j);
    json limits = json::array();
    for (int k = 0; k < spec.limit_lo.size(); ++k) {
      limits.push_back(json{{"lo", spec.limit_lo(k)}, {"hi", spec.limit_hi(k)}});
    }
    joints.push_back(json{
        {"name", spec.name},
        {"parent", spec.parent},
        {"offset", {spec.offset.x(), spec.offset.y(), spec.offset.z()}},
        {"dof", spec.dof == JointDof::Hinge ? "hinge" : "ball"},
        {"axis", {spec.hinge_axis.x(), spec.hinge_axis.y(), spec.hinge_axis.z()}},
        {"limits", limits},
    });
  }
  open_out(path) << json{{"joints", joints}}.dump(2) << "\n";
}

SkeletonShape load_skeleton(const std::string& path) {
  json doc = json::parse(open_in(path));
  std::vector<JointSpec> joints;
  for (const auto& item : doc["joints"]) {
    JointSpec spec;
    spec.name = item["name"].get<std::string>();
    spec.parent = item["parent"].get<int>();
    spec.offset = Eigen::Vector3d(item["offset"][0].get<double>(),
                                  item["offset"][1].get<double>(),
                                  item["offset"][2].get<double>());
    spec.dof = item["dof"].get<std::string>() == "hinge" ? JointDof::Hinge : JointDof::Ball;
    spec.hinge_axis =
        Eigen::Vector3d(item["axis"][0].get<double>(), item["axis"][1].get<double>(),
                        item["axis"][2].get<double>());
    const auto& limits = item["limits"];
    spec.limit_lo.resize(limits.size());
    spec.limit_hi.resize(limits.size());
    for (size_t k = 0; k < limits.size(); ++k) {
      spec.limit_lo(k) = limits[k]["lo"].get<double>();
      spec.limit_hi(k) = limits[k]["hi"].get<double>();
    }
    joints.push_back(std::move(spec));
  }
  return SkeletonShape(std::move(joints));
}

void save_pose_sequences(const std::string& path, const std::vector<PoseSequence>& sequences) {
  auto out = open_out(path);
  const int angles = sequences.empty() ? 0 : static_cast<int>(sequences[0].poses.empty()
                                                                  ? 0
                                                                  : sequences[0].poses[0].joint_angles.size());
  out << "frame,person,root_x,root_y,root_z,qw,qx,qy,qz";
  for (int k = 0; k < angles; ++k) out << ",angle_" << k;
  out << "\n";
  for (const auto& seq : sequences) {
    for (size_t t = 0; t < seq.poses.size(); ++t) {
      const Pose& p = seq.poses[t];
      out << t << "," << seq.person_id << "," << format_double(p.root_position.x()) << ","
          << format_double(p.root_position.y()) << "," << format_double(p.root_position.z())
          << "," << format_double(p.root_orientation.w()) << ","
          << format_double(p.root_orientation.x()) << ","
          << format_double(p.root_orientation.y()) << ","
          << format_double(p.root_orientation.z());
      for (int k = 0; k < p.joint_angles.size(); ++k) {
        out << "," << format_double(p.joint_angles(k));
      }
      out << "\n";
    }
  }
}

std::vector<PoseSequence> load_pose_sequences(const std::string& path, double frame_rate_hz) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  const int angle_count = static_cast<int>(split_csv(line).size()) - 9;
  std::map<int, std::map<int, Pose>> by_person;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const int frame = std::stoi(f[0]);
    const int person = std::stoi(f[1]);
    Pose p;
    p.root_position = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
    p.root_orientation =
        Eigen::Quaterniond(std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), std::stod(f[8]));
    p.joint_angles.resize(angle_count);
    for (int k = 0; k < angle_count; ++k) p.joint_angles(k) = std::stod(f[9 + k]);
    by_person[person][frame] = p;
  }
  std::vector<PoseSequence> out;
  for (auto& [person, frames] : by_person) {
    PoseSequence seq;
    seq.person_id = person;
    seq.frame_rate_hz = frame_rate_hz;
    for (auto& [frame, pose] : frames) seq.poses.push_back(pose);
    out.push_back(std::move(seq));
  }
  return out;
}

void save_physics_model(const std::string& path, const HumanoidPhysicsModel& model) {
  json bodies = json::array();
  for (const auto& b : model.bodies()) {
    json caps = json::array();
    for (const auto& c : b.capsules) {
      caps.push_back(json{{"p0", {c.p0.x(), c.p0.y(), c.p0.z()}},
                          {"p1", {c.p1.x(), c.p1.y(), c.p1.z()}},
                          {"radius", c.radius}});
    }
    json inertia = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) inertia.push_back(b.inertia(i, j));
    }
    bodies.push_back(json{
        {"name", b.name},
        {"parent", b.parent},
        {"skeleton_joint", b.skeleton_joint},
        {"joint", b.joint == PhysJointType::Free ? "free"
                  : b.joint == PhysJointType::Ball ? "ball"
                                                   : "hinge"},
        {"anchor", {b.anchor_in_parent.x(), b.anchor_in_parent.y(), b.anchor_in_parent.z()}},
        {"axis", {b.hinge_axis.x(), b.hinge_axis.y(), b.hinge_axis.z()}},
        {"mass", b.mass},
        {"com", {b.com.x(), b.com.y(), b.com.z()}},
        {"inertia", inertia},
        {"capsules", caps},
    });
  }
  open_out(path) << json{{"bodies", bodies},
                         {"nq", model.nq()},
                         {"nv", model.nv()},
                         {"nu", model.nu()},
                         {"total_mass", model.total_mass()}}
                        .dump(2)
                 << "\n";
}

void save_joint_sequences(const std::string& path,
                          const std::vector<JointSequence>& per_person) {
  auto out = open_out(path);
  out << "frame,person,joint,x,y,z\n";
  for (size_t k = 0; k < per_person.size(); ++k) {
    for (size_t t = 0; t < per_person[k].size(); ++t) {
      for (size_t j = 0; j < per_person[k][t].size(); ++j) {
        const auto& p = per_person[k][t][j];
        out << t << "," << k << "," << j << "," << format_double(p.x()) << ","
            << format_double(p.y()) << "," << format_double(p.z()) << "\n";
      }
    }
  }
}

std::vector<JointSequence> load_joint_sequences(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  int max_person = -1, max_frame = -1, max_joint = -1;
  struct Row {
    int person, frame, joint;
    Eigen::Vector3d p;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    Row r{std::stoi(f[1]), std::stoi(f[0]), std::stoi(f[2]),
          {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])}};
    max_person = std::max(max_person, r.person);
    max_frame = std::max(max_frame, r.frame);
    max_joint = std::max(max_joint, r.joint);
    rows.push_back(r);
  }
  std::vector<JointSequence> out(
      max_person + 1,
      JointSequence(max_frame + 1, std::vector<Eigen::Vector3d>(max_joint + 1)));
  for (const auto& r : rows) out[r.person][r.frame][r.joint] = r.p;
  return out;
}

void save_dynamics_result(const std::string& path, const std::vector<DynamicsRecord>& records) {
  auto out = open_out(path);
  out << "t";
  if (!records.empty()) {
    for (int i = 0; i < records[0].q.size(); ++i) out << ",q" << i;
    for (int i = 0; i < records[0].v.size(); ++i) out << ",v" << i;
    for (int i = 0; i < records[0].u.size(); ++i) out << ",u" << i;
    for (const auto& [name, value] : records[0].costs) out << ",cost_" << name;
  }
  out << "\n";
  for (const auto& rec : records) {
    out << format_double(rec.time);
    for (int i = 0; i < rec.q.size(); ++i) out << "," << format_double(rec.q(i));
    for (int i = 0; i < rec.v.size(); ++i) out << "," << format_double(rec.v(i));
    for (int i = 0; i < rec.u.size(); ++i) out << "," << format_double(rec.u(i));
    for (const auto& [name, value] : rec.costs) out << "," << format_double(value);
    out << "\n";
  }
}

namespace {

json report_to_json(const MetricsReport& r) {
  return json{{"pcp_per_actor", r.pcp_per_actor},
              {"pcp_avg", r.pcp_avg},
              {"mpjpe_mm", r.mpjpe_mm},
              {"pa_mpjpe_mm", r.pa_mpjpe_mm},
              {"foot_z_mm", r.physics.foot_z_mm},
              {"ground_penetration_mm", r.physics.ground_penetration_mm},
              {"skating_mm_per_frame", r.physics.skating_mm_per_frame},
              {"smoothness_mm_per_frame2", r.physics.smoothness_mm_per_frame2},
              {"penetration_mm", r.physics.penetration_mm}};
}

}  // namespace

void save_metrics_json(const std::string& path,
                       const std::map<std::string, MetricsReport>& by_stage) {
  json doc;
  for (const auto& [stage, report] : by_stage) doc[stage] = report_to_json(report);
  open_out(path) << doc.dump(2) << "\n";
}

void save_metrics_table(const std::string& path,
                        const std::map<std::string, MetricsReport>& by_stage) {
  auto out = open_out(path);
  out << std::left << std::setw(28) << "metric";
  for (const auto& [stage, report] : by_stage) out << std::right << std::setw(14) << stage;
  out << "\n";
  auto row = [&](const std::string& name, auto getter) {
    out << std::left << std::setw(28) << name;
    for (const auto& [stage, report] : by_stage) {
      out << std::right << std::setw(14) << std::fixed << std::setprecision(3)
          << getter(report);
    }
    out << "\n";
  };
  row("pcp_avg [%]", [](const MetricsReport& r) { return r.pcp_avg; });
  row("mpjpe [mm]", [](const MetricsReport& r) { return r.mpjpe_mm; });
  row("pa_mpjpe [mm]", [](const MetricsReport& r) { return r.pa_mpjpe_mm; });
  row("foot_z [mm]", [](const MetricsReport& r) { return r.physics.foot_z_mm; });
  row("gnd_penetration [mm]", [](const MetricsReport& r) {
    return r.physics.ground_penetration_mm;
  });
  row("skating [mm/frame]", [](const MetricsReport& r) {
    return r.physics.skating_mm_per_frame;
  });
  row("smoothness [mm/frame^2]", [](const MetricsReport& r) {
    return r.physics.smoothness_mm_per_frame2;
  });
  row("penetration [mm]", [](const MetricsReport& r) { return r.physics.penetration_mm; });
  out << "\nfoot_z, gnd_penetration, skating, smoothness and penetration use in-repo\n"
         "definitions (see README); they stand in for externally defined variants.\n";
}

}  // namespace mvmc
