#include "mvmc/metrics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

namespace mvmc {

double pcp(const std::vector<Limb>& predicted, const std::vector<Limb>& ground_truth,
           double threshold_ratio) {
  if (predicted.empty() || predicted.size() != ground_truth.size()) {
    throw EmptyLimbSet("pcp needs matching non-empty limb lists");
  }
  int correct = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const double len = (ground_truth[i].a - ground_truth[i].b).norm();
    const double thresh = threshold_ratio * len;
    if ((predicted[i].a - ground_truth[i].a).norm() <= thresh &&
        (predicted[i].b - ground_truth[i].b).norm() <= thresh) {
      ++correct;
    }
  }
  return 100.0 * correct / static_cast<double>(predicted.size());
}

std::vector<Limb> limbs_from_joints(const SkeletonShape& shape,
                                    const std::vector<Eigen::Vector3d>& joints) {
  std::vector<Limb> limbs;
  for (int j = 1; j < shape.joint_count(); ++j) {
    limbs.push_back(Limb{joints[shape.joint(j).parent], joints[j]});
  }
  return limbs;
}

namespace {

void check_aligned(const JointSequence& a, const JointSequence& b) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionMismatch("joint sequences must have equal non-zero length");
  }
  for (size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size() || a[t].empty()) {
      throw DimensionMismatch("joint sets must align at every frame");
    }
  }
}

}  // namespace

double mpjpe_mm(const JointSequence& predicted, const JointSequence& ground_truth) {
  check_aligned(predicted, ground_truth);
  double sum = 0.0;
  int count = 0;
  for (size_t t = 0; t < predicted.size(); ++t) {
    for (size_t j = 0; j < predicted[t].size(); ++j) {
      sum += (predicted[t][j] - ground_truth[t][j]).norm();
      ++count;
    }
  }
  return 1000.0 * sum / count;
}

double pa_mpjpe_mm(const JointSequence& predicted, const JointSequence& ground_truth) {
  check_aligned(predicted, ground_truth);
  double sum = 0.0;
  int count = 0;
  for (size_t t = 0; t < predicted.size(); ++t) {
    const int n = static_cast<int>(predicted[t].size());
    Eigen::MatrixXd src(3, n), dst(3, n);
    for (int j = 0; j < n; ++j) {
      src.col(j) = predicted[t][j];
      dst.col(j) = ground_truth[t][j];
    }
    const Eigen::Matrix4d transform = Eigen::umeyama(src, dst, true);
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d aligned =
          transform.topLeftCorner<3, 3>() * src.col(j) + transform.topRightCorner<3, 1>();
      sum += (aligned - dst.col(j)).norm();
      ++count;
    }
  }
  return 1000.0 * sum / count;
}

PhysicsMetrics physics_metrics(const std::vector<JointSequence>& per_person,
                               const FootMetricConfig& feet, const MultiHumanoidModel* sim,
                               const std::vector<Eigen::VectorXd>* configurations) {
  if (per_person.empty() || per_person[0].size() < 3) {
    throw TooShort("physics metrics need at least 3 frames");
  }
  PhysicsMetrics out;

  double pen_sum = 0.0;
  int frames = static_cast<int>(per_person[0].size());

  // foot-z / ground penetration and skating
  double fz_sum = 0.0;
  int fz_count = 0;
  double skate_sum = 0.0;
  int skate_count = 0;
  for (const auto& joints : per_person) {
    for (int t = 0; t < static_cast<int>(joints.size()); ++t) {
      for (int f : feet.foot_joints) {
        if (f >= static_cast<int>(joints[t].size())) continue;
        fz_sum += std::max(0.0, -joints[t][f].z());
        ++fz_count;
        if (t > 0 && joints[t][f].z() < feet.contact_threshold) {
          skate_sum += (joints[t][f].head<2>() - joints[t - 1][f].head<2>()).norm();
          ++skate_count;
        }
      }
    }
  }
  out.foot_z_mm = fz_count > 0 ? 1000.0 * fz_sum / fz_count : 0.0;
  out.ground_penetration_mm = out.foot_z_mm;
  out.skating_mm_per_frame = skate_count > 0 ? 1000.0 * skate_sum / skate_count : 0.0;

  // smoothness: second differences over all joints
  double acc_sum = 0.0;
  int acc_count = 0;
  for (const auto& joints : per_person) {
    for (size_t t = 1; t + 1 < joints.size(); ++t) {
      for (size_t j = 0; j < joints[t].size(); ++j) {
        acc_sum += (joints[t + 1][j] - 2.0 * joints[t][j] + joints[t - 1][j]).norm();
        ++acc_count;
      }
    }
  }
  out.smoothness_mm_per_frame2 = acc_count > 0 ? 1000.0 * acc_sum / acc_count : 0.0;

  // cross-person capsule penetration
  if (sim != nullptr && configurations != nullptr && sim->count() >= 2) {
    frames = static_cast<int>(configurations->size());
    for (const auto& q : *configurations) {
      double max_depth = 0.0;
      for (const auto& c : sim->collision_detect(q)) {
        if (c.body_b < 0) continue;
        int ha = 0, hb = 0;
        while (c.body_a >= sim->body_offset(ha + 1)) ++ha;
        while (c.body_b >= sim->body_offset(hb + 1)) ++hb;
        if (ha != hb) max_depth = std::max(max_depth, c.depth);
      }
      pen_sum += max_depth;
    }
    out.penetration_mm = 1000.0 * pen_sum / frames;
  }
  return out;
}

MetricsReport evaluate_poses(const SkeletonShape& shape,
                             const std::vector<JointSequence>& predicted,
                             const std::vector<JointSequence>& ground_truth,
                             const FootMetricConfig& feet, const MultiHumanoidModel* sim,
                             const std::vector<Eigen::VectorXd>* configurations) {
  if (predicted.size() != ground_truth.size() || predicted.empty()) {
    throw DimensionMismatch("evaluate_poses: person lists must align");
  }
  MetricsReport report;
  double mpjpe_sum = 0.0, pa_sum = 0.0;
  for (size_t k = 0; k < predicted.size(); ++k) {
    check_aligned(predicted[k], ground_truth[k]);
    int correct_frames = 0;
    double pcp_sum = 0.0;
    for (size_t t = 0; t < predicted[k].size(); ++t) {
      pcp_sum += pcp(limbs_from_joints(shape, predicted[k][t]),
                     limbs_from_joints(shape, ground_truth[k][t]));
      ++correct_frames;
    }
    report.pcp_per_actor.push_back(pcp_sum / correct_frames);
    mpjpe_sum += mpjpe_mm(predicted[k], ground_truth[k]);
    pa_sum += pa_mpjpe_mm(predicted[k], ground_truth[k]);
  }
  report.pcp_avg = 0.0;
  for (double p : report.pcp_per_actor) report.pcp_avg += p / report.pcp_per_actor.size();
  report.mpjpe_mm = mpjpe_sum / predicted.size();
  report.pa_mpjpe_mm = pa_sum / predicted.size();
  report.physics = physics_metrics(predicted, feet, sim, configurations);
  return report;
}

}  // namespace mvmc
