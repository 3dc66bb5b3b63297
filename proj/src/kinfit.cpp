#include "mvmc/kinfit.hpp"

#include <algorithm>
#include <cmath>

namespace mvmc {

double geman_mcclure(double residual, double sigma) {
  if (sigma <= 0.0) throw Error("geman_mcclure: sigma must be positive");
  const double s2 = sigma * sigma;
  const double r2 = residual * residual;
  return s2 * r2 / (s2 + r2);
}

namespace {

constexpr double kMinProjectionDepth = 1e-6;

struct FrameEval {
  FkJacobian jac;
  Eigen::VectorXd angles;        // raw block
  Eigen::Vector4d quat_hat;      // normalized root quaternion
  std::vector<Eigen::Vector3d> pos_grad;  // dL/d(joint position), weighted
  Eigen::VectorXd angle_grad;    // direct angle-space gradient, weighted
  Eigen::Vector4d quat_grad_hat = Eigen::Vector4d::Zero();  // w.r.t. normalized quat

  FrameEval(const SkeletonShape& shape, const Pose& pose)
      : jac(shape, pose),
        angles(pose.joint_angles),
        quat_hat(jac.quat_normalized()),
        pos_grad(shape.joint_count(), Eigen::Vector3d::Zero()),
        angle_grad(Eigen::VectorXd::Zero(shape.total_angle_dofs())) {}
};

Pose pose_from_block(const SkeletonShape& shape, const Eigen::VectorXd& x, int t) {
  const int fd = 7 + shape.total_angle_dofs();
  Pose p;
  p.root_position = x.segment<3>(t * fd);
  p.root_orientation =
      Eigen::Quaterniond(x(t * fd + 3), x(t * fd + 4), x(t * fd + 5), x(t * fd + 6));
  p.joint_angles = x.segment(t * fd + 7, shape.total_angle_dofs());
  return p;
}

void pose_to_block(const SkeletonShape& shape, const Pose& p, Eigen::VectorXd& x, int t) {
  const int fd = 7 + shape.total_angle_dofs();
  x.segment<3>(t * fd) = p.root_position;
  x(t * fd + 3) = p.root_orientation.w();
  x(t * fd + 4) = p.root_orientation.x();
  x(t * fd + 5) = p.root_orientation.y();
  x(t * fd + 6) = p.root_orientation.z();
  x.segment(t * fd + 7, shape.total_angle_dofs()) = p.joint_angles;
}

// Quadratic-about-rest prior on the joint angles.
double prior_quadratic(const SkeletonShape& shape, const Eigen::VectorXd& angles,
                       Eigen::VectorXd* grad, double weight) {
  (void)shape;
  if (grad) *grad += weight * 2.0 * angles;
  return angles.squaredNorm();
}

// C1 hinge penalty outside the joint limits.
double prior_limits(const SkeletonShape& shape, const Eigen::VectorXd& angles,
                    Eigen::VectorXd* grad, double weight, double stiffness) {
  double total = 0.0;
  for (int j = 1; j < shape.joint_count(); ++j) {
    const auto& spec = shape.joint(j);
    const int off = shape.angle_offset(j);
    for (int k = 0; k < shape.dof_count(j); ++k) {
      const double a = angles(off + k);
      double excess = 0.0;
      if (a > spec.limit_hi(k)) {
        excess = a - spec.limit_hi(k);
      } else if (a < spec.limit_lo(k)) {
        excess = a - spec.limit_lo(k);
      }
      total += stiffness * excess * excess;
      if (grad && excess != 0.0) (*grad)(off + k) += weight * stiffness * 2.0 * excess;
    }
  }
  return total;
}

/// Whole-sequence objective with analytic gradient. Non-finite terms throw in
/// strict mode (first evaluation) and poison the value otherwise so the line
/// search backs away.
class SequenceObjective {
 public:
  SequenceObjective(const SkeletonShape& shape, const SequenceDetections* detections,
                    const SequenceTargets* targets, const std::vector<CameraParams>* cameras,
                    const KinfitConfig& config, int frames)
      : shape_(shape),
        detections_(detections),
        targets_(targets),
        cameras_(cameras),
        config_(config),
        frames_(frames) {}

  int frame_dim() const { return 7 + shape_.total_angle_dofs(); }

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad.setZero();
    terms_ = {{"L_2D", 0.0}, {"L_3D", 0.0},      {"L_reg", 0.0},
              {"L_smooth", 0.0}, {"prior_quadratic", 0.0}, {"prior_limits", 0.0}};
    const auto& w = config_.weights;

    std::vector<FrameEval> evals;
    evals.reserve(frames_);
    for (int t = 0; t < frames_; ++t) {
      evals.emplace_back(shape_, pose_from_block(shape_, x, t));
    }

    for (int t = 0; t < frames_; ++t) {
      auto& ev = evals[t];
      const auto& fk = ev.jac.fk();

      if (targets_ && t < static_cast<int>(targets_->size())) {
        double l3d = 0.0;
        const auto& tj = (*targets_)[t].joints;
        for (int j = 0; j < shape_.joint_count() && j < static_cast<int>(tj.size()); ++j) {
          if (!tj[j].has_value()) continue;
          const double c = tj[j]->confidence;
          const Eigen::Vector3d e = fk.positions[j] - tj[j]->position;
          l3d += c * e.squaredNorm();
          ev.pos_grad[j] += w.w2 * 2.0 * c * e;
        }
        check_finite(l3d, "L_3D", t);
        terms_["L_3D"] += l3d;
      }

      if (detections_ && cameras_ && t < static_cast<int>(detections_->size())) {
        double l2d = 0.0;
        const auto& by_view = (*detections_)[t].by_view;
        const double s2 = config_.gm_sigma_px * config_.gm_sigma_px;
        for (size_t v = 0; v < by_view.size(); ++v) {
          const auto& cam = (*cameras_)[v];
          for (int j = 0; j < shape_.joint_count() && j < static_cast<int>(by_view[v].size());
               ++j) {
            const auto& det = by_view[v][j];
            if (!det.has_value() || det->confidence <= config_.conf_gate) continue;
            const double c = det->confidence;
            const Eigen::Vector3d s3 =
                cam.projection_matrix() * fk.positions[j].homogeneous();
            if (s3.z() <= kMinProjectionDepth) {
              l2d += c * s2;  // saturated kernel for degenerate projections
              continue;
            }
            const Eigen::Vector2d proj(s3.x() / s3.z(), s3.y() / s3.z());
            const Eigen::Vector2d e = proj - Eigen::Vector2d(det->u, det->v);
            const double r2 = e.squaredNorm();
            l2d += c * s2 * r2 / (s2 + r2);
            const Eigen::Vector2d de = 2.0 * s2 * s2 / ((s2 + r2) * (s2 + r2)) * e;
            Eigen::Matrix<double, 2, 3> dpi;
            dpi.row(0) = (cam.projection_matrix().row(0).head<3>() -
                          proj.x() * cam.projection_matrix().row(2).head<3>()) /
                         s3.z();
            dpi.row(1) = (cam.projection_matrix().row(1).head<3>() -
                          proj.y() * cam.projection_matrix().row(2).head<3>()) /
                         s3.z();
            ev.pos_grad[j] += w.w1 * c * dpi.transpose() * de;
          }
        }
        check_finite(l2d, "L_2D", t);
        terms_["L_2D"] += l2d;
      }

      double lreg = prior_quadratic(shape_, ev.angles, &ev.angle_grad, w.w3 + w.w5);
      check_finite(lreg, "L_reg", t);
      terms_["L_reg"] += lreg;
      terms_["prior_quadratic"] += lreg;
      const double llim =
          prior_limits(shape_, ev.angles, &ev.angle_grad, w.w6, config_.limit_stiffness);
      check_finite(llim, "prior_limits", t);
      terms_["prior_limits"] += llim;
    }

    for (int t = 1; t < frames_; ++t) {
      auto& a = evals[t - 1];
      auto& b = evals[t];
      double ls = (b.angles - a.angles).squaredNorm() + (b.quat_hat - a.quat_hat).squaredNorm();
      b.angle_grad += w.w4 * 2.0 * (b.angles - a.angles);
      a.angle_grad -= w.w4 * 2.0 * (b.angles - a.angles);
      b.quat_grad_hat += w.w4 * 2.0 * (b.quat_hat - a.quat_hat);
      a.quat_grad_hat -= w.w4 * 2.0 * (b.quat_hat - a.quat_hat);
      for (int j = 0; j < shape_.joint_count(); ++j) {
        const Eigen::Vector3d dp = b.jac.fk().positions[j] - a.jac.fk().positions[j];
        ls += dp.squaredNorm();
        b.pos_grad[j] += w.w4 * 2.0 * dp;
        a.pos_grad[j] -= w.w4 * 2.0 * dp;
      }
      check_finite(ls, "L_smooth", t);
      terms_["L_smooth"] += ls;
    }

    const int fd = frame_dim();
    for (int t = 0; t < frames_; ++t) {
      auto& ev = evals[t];
      const auto pg = ev.jac.accumulate(ev.pos_grad);
      grad.segment<3>(t * fd) += pg.root_position;
      grad.segment<4>(t * fd + 3) +=
          pg.root_orientation + ev.jac.quat_chain(ev.quat_grad_hat);
      grad.segment(t * fd + 7, shape_.total_angle_dofs()) += pg.joint_angles + ev.angle_grad;
    }

    const double total = w.w1 * terms_["L_2D"] + w.w2 * terms_["L_3D"] +
                         w.w3 * terms_["prior_quadratic"] + w.w4 * terms_["L_smooth"] +
                         w.w5 * terms_["prior_quadratic"] + w.w6 * terms_["prior_limits"];
    strict_ = false;
    return total;
  }

  const std::map<std::string, double>& terms() const { return terms_; }
  void set_strict(bool strict) { strict_ = strict; }

 private:
  void check_finite(double v, const char* term, int frame) const {
    if (strict_ && !std::isfinite(v)) {
      throw NonFiniteObjective(std::string(term) + " is non-finite at frame " +
                               std::to_string(frame));
    }
  }

  const SkeletonShape& shape_;
  const SequenceDetections* detections_;
  const SequenceTargets* targets_;
  const std::vector<CameraParams>* cameras_;
  KinfitConfig config_;
  int frames_;
  bool strict_ = false;
  std::map<std::string, double> terms_;
};

}  // namespace

double loss_2d(const SkeletonShape& shape, const PoseSequence& sequence,
               const SequenceDetections& detections, const std::vector<CameraParams>& cameras,
               const KinfitConfig& config) {
  double total = 0.0;
  const double s2 = config.gm_sigma_px * config.gm_sigma_px;
  for (size_t t = 0; t < sequence.poses.size() && t < detections.size(); ++t) {
    const FkResult fk = forward_kinematics(shape, sequence.poses[t]);
    const auto& by_view = detections[t].by_view;
    for (size_t v = 0; v < by_view.size(); ++v) {
      for (int j = 0; j < shape.joint_count() && j < static_cast<int>(by_view[v].size()); ++j) {
        const auto& det = by_view[v][j];
        if (!det.has_value() || det->confidence <= config.conf_gate) continue;
        const Eigen::Vector3d s3 = cameras[v].projection_matrix() * fk.positions[j].homogeneous();
        if (s3.z() <= kMinProjectionDepth) {
          total += det->confidence * s2;
          continue;
        }
        const Eigen::Vector2d e(s3.x() / s3.z() - det->u, s3.y() / s3.z() - det->v);
        total += det->confidence * geman_mcclure(e.norm(), config.gm_sigma_px);
      }
    }
  }
  return total;
}

double loss_3d(const SkeletonShape& shape, const PoseSequence& sequence,
               const SequenceTargets& targets) {
  double total = 0.0;
  for (size_t t = 0; t < sequence.poses.size() && t < targets.size(); ++t) {
    const FkResult fk = forward_kinematics(shape, sequence.poses[t]);
    const auto& tj = targets[t].joints;
    for (int j = 0; j < shape.joint_count() && j < static_cast<int>(tj.size()); ++j) {
      if (tj[j].has_value()) {
        total += tj[j]->confidence * (fk.positions[j] - tj[j]->position).squaredNorm();
      }
    }
  }
  return total;
}

double loss_smooth(const SkeletonShape& shape, const PoseSequence& sequence) {
  if (sequence.poses.size() < 2) {
    throw TooSparse("smoothness loss needs >= 2 frames");
  }
  double total = 0.0;
  FkResult prev_fk = forward_kinematics(shape, sequence.poses[0]);
  Eigen::Vector4d prev_q(sequence.poses[0].root_orientation.normalized().w(),
                         sequence.poses[0].root_orientation.normalized().x(),
                         sequence.poses[0].root_orientation.normalized().y(),
                         sequence.poses[0].root_orientation.normalized().z());
  for (size_t t = 1; t < sequence.poses.size(); ++t) {
    const FkResult fk = forward_kinematics(shape, sequence.poses[t]);
    const auto qn = sequence.poses[t].root_orientation.normalized();
    const Eigen::Vector4d q(qn.w(), qn.x(), qn.y(), qn.z());
    total += (sequence.poses[t].joint_angles - sequence.poses[t - 1].joint_angles).squaredNorm();
    total += (q - prev_q).squaredNorm();
    for (int j = 0; j < shape.joint_count(); ++j) {
      total += (fk.positions[j] - prev_fk.positions[j]).squaredNorm();
    }
    prev_fk = fk;
    prev_q = q;
  }
  return total;
}

double loss_prior(const SkeletonShape& shape, const Pose& pose, double limit_stiffness) {
  return prior_quadratic(shape, pose.joint_angles, nullptr, 0.0) +
         prior_limits(shape, pose.joint_angles, nullptr, 0.0, limit_stiffness);
}

Eigen::VectorXd pack_sequence(const SkeletonShape& shape, const PoseSequence& sequence) {
  const int fd = 7 + shape.total_angle_dofs();
  Eigen::VectorXd x(static_cast<int>(sequence.poses.size()) * fd);
  for (size_t t = 0; t < sequence.poses.size(); ++t) {
    pose_to_block(shape, sequence.poses[t], x, static_cast<int>(t));
  }
  return x;
}

PoseSequence unpack_sequence(const SkeletonShape& shape, const Eigen::VectorXd& x, int frames,
                             double frame_rate_hz, int person_id) {
  PoseSequence seq;
  seq.frame_rate_hz = frame_rate_hz;
  seq.person_id = person_id;
  for (int t = 0; t < frames; ++t) seq.poses.push_back(pose_from_block(shape, x, t));
  return seq;
}

double sequence_objective(const SkeletonShape& shape, const Eigen::VectorXd& x, int frames,
                          const SequenceDetections* detections, const SequenceTargets* targets,
                          const std::vector<CameraParams>* cameras, const KinfitConfig& config,
                          Eigen::VectorXd* grad) {
  SequenceObjective obj(shape, detections, targets, cameras, config, frames);
  Eigen::VectorXd g(x.size());
  const double f = obj(x, g);
  if (grad) *grad = g;
  return f;
}

namespace {

KinfitResult optimize_window(const SkeletonShape& shape, const PoseSequence& initial,
                             const SequenceDetections* detections, const SequenceTargets* targets,
                             const std::vector<CameraParams>* cameras,
                             const KinfitConfig& config) {
  const int frames = static_cast<int>(initial.poses.size());
  SequenceObjective objective(shape, detections, targets, cameras, config, frames);
  const int fd = objective.frame_dim();

  Eigen::VectorXd x0(frames * fd);
  for (int t = 0; t < frames; ++t) pose_to_block(shape, initial.poses[t], x0, t);

  objective.set_strict(true);
  LbfgsOptions opts = config.lbfgs;
  opts.postprocess = [fd, frames](Eigen::VectorXd& x) {
    for (int t = 0; t < frames; ++t) {
      const double n = x.segment<4>(t * fd + 3).norm();
      if (n > 1e-12) x.segment<4>(t * fd + 3) /= n;
    }
  };
  auto wrapped = [&objective](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return objective(x, g);
  };
  const LbfgsResult lr = lbfgs_minimize(wrapped, x0, opts);

  KinfitResult result;
  result.sequence = initial;
  for (int t = 0; t < frames; ++t) {
    Pose p = pose_from_block(shape, lr.x, t);
    p.root_orientation.normalize();
    result.sequence.poses[t] = p;
  }
  result.cost_trace = lr.cost_trace;
  result.status = lr.status;
  Eigen::VectorXd g(lr.x.size());
  objective(lr.x, g);  // refresh term breakdown at the solution
  result.term_values = objective.terms();
  return result;
}

}  // namespace

KinfitResult optimize_sequence(const SkeletonShape& shape, const PoseSequence& initial,
                               const SequenceDetections& detections, const SequenceTargets& targets,
                               const std::vector<CameraParams>& cameras,
                               const KinfitConfig& config) {
  const auto& w = config.weights;
  if (w.w1 < 0 || w.w2 < 0 || w.w3 < 0 || w.w4 < 0 || w.w5 < 0 || w.w6 < 0) {
    throw Error("optimize_sequence: weights must be non-negative");
  }
  const int frames = static_cast<int>(initial.poses.size());
  if (frames == 0) throw Error("optimize_sequence: empty initial sequence");
  for (const auto& p : initial.poses) {
    if (p.joint_angles.size() != shape.total_angle_dofs()) {
      throw DimensionMismatch("initial sequence does not match skeleton DOFs");
    }
  }

  const auto* det = detections.empty() ? nullptr : &detections;
  const auto* tgt = targets.empty() ? nullptr : &targets;

  if (frames <= config.window) {
    return optimize_window(shape, initial, det, tgt, &cameras, config);
  }

  // Overlapping windows with blended seams.
  KinfitResult result;
  result.sequence = initial;
  const int step = std::max(1, config.window - config.window_blend);
  for (int start = 0; start < frames; start += step) {
    const int end = std::min(start + config.window, frames);
    PoseSequence win;
    win.frame_rate_hz = initial.frame_rate_hz;
    win.person_id = initial.person_id;
    for (int t = start; t < end; ++t) win.poses.push_back(result.sequence.poses[t]);
    SequenceDetections win_det;
    SequenceTargets win_tgt;
    if (det) win_det.assign(detections.begin() + start, detections.begin() + end);
    if (tgt) win_tgt.assign(targets.begin() + start, targets.begin() + end);
    KinfitResult wr = optimize_window(shape, win, det ? &win_det : nullptr,
                                      tgt ? &win_tgt : nullptr, &cameras, config);
    for (int t = start; t < end; ++t) {
      const Pose& fresh = wr.sequence.poses[t - start];
      if (start > 0 && t - start < config.window_blend) {
        const double u = static_cast<double>(t - start + 1) / (config.window_blend + 1);
        Pose& held = result.sequence.poses[t];
        held.root_position = (1 - u) * held.root_position + u * fresh.root_position;
        held.root_orientation = held.root_orientation.slerp(u, fresh.root_orientation);
        held.joint_angles = (1 - u) * held.joint_angles + u * fresh.joint_angles;
      } else {
        result.sequence.poses[t] = fresh;
      }
    }
    result.cost_trace.insert(result.cost_trace.end(), wr.cost_trace.begin(),
                             wr.cost_trace.end());
    result.status = wr.status;
    result.term_values = wr.term_values;
    if (end == frames) break;
  }
  return result;
}

namespace {

Eigen::Matrix3d kabsch(const std::vector<Eigen::Vector3d>& from,
                       const std::vector<Eigen::Vector3d>& to) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() > 0 ? 1.0 : -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

// Euler XYZ extraction of L = Rx(a) Ry(b) Rz(c).
Eigen::Vector3d euler_xyz_from(const Eigen::Matrix3d& l) {
  const double b = std::asin(std::clamp(l(0, 2), -1.0, 1.0));
  double a, c;
  if (std::abs(l(0, 2)) < 1.0 - 1e-9) {
    a = std::atan2(-l(1, 2), l(2, 2));
    c = std::atan2(-l(0, 1), l(0, 0));
  } else {  // gimbal: fold the twist into a
    a = std::atan2(l(2, 1), l(1, 1));
    c = 0.0;
  }
  return {a, b, c};
}

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// Both Euler branches of a rotation; the one closer to `previous` keeps the
// initialization temporally coherent.
Eigen::Vector3d euler_xyz_near(const Eigen::Matrix3d& l, const Eigen::Vector3d& previous) {
  const Eigen::Vector3d e = euler_xyz_from(l);
  const Eigen::Vector3d alt(wrap_pi(e(0) + M_PI), wrap_pi(M_PI - e(1)), wrap_pi(e(2) + M_PI));
  return (e - previous).norm() <= (alt - previous).norm() ? e : alt;
}

// Minimal rotation taking u to v (no twist about the bone axis, which child
// positions cannot observe).
Eigen::Matrix3d minimal_rotation(const Eigen::Vector3d& u_raw, const Eigen::Vector3d& v_raw) {
  const double un = u_raw.norm(), vn = v_raw.norm();
  if (un < 1e-12 || vn < 1e-12) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d u = u_raw / un, v = v_raw / vn;
  const Eigen::Vector3d axis = u.cross(v);
  const double s = axis.norm();
  const double c = u.dot(v);
  if (s < 1e-12) {
    if (c > 0) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(M_PI, u.unitOrthogonal()).toRotationMatrix();
  }
  return Eigen::AngleAxisd(std::atan2(s, c), axis / s).toRotationMatrix();
}

}  // namespace

PoseSequence initialize_sequence(const SkeletonShape& shape, const SequenceTargets& targets,
                                 double frame_rate_hz, int person_id) {
  PoseSequence seq;
  seq.frame_rate_hz = frame_rate_hz;
  seq.person_id = person_id;
  Pose prev = Pose::rest(shape);
  Eigen::Quaterniond prev_q = Eigen::Quaterniond::Identity();

  for (const auto& frame : targets) {
    const auto& tj = frame.joints;
    auto at = [&](int j) -> const Eigen::Vector3d* {
      return (j < static_cast<int>(tj.size()) && tj[j].has_value()) ? &tj[j]->position : nullptr;
    };
    Pose pose = prev;
    const Eigen::Vector3d* pelvis = at(0);
    if (pelvis) {
      pose.root_position = *pelvis;

      std::vector<Eigen::Vector3d> rest_dirs, obs_dirs;
      for (int c : shape.children(0)) {
        if (const auto* pc = at(c)) {
          rest_dirs.push_back(shape.joint(c).offset);
          obs_dirs.push_back(*pc - *pelvis);
        }
      }
      Eigen::Matrix3d r_root = prev_q.toRotationMatrix();
      if (rest_dirs.size() >= 2) r_root = kabsch(rest_dirs, obs_dirs);
      Eigen::Quaterniond q(r_root);
      if (q.dot(prev_q) < 0) q.coeffs() *= -1;
      pose.root_orientation = q;

      // World rotations accumulated while estimating each joint's local turn.
      std::vector<Eigen::Matrix3d> world_rot(shape.joint_count(), r_root);
      for (int j = 1; j < shape.joint_count(); ++j) {
        const auto& spec = shape.joint(j);
        const Eigen::Matrix3d& parent_rot = world_rot[spec.parent];
        const int off = shape.angle_offset(j);
        Eigen::Matrix3d local = Eigen::Matrix3d::Identity();
        if (!shape.is_leaf(j)) {
          const auto* pj = at(j);
          std::vector<Eigen::Vector3d> rest, obs;
          if (pj) {
            for (int c : shape.children(j)) {
              if (const auto* pc = at(c)) {
                rest.push_back(shape.joint(c).offset);
                obs.push_back(parent_rot.transpose() * (*pc - *pj));
              }
            }
          }
          if (!rest.empty()) {
            if (spec.dof == JointDof::Hinge) {
              const Eigen::Vector3d& a = spec.hinge_axis;
              double num = 0.0, den = 0.0;
              for (size_t i = 0; i < rest.size(); ++i) {
                num += a.dot(rest[i].cross(obs[i]));
                den += rest[i].dot(obs[i]) - a.dot(rest[i]) * a.dot(obs[i]);
              }
              double theta = std::atan2(num, den);
              theta = std::clamp(theta, spec.limit_lo(0), spec.limit_hi(0));
              pose.joint_angles(off) = theta;
              local = Eigen::AngleAxisd(theta, a).toRotationMatrix();
            } else {
              // Single child: the twist about the bone is unobservable, take
              // the minimal rotation. Multiple children determine it fully.
              const Eigen::Matrix3d fit = rest.size() == 1
                                              ? minimal_rotation(rest[0], obs[0])
                                              : kabsch(rest, obs);
              const Eigen::Vector3d prev_angles = pose.joint_angles.segment<3>(off);
              Eigen::Vector3d e = euler_xyz_near(fit, prev_angles);
              for (int k = 0; k < 3; ++k) {
                e(k) = std::clamp(e(k), spec.limit_lo(k), spec.limit_hi(k));
                pose.joint_angles(off + k) = e(k);
              }
              local = (Eigen::AngleAxisd(e(0), Eigen::Vector3d::UnitX()) *
                       Eigen::AngleAxisd(e(1), Eigen::Vector3d::UnitY()) *
                       Eigen::AngleAxisd(e(2), Eigen::Vector3d::UnitZ()))
                          .toRotationMatrix();
            }
          } else {
            // No observed children: keep the previous frame's local rotation.
            if (spec.dof == JointDof::Hinge) {
              local = Eigen::AngleAxisd(pose.joint_angles(off), spec.hinge_axis).toRotationMatrix();
            } else {
              local = (Eigen::AngleAxisd(pose.joint_angles(off), Eigen::Vector3d::UnitX()) *
                       Eigen::AngleAxisd(pose.joint_angles(off + 1), Eigen::Vector3d::UnitY()) *
                       Eigen::AngleAxisd(pose.joint_angles(off + 2), Eigen::Vector3d::UnitZ()))
                          .toRotationMatrix();
            }
          }
        }
        world_rot[j] = parent_rot * local;
      }
      prev_q = pose.root_orientation;
    }
    seq.poses.push_back(pose);
    prev = pose;
  }
  return seq;
}

}  // namespace mvmc
