#include "mvmc/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace mvmc {

Eigen::VectorXd pose_to_q(const HumanoidPhysicsModel& model, const SkeletonShape& shape,
                          const Pose& pose) {
  if (pose.joint_angles.size() != shape.total_angle_dofs()) {
    throw DimensionMismatch("pose does not match the skeleton");
  }
  Eigen::VectorXd q(model.nq());
  q.segment<3>(0) = pose.root_position;
  const Eigen::Quaterniond qr = pose.root_orientation.normalized();
  q(3) = qr.w();
  q(4) = qr.x();
  q(5) = qr.y();
  q(6) = qr.z();
  for (size_t b = 0; b < model.bodies().size(); ++b) {
    const auto& body = model.bodies()[b];
    if (body.joint == PhysJointType::Free) continue;
    const int nd = model.body_dofs(static_cast<int>(b));
    q.segment(7 + model.angle_offset(static_cast<int>(b)), nd) =
        pose.joint_angles.segment(shape.angle_offset(body.skeleton_joint), nd);
  }
  return q;
}

Pose q_to_pose(const HumanoidPhysicsModel& model, const SkeletonShape& shape,
               const Eigen::VectorXd& q_h) {
  Pose pose = Pose::rest(shape);
  pose.root_position = q_h.segment<3>(0);
  pose.root_orientation = Eigen::Quaterniond(q_h(3), q_h(4), q_h(5), q_h(6)).normalized();
  for (size_t b = 0; b < model.bodies().size(); ++b) {
    const auto& body = model.bodies()[b];
    if (body.joint == PhysJointType::Free) continue;
    const int nd = model.body_dofs(static_cast<int>(b));
    pose.joint_angles.segment(shape.angle_offset(body.skeleton_joint), nd) =
        q_h.segment(7 + model.angle_offset(static_cast<int>(b)), nd);
  }
  return pose;
}

namespace {

Eigen::Vector3d quat_log_diff(const Eigen::Vector4d& q2, const Eigen::Vector4d& q1) {
  // World-frame rotation taking q1 to q2 (matches the integrator).
  const Eigen::Quaterniond a(q1(0), q1(1), q1(2), q1(3));
  Eigen::Quaterniond b(q2(0), q2(1), q2(2), q2(3));
  if (b.dot(a) < 0) b.coeffs() *= -1;
  const Eigen::AngleAxisd aa(b * a.conjugate());
  return aa.angle() * aa.axis();
}

Eigen::Vector4d quat_boxplus(const Eigen::Vector4d& q, const Eigen::Vector3d& delta) {
  const double angle = delta.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, delta / angle));
  Eigen::Quaterniond out = dq * Eigen::Quaterniond(q(0), q(1), q(2), q(3));
  out.normalize();
  return {out.w(), out.x(), out.y(), out.z()};
}

}  // namespace

TrackingReference build_reference(const MultiHumanoidModel& sim,
                                  const std::vector<SkeletonShape>& shapes,
                                  const std::vector<PoseSequence>& sequences, double dt) {
  if (static_cast<int>(sequences.size()) != sim.count() ||
      static_cast<int>(shapes.size()) != sim.count()) {
    throw DimensionMismatch("one sequence and shape per humanoid required");
  }
  int frames = 0;
  for (const auto& seq : sequences) {
    frames = std::max(frames, static_cast<int>(seq.poses.size()));
  }
  if (frames < 2) throw TooShort("tracking needs at least 2 reference frames");

  // Per-humanoid retargeted configurations at the simulation rate.
  const double target_rate = 1.0 / dt;
  std::vector<std::vector<Eigen::VectorXd>> q_h(sim.count());
  int out_frames = 0;
  for (int h = 0; h < sim.count(); ++h) {
    const auto& seq = sequences[h];
    const int n = static_cast<int>(seq.poses.size());
    const double ratio = seq.frame_rate_hz / target_rate;
    const int m = ratio == 1.0 ? n : static_cast<int>(std::floor((n - 1) / ratio)) + 1;
    out_frames = out_frames == 0 ? m : std::min(out_frames, m);
    q_h[h].reserve(m);
    for (int i = 0; i < m; ++i) {
      const double s = i * ratio;
      const int t0 = std::min(static_cast<int>(s), n - 1);
      const int t1 = std::min(t0 + 1, n - 1);
      const double u = s - t0;
      Pose pose = seq.poses[t0];
      if (u > 0 && t1 > t0) {
        const Pose& b = seq.poses[t1];
        pose.root_position = (1 - u) * pose.root_position + u * b.root_position;
        pose.root_orientation = pose.root_orientation.slerp(u, b.root_orientation);
        pose.joint_angles = (1 - u) * pose.joint_angles + u * b.joint_angles;
      }
      q_h[h].push_back(pose_to_q(sim.humanoid(h), shapes[h], pose));
    }
  }

  TrackingReference ref;
  ref.dt = dt;
  for (int t = 0; t < out_frames; ++t) {
    Eigen::VectorXd q(sim.nq());
    for (int h = 0; h < sim.count(); ++h) {
      // Quaternion sign continuity across frames.
      if (t > 0) {
        const Eigen::Vector4d prev = q_h[h][t - 1].segment<4>(3);
        Eigen::Vector4d cur = q_h[h][t].segment<4>(3);
        if (prev.dot(cur) < 0) q_h[h][t].segment<4>(3) = -cur;
      }
      q.segment(sim.q_offset(h), sim.humanoid(h).nq()) = q_h[h][t];
    }
    ref.q.push_back(q);
  }
  for (int t = 0; t < out_frames; ++t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(sim.nv());
    const int a = t < out_frames - 1 ? t : t - 1;
    const int b = a + 1;
    for (int h = 0; h < sim.count(); ++h) {
      const int qo = sim.q_offset(h);
      const int vo = sim.v_offset(h);
      const auto& qa = ref.q[a];
      const auto& qb = ref.q[b];
      v.segment<3>(vo) = (qb.segment<3>(qo) - qa.segment<3>(qo)) / dt;
      v.segment<3>(vo + 3) =
          quat_log_diff(qb.segment<4>(qo + 3), qa.segment<4>(qo + 3)) / dt;
      const int na = sim.humanoid(h).nu();
      v.segment(vo + 6, na) =
          (qb.segment(qo + 7, na) - qa.segment(qo + 7, na)) / dt;
    }
    // Noisy reference guard: finite-difference spikes are not trackable.
    v = v.cwiseMax(-30.0).cwiseMin(30.0);
    ref.v.push_back(v);
  }
  // Boxcar smoothing: raw differences of a noisy kinematic reference carry
  // frame-rate jitter no controller should chase.
  if (out_frames >= 3) {
    std::vector<Eigen::VectorXd> smoothed(out_frames);
    for (int t = 0; t < out_frames; ++t) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(sim.nv());
      int n = 0;
      for (int s = std::max(0, t - 2); s <= std::min(out_frames - 1, t + 2); ++s) {
        acc += ref.v[s];
        ++n;
      }
      smoothed[t] = acc / n;
    }
    ref.v = std::move(smoothed);
  }
  for (int t = 0; t < out_frames; ++t) ref.points.push_back(tracked_points(sim, ref.q[t]));
  return ref;
}

Eigen::VectorXd tracked_points(const MultiHumanoidModel& sim, const Eigen::VectorXd& q) {
  const auto joints = sim.joint_positions(q);
  int total = 0;
  for (int h = 0; h < sim.count(); ++h) {
    total += 3 * sim.humanoid(h).skeleton_joint_count();
  }
  Eigen::VectorXd p(total);
  int at = 0;
  for (int h = 0; h < sim.count(); ++h) {
    const int qo = sim.q_offset(h);
    const Eigen::Vector3d root = q.segment<3>(qo);
    const Eigen::Matrix3d rot =
        Eigen::Quaterniond(q(qo + 3), q(qo + 4), q(qo + 5), q(qo + 6))
            .normalized()
            .toRotationMatrix();
    p.segment<3>(at) = root;
    at += 3;
    for (size_t j = 1; j < joints[h].size(); ++j) {
      p.segment<3>(at) = rot.transpose() * (joints[h][j] - root);
      at += 3;
    }
  }
  return p;
}

HumanoidTrackingSystem::HumanoidTrackingSystem(const MultiHumanoidModel& sim, double dt_frame,
                                               const TrackingReference* reference,
                                               int frame_offset, double hold_kp, double hold_kd,
                                               double decouple_clearance)
    : sim_(sim),
      dt_(dt_frame),
      reference_(reference),
      frame_offset_(frame_offset),
      hold_kp_(hold_kp),
      hold_kd_(hold_kd),
      decouple_clearance_(decouple_clearance) {}

Eigen::VectorXd HumanoidTrackingSystem::hold_torque(int t, const MultiHumanoidState& s) const {
  Eigen::VectorXd pd = Eigen::VectorXd::Zero(sim_.nu());
  if (!reference_ || (hold_kp_ == 0.0 && hold_kd_ == 0.0)) return pd;
  const int i =
      std::clamp(frame_offset_ + t, 0, static_cast<int>(reference_->q.size()) - 1);
  for (int h = 0; h < sim_.count(); ++h) {
    const int na = sim_.humanoid(h).nu();
    const int qo = sim_.q_offset(h);
    const int vo = sim_.v_offset(h);
    pd.segment(sim_.u_offset(h), na) =
        hold_kp_ * (reference_->q[i].segment(qo + 7, na) - s.q.segment(qo + 7, na)) -
        hold_kd_ * s.v.segment(vo + 6, na);
  }
  return pd;
}

Eigen::VectorXd HumanoidTrackingSystem::applied_control(int t, const Eigen::VectorXd& x,
                                                        const Eigen::VectorXd& u) const {
  return u + hold_torque(t, unpack(x));
}

void HumanoidTrackingSystem::applied_control_jacobian(Eigen::MatrixXd& jac) const {
  jac = Eigen::MatrixXd::Zero(sim_.nu(), tangent_dim());
  if (!reference_ || (hold_kp_ == 0.0 && hold_kd_ == 0.0)) return;
  for (int h = 0; h < sim_.count(); ++h) {
    const int na = sim_.humanoid(h).nu();
    const int vo = sim_.v_offset(h);
    const int nvh = sim_.humanoid(h).nv();
    for (int k = 0; k < na; ++k) {
      jac(sim_.u_offset(h) + k, 2 * vo + 6 + k) = -hold_kp_;
      jac(sim_.u_offset(h) + k, 2 * vo + nvh + 6 + k) = -hold_kd_;
    }
  }
}

Eigen::VectorXd HumanoidTrackingSystem::pack(const MultiHumanoidState& s) const {
  Eigen::VectorXd x(state_dim());
  x.head(sim_.nq()) = s.q;
  x.tail(sim_.nv()) = s.v;
  return x;
}

MultiHumanoidState HumanoidTrackingSystem::unpack(const Eigen::VectorXd& x) const {
  MultiHumanoidState s;
  s.q = x.head(sim_.nq());
  s.v = x.tail(sim_.nv());
  return s;
}

Eigen::VectorXd HumanoidTrackingSystem::step(int t, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& u) const {
  MultiHumanoidState s = unpack(x);
  const int n = std::max(1, sim_.params().substeps);
  for (int i = 0; i < n; ++i) {
    s = sim_.step(s, Control{u + hold_torque(t, s)}, dt_ / n);
  }
  return pack(s);
}

Eigen::VectorXd HumanoidTrackingSystem::state_add(const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& dx) const {
  Eigen::VectorXd out = x;
  for (int h = 0; h < sim_.count(); ++h) {
    const int qo = sim_.q_offset(h);
    const int vo = sim_.v_offset(h);
    const int nvh = sim_.humanoid(h).nv();
    const int na = sim_.humanoid(h).nu();
    const int tb = 2 * vo;  // tangent base of this humanoid
    out.segment<3>(qo) += dx.segment<3>(tb);
    out.segment<4>(qo + 3) = quat_boxplus(x.segment<4>(qo + 3), dx.segment<3>(tb + 3));
    out.segment(qo + 7, na) += dx.segment(tb + 6, na);
    out.segment(sim_.nq() + vo, nvh) += dx.segment(tb + nvh, nvh);
  }
  return out;
}

Eigen::VectorXd HumanoidTrackingSystem::state_diff(const Eigen::VectorXd& x2,
                                                   const Eigen::VectorXd& x1) const {
  Eigen::VectorXd d(tangent_dim());
  for (int h = 0; h < sim_.count(); ++h) {
    const int qo = sim_.q_offset(h);
    const int vo = sim_.v_offset(h);
    const int nvh = sim_.humanoid(h).nv();
    const int na = sim_.humanoid(h).nu();
    const int tb = 2 * vo;
    d.segment<3>(tb) = x2.segment<3>(qo) - x1.segment<3>(qo);
    d.segment<3>(tb + 3) = quat_log_diff(x2.segment<4>(qo + 3), x1.segment<4>(qo + 3));
    d.segment(tb + 6, na) = x2.segment(qo + 7, na) - x1.segment(qo + 7, na);
    d.segment(tb + nvh, nvh) =
        x2.segment(sim_.nq() + vo, nvh) - x1.segment(sim_.nq() + vo, nvh);
  }
  return d;
}

std::vector<DynamicalSystem::Block> HumanoidTrackingSystem::independent_blocks(
    const Eigen::VectorXd& x) const {
  if (sim_.count() < 2) return {};
  const bool decoupled =
      !sim_.params().cross_person_contacts ||
      sim_.cross_person_clearance(x.head(sim_.nq())) > decouple_clearance_;
  if (!decoupled) return {};
  std::vector<Block> blocks;
  for (int h = 0; h < sim_.count(); ++h) {
    Block b;
    b.tangent_begin = 2 * sim_.v_offset(h);
    b.tangent_size = 2 * sim_.humanoid(h).nv();
    b.control_begin = sim_.u_offset(h);
    b.control_size = sim_.humanoid(h).nu();
    blocks.push_back(b);
  }
  return blocks;
}

HumanoidTrackingCost::HumanoidTrackingCost(const HumanoidTrackingSystem& system,
                                           const TrackingReference& reference, int frame_offset,
                                           TrackingWeights weights)
    : system_(system), reference_(reference), frame_offset_(frame_offset), weights_(weights) {}

int HumanoidTrackingCost::ref_index(int t) const {
  const int i = frame_offset_ + t;
  return std::min(i, static_cast<int>(reference_.q.size()) - 1);
}

HumanoidTrackingCost::Terms HumanoidTrackingCost::evaluate(int t, const Eigen::VectorXd& x,
                                                           const Eigen::VectorXd* u) const {
  const auto& sim = system_.sim();
  const int i = ref_index(t);
  Terms terms;
  const Eigen::VectorXd v = x.tail(sim.nv());
  terms.reg_v = v.squaredNorm();
  if (u) terms.reg_u = system_.applied_control(t, x, *u).squaredNorm();
  terms.position = (tracked_points(sim, x.head(sim.nq())) - reference_.points[i]).squaredNorm();
  terms.velocity = (v - reference_.v[i]).squaredNorm();
  if (weights_.w4 > 0) {
    for (const auto& dg : sim.body_contact_depth_gradients(x.head(sim.nq()))) {
      terms.collision += dg.depth * dg.depth;
    }
  }
  return terms;
}

double HumanoidTrackingCost::stage_cost(int t, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& u) const {
  return evaluate(t, x, &u).total(weights_);
}

double HumanoidTrackingCost::final_cost(const Eigen::VectorXd& x) const {
  return evaluate(static_cast<int>(reference_.q.size()), x, nullptr).total(weights_);
}

HumanoidTrackingCost::Quadratics HumanoidTrackingCost::expand(int t, const Eigen::VectorXd& x,
                                                              const Eigen::VectorXd* u) const {
  const auto& sim = system_.sim();
  const int nt = system_.tangent_dim();
  const int nv = sim.nv();
  const int i = ref_index(t);

  Quadratics q;
  q.qx = Eigen::VectorXd::Zero(nt);
  q.qxx = Eigen::MatrixXd::Zero(nt, nt);
  if (u) {
    // The torque penalty acts on the applied control u + hold(x).
    const Eigen::VectorXd total = system_.applied_control(t, x, *u);
    Eigen::MatrixXd hold_jac;
    system_.applied_control_jacobian(hold_jac);
    q.qu = 2.0 * weights_.w1 * total;
    q.quu = 2.0 * weights_.w1 *
            Eigen::MatrixXd::Identity(system_.control_dim(), system_.control_dim());
    q.qux = 2.0 * weights_.w1 * hold_jac;
    q.qx += 2.0 * weights_.w1 * hold_jac.transpose() * total;
    q.qxx += 2.0 * weights_.w1 * hold_jac.transpose() * hold_jac;
  }

  // Velocity terms: tangent layout per humanoid [config(nvh), velocity(nvh)].
  const Eigen::VectorXd v = x.tail(nv);
  for (int h = 0; h < sim.count(); ++h) {
    const int vo = sim.v_offset(h);
    const int nvh = sim.humanoid(h).nv();
    const int tb = 2 * vo + nvh;
    q.qx.segment(tb, nvh) = 2.0 * weights_.w1 * v.segment(vo, nvh) +
                            2.0 * weights_.w3 *
                                (v.segment(vo, nvh) - reference_.v[i].segment(vo, nvh));
    q.qxx.block(tb, tb, nvh, nvh).diagonal().array() +=
        2.0 * (weights_.w1 + weights_.w3);
  }

  // Tracked points: analytic Jacobian w.r.t. the configuration tangent.
  const Eigen::VectorXd q_conf = x.head(sim.nq());
  int row = 0;
  for (int h = 0; h < sim.count(); ++h) {
    const auto jj = sim.joint_position_jacobians(q_conf, h);
    const int qo = sim.q_offset(h);
    const int nvh = sim.humanoid(h).nv();
    const int tb = 2 * sim.v_offset(h);
    const Eigen::Vector3d root = q_conf.segment<3>(qo);
    const Eigen::Matrix3d rot =
        Eigen::Quaterniond(q_conf(qo + 3), q_conf(qo + 4), q_conf(qo + 5), q_conf(qo + 6))
            .normalized()
            .toRotationMatrix();
    const int nj = sim.humanoid(h).skeleton_joint_count();
    Eigen::MatrixXd jac(3 * nj, nvh);
    Eigen::VectorXd resid(3 * nj);
    // Root point: world position, moves with root translation only.
    jac.setZero();
    jac.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
    resid.segment<3>(0) = root - reference_.points[i].segment<3>(row);
    for (int j = 1; j < nj; ++j) {
      // Interior joints in the root frame: invariant to the root transform.
      Eigen::Matrix3Xd dj = rot.transpose() * (jj.jacobians[j] - jj.jacobians[0]);
      dj.leftCols<6>().setZero();
      jac.block(3 * j, 0, 3, nvh) = dj;
      resid.segment<3>(3 * j) = rot.transpose() * (jj.positions[j] - root) -
                                reference_.points[i].segment<3>(row + 3 * j);
    }
    q.qx.segment(tb, nvh) += 2.0 * weights_.w2 * jac.transpose() * resid;
    q.qxx.block(tb, tb, nvh, nvh) += 2.0 * weights_.w2 * jac.transpose() * jac;
    row += 3 * nj;
  }

  // Body-body penetration: Gauss-Newton on the depth.
  if (weights_.w4 > 0) {
    for (const auto& dg : sim.body_contact_depth_gradients(q_conf)) {
      // Map the nv-wide gradient into the tangent layout (config slots).
      Eigen::VectorXd g = Eigen::VectorXd::Zero(nt);
      for (int h = 0; h < sim.count(); ++h) {
        const int vo = sim.v_offset(h);
        const int nvh = sim.humanoid(h).nv();
        g.segment(2 * vo, nvh) = dg.grad.segment(vo, nvh);
      }
      q.qx += 2.0 * weights_.w4 * dg.depth * g;
      q.qxx += 2.0 * weights_.w4 * g * g.transpose();
    }
  }
  return q;
}

HumanoidTrackingCost::Quadratics HumanoidTrackingCost::quadratics(int t, const Eigen::VectorXd& x,
                                                                  const Eigen::VectorXd& u) const {
  return expand(t, x, &u);
}

HumanoidTrackingCost::Quadratics HumanoidTrackingCost::final_quadratics(
    const Eigen::VectorXd& x) const {
  return expand(static_cast<int>(reference_.q.size()), x, nullptr);
}

std::map<std::string, double> HumanoidTrackingCost::term_breakdown(
    const std::vector<Eigen::VectorXd>& states,
    const std::vector<Eigen::VectorXd>& controls) const {
  Terms sum;
  for (size_t t = 0; t < states.size(); ++t) {
    const Eigen::VectorXd* u = t < controls.size() ? &controls[t] : nullptr;
    const Terms terms = evaluate(static_cast<int>(t), states[t], u);
    sum.reg_v += terms.reg_v;
    sum.reg_u += terms.reg_u;
    sum.position += terms.position;
    sum.velocity += terms.velocity;
    sum.collision += terms.collision;
  }
  return {{"reg", weights_.w1 * (sum.reg_v + sum.reg_u)},
          {"position", weights_.w2 * sum.position},
          {"velocity", weights_.w3 * sum.velocity},
          {"collision", weights_.w4 * sum.collision}};
}

std::pair<double, std::map<std::string, double>> trajectory_cost(
    const HumanoidTrackingSystem& system, const std::vector<Eigen::VectorXd>& states,
    const std::vector<Eigen::VectorXd>& controls, const TrackingReference& reference,
    const TrackingWeights& weights, int frame_offset) {
  if (states.size() != controls.size() + 1) {
    throw DimensionMismatch("trajectory_cost: need one more state than controls");
  }
  if (reference.q.size() < states.size() + frame_offset) {
    throw DimensionMismatch("trajectory_cost: reference does not cover the trajectory");
  }
  HumanoidTrackingCost cost(system, reference, frame_offset, weights);
  return {cost.total_cost(states, controls), cost.term_breakdown(states, controls)};
}

TrackingResult track_sequences(const MultiHumanoidModel& sim,
                               const std::vector<SkeletonShape>& shapes,
                               const std::vector<PoseSequence>& sequences,
                               const TrackingConfig& config) {
  const TrackingReference reference = build_reference(sim, shapes, sequences, config.dt);
  const int frames = static_cast<int>(reference.q.size());

  // Initial feedforward: gravity compensation at the reference posture (raw
  // finite-difference accelerations of a noisy reference are far too rough
  // to invert), plus cancellation of the hold's on-reference damping.
  std::vector<Eigen::VectorXd> controls(frames - 1, Eigen::VectorXd::Zero(sim.nu()));
  for (int t = 0; t + 1 < frames; ++t) {
    for (int h = 0; h < sim.count(); ++h) {
      const int qo = sim.q_offset(h);
      const int vo = sim.v_offset(h);
      const int nvh = sim.humanoid(h).nv();
      const int na = sim.humanoid(h).nu();
      const Eigen::VectorXd tau =
          sim.inverse_dynamics(h, reference.q[t].segment(qo, sim.humanoid(h).nq()),
                               Eigen::VectorXd::Zero(nvh), Eigen::VectorXd::Zero(nvh));
      controls[t].segment(sim.u_offset(h), na) =
          tau.tail(na) + config.hold_kd * reference.v[t].segment(vo + 6, na);
    }
  }

  TrackingResult result;
  result.states.reserve(frames);
  MultiHumanoidState x0;
  x0.q = reference.q[0];
  x0.v = reference.v[0];
  result.states.push_back(x0);

  int start = 0;
  while (start < frames - 1) {
    const int h_w = std::min(config.horizon, frames - 1 - start);
    std::vector<Eigen::VectorXd> window_controls(controls.begin() + start,
                                                 controls.begin() + start + h_w);
    HumanoidTrackingSystem system(sim, config.dt, &reference, start, config.hold_kp,
                                  config.hold_kd);
    HumanoidTrackingCost cost(system, reference, start, config.weights);
    TrajOptResult opt;
    try {
      opt = ilqr_optimize(system, cost, system.pack(result.states.back()), window_controls,
                          config.ilqr);
    } catch (const DivergedRollout&) {
      // Retry under the bare hold before giving up on the window.
      std::fill(window_controls.begin(), window_controls.end(),
                Eigen::VectorXd::Zero(sim.nu()));
      opt = ilqr_optimize(system, cost, system.pack(result.states.back()), window_controls,
                          config.ilqr);
    }
    result.cost_trace.insert(result.cost_trace.end(), opt.cost_trace.begin(),
                             opt.cost_trace.end());
    result.status = opt.status;

    const bool last_window = start + h_w >= frames - 1;
    const int commit = last_window ? h_w : std::max(1, h_w - config.overlap);
    for (int t = 0; t < commit; ++t) {
      controls[start + t] = opt.controls[t];
      MultiHumanoidState s = system.unpack(opt.states[t + 1]);
      s.time = (start + t + 1) * config.dt;
      result.states.push_back(s);
    }
    // Warm start for the overlap region of the next window.
    for (int t = commit; t < h_w; ++t) controls[start + t] = opt.controls[t];
    start += commit;
  }
  result.controls.assign(controls.begin(), controls.end());

  HumanoidTrackingSystem system(sim, config.dt, &reference, 0, config.hold_kp, config.hold_kd);
  std::vector<Eigen::VectorXd> packed;
  packed.reserve(result.states.size());
  for (const auto& s : result.states) packed.push_back(system.pack(s));
  result.final_terms =
      trajectory_cost(system, packed, result.controls, reference, config.weights).second;
  return result;
}

}  // namespace mvmc
