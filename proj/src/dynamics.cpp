#include "mvmc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mvmc {

namespace {

Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q) {
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
}

Eigen::Vector4d quat_integrate(const Eigen::Vector4d& q, const Eigen::Vector3d& omega_world,
                               double dt) {
  const Eigen::Vector3d rot = omega_world * dt;
  const double angle = rot.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle));
  Eigen::Quaterniond out = dq * Eigen::Quaterniond(q(0), q(1), q(2), q(3));
  out.normalize();
  return {out.w(), out.x(), out.y(), out.z()};
}

}  // namespace

MultiHumanoidModel::MultiHumanoidModel(std::vector<HumanoidPhysicsModel> humanoids,
                                       SimulationParams params)
    : humanoids_(std::move(humanoids)), params_(params) {
  q_off_.push_back(0);
  v_off_.push_back(0);
  u_off_.push_back(0);
  body_off_.push_back(0);
  for (const auto& model : humanoids_) {
    nq_ += model.nq();
    nv_ += model.nv();
    nu_ += model.nu();
    q_off_.push_back(nq_);
    v_off_.push_back(nv_);
    u_off_.push_back(nu_);
    body_off_.push_back(body_off_.back() + static_cast<int>(model.bodies().size()));

    // Expand bodies into single-DOF links: the free root, then per body a
    // hinge link or an X-Y-Z chain of revolutes (the last one carries the
    // body's mass and geometry).
    std::vector<Link> links;
    std::vector<int> body_link(model.bodies().size(), -1);
    std::vector<int> last_link_of_body(model.bodies().size(), -1);
    for (size_t b = 0; b < model.bodies().size(); ++b) {
      const RigidBody& body = model.bodies()[b];
      if (body.joint == PhysJointType::Free) {
        Link root;
        root.parent = -1;
        root.body = static_cast<int>(b);
        root.mass = body.mass;
        root.com = body.com;
        root.inertia = body.inertia;
        links.push_back(root);
        body_link[b] = 0;
        last_link_of_body[b] = 0;
        continue;
      }
      const int parent_link = last_link_of_body[body.parent];
      const int angle0 = model.angle_offset(static_cast<int>(b));
      if (body.joint == PhysJointType::Hinge) {
        Link l;
        l.parent = parent_link;
        l.body = static_cast<int>(b);
        l.q_index = angle0;
        l.axis = body.hinge_axis;
        l.anchor = body.anchor_in_parent;
        l.mass = body.mass;
        l.com = body.com;
        l.inertia = body.inertia;
        links.push_back(l);
      } else {
        const Eigen::Vector3d axes[3] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                         Eigen::Vector3d::UnitZ()};
        for (int k = 0; k < 3; ++k) {
          Link l;
          l.parent = k == 0 ? parent_link : static_cast<int>(links.size()) - 1;
          l.q_index = angle0 + k;
          l.axis = axes[k];
          l.anchor = k == 0 ? body.anchor_in_parent : Eigen::Vector3d::Zero();
          if (k == 2) {
            l.body = static_cast<int>(b);
            l.mass = body.mass;
            l.com = body.com;
            l.inertia = body.inertia;
          }
          links.push_back(l);
        }
      }
      body_link[b] = static_cast<int>(links.size()) - 1;
      last_link_of_body[b] = static_cast<int>(links.size()) - 1;
    }
    links_.push_back(std::move(links));
    body_link_.push_back(std::move(body_link));
  }
}

MultiHumanoidState MultiHumanoidModel::default_state(
    const std::vector<Eigen::Vector3d>& root_positions) const {
  MultiHumanoidState x;
  x.q = Eigen::VectorXd::Zero(nq_);
  x.v = Eigen::VectorXd::Zero(nv_);
  for (int h = 0; h < count(); ++h) {
    x.q.segment<3>(q_off_[h]) = root_positions.at(h);
    x.q(q_off_[h] + 3) = 1.0;  // identity quaternion
  }
  return x;
}

void MultiHumanoidModel::forward_kinematics_links(int h, const Eigen::VectorXd& q,
                                                  const Eigen::VectorXd* v,
                                                  std::vector<LinkState>& ls) const {
  const auto& links = links_[h];
  ls.resize(links.size());
  const int qo = q_off_[h];
  const int vo = v_off_[h];

  ls[0].origin = q.segment<3>(qo);
  ls[0].rot = quat_to_rot(q.segment<4>(qo + 3));
  ls[0].axis_w = Eigen::Vector3d::Zero();
  if (v) {
    ls[0].vel = v->segment<3>(vo);
    ls[0].omega = v->segment<3>(vo + 3);
  } else {
    ls[0].vel.setZero();
    ls[0].omega.setZero();
  }

  for (size_t l = 1; l < links.size(); ++l) {
    const Link& link = links[l];
    const LinkState& p = ls[link.parent];
    const double angle = q(qo + 7 + link.q_index);
    ls[l].origin = p.origin + p.rot * link.anchor;
    ls[l].axis_w = p.rot * link.axis;
    ls[l].rot = p.rot * Eigen::AngleAxisd(angle, link.axis).toRotationMatrix();
    if (v) {
      const double rate = (*v)(vo + 6 + link.q_index);
      ls[l].omega = p.omega + ls[l].axis_w * rate;
      ls[l].vel = p.vel + p.omega.cross(ls[l].origin - p.origin);
    } else {
      ls[l].omega.setZero();
      ls[l].vel.setZero();
    }
  }
}

Eigen::VectorXd MultiHumanoidModel::rnea(int h, const std::vector<LinkState>& ls,
                                         const Eigen::VectorXd& qdd,
                                         const std::vector<Eigen::Vector3d>& ext_force,
                                         const std::vector<Eigen::Vector3d>& ext_torque,
                                         double gravity) const {
  const auto& links = links_[h];
  const int n = static_cast<int>(links.size());
  const Eigen::Vector3d g(0, 0, -gravity);

  std::vector<Eigen::Vector3d> alpha(n), acc(n), f(n, Eigen::Vector3d::Zero()),
      tau_n(n, Eigen::Vector3d::Zero());
  alpha[0] = qdd.segment<3>(3);
  acc[0] = qdd.segment<3>(0);
  for (int l = 1; l < n; ++l) {
    const Link& link = links[l];
    const LinkState& s = ls[l];
    const LinkState& p = ls[link.parent];
    const double qdd_l = qdd(6 + link.q_index);
    const Eigen::Vector3d rel_omega = s.omega - p.omega;  // axis_w * rate
    alpha[l] = alpha[link.parent] + s.axis_w * qdd_l + p.omega.cross(rel_omega);
    acc[l] = acc[link.parent] + alpha[link.parent].cross(s.origin - p.origin) +
             p.omega.cross(s.vel - p.vel);
  }

  for (int l = 0; l < n; ++l) {
    const Link& link = links[l];
    if (link.mass <= 0.0) continue;
    const LinkState& s = ls[l];
    const Eigen::Vector3d r = s.rot * link.com;
    const Eigen::Vector3d acom = acc[l] + alpha[l].cross(r) + s.omega.cross(s.omega.cross(r));
    const Eigen::Vector3d force = link.mass * (acom - g);
    const Eigen::Matrix3d iw = s.rot * link.inertia * s.rot.transpose();
    const Eigen::Vector3d torque = iw * alpha[l] + s.omega.cross(iw * s.omega);
    f[l] += force;
    tau_n[l] += torque + r.cross(force);
  }
  for (int l = 0; l < n; ++l) {
    if (links[l].body >= 0) {
      f[l] -= ext_force[links[l].body];
      tau_n[l] -= ext_torque[links[l].body];
    }
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(humanoids_[h].nv());
  for (int l = n - 1; l >= 1; --l) {
    const Link& link = links[l];
    out(6 + link.q_index) = ls[l].axis_w.dot(tau_n[l]);
    const int p = link.parent;
    f[p] += f[l];
    tau_n[p] += tau_n[l] + (ls[l].origin - ls[p].origin).cross(f[l]);
  }
  out.segment<3>(0) = f[0];
  out.segment<3>(3) = tau_n[0];
  return out;
}

Eigen::MatrixXd MultiHumanoidModel::mass_matrix(int h, const std::vector<LinkState>& ls) const {
  const auto& links = links_[h];
  const int n = static_cast<int>(links.size());
  const int nv = humanoids_[h].nv();

  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  auto skew = [](const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
  };

  // Spatial inertia of each link about the world origin; composite up the tree.
  std::vector<Mat6> ic(n, Mat6::Zero());
  for (int l = 0; l < n; ++l) {
    if (links[l].mass <= 0.0) continue;
    const double m = links[l].mass;
    const Eigen::Vector3d c = ls[l].origin + ls[l].rot * links[l].com;
    const Eigen::Matrix3d iw = ls[l].rot * links[l].inertia * ls[l].rot.transpose();
    const Eigen::Matrix3d cx = skew(c);
    Mat6 io;
    io.topLeftCorner<3, 3>() = iw - m * cx * cx;
    io.topRightCorner<3, 3>() = m * cx;
    io.bottomLeftCorner<3, 3>() = -m * cx;
    io.bottomRightCorner<3, 3>() = m * Eigen::Matrix3d::Identity();
    ic[l] = io;
  }
  for (int l = n - 1; l >= 1; --l) ic[links[l].parent] += ic[l];

  // Motion subspaces in origin coordinates, [omega; v_origin].
  auto root_subspace = [&](int col) {
    Vec6 s = Vec6::Zero();
    if (col < 3) {
      s.tail<3>() = Eigen::Vector3d::Unit(col);
    } else {
      const Eigen::Vector3d e = Eigen::Vector3d::Unit(col - 3);
      s.head<3>() = e;
      s.tail<3>() = ls[0].origin.cross(e);
    }
    return s;
  };
  auto link_subspace = [&](int l) {
    Vec6 s;
    s.head<3>() = ls[l].axis_w;
    s.tail<3>() = ls[l].origin.cross(ls[l].axis_w);
    return s;
  };

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nv, nv);
  // Root block.
  for (int i = 0; i < 6; ++i) {
    const Vec6 fi = ic[0] * root_subspace(i);
    for (int j = i; j < 6; ++j) {
      m(i, j) = m(j, i) = root_subspace(j).dot(fi);
    }
  }
  // Revolute columns.
  for (int l = 1; l < n; ++l) {
    const int col = 6 + links[l].q_index;
    const Vec6 fl = ic[l] * link_subspace(l);
    m(col, col) = link_subspace(l).dot(fl);
    int a = links[l].parent;
    while (a >= 1) {
      const int row = 6 + links[a].q_index;
      m(row, col) = m(col, row) = link_subspace(a).dot(fl);
      a = links[a].parent;
    }
    for (int i = 0; i < 6; ++i) {
      m(i, col) = m(col, i) = root_subspace(i).dot(fl);
    }
  }
  return m;
}

ContactSet MultiHumanoidModel::collision_detect(const Eigen::VectorXd& q) const {
  ContactSet contacts;
  std::vector<std::vector<std::pair<int, Capsule>>> caps(count());
  for (int h = 0; h < count(); ++h) caps[h] = world_capsules(q, h);

  // Ground contacts.
  if (params_.ground) {
    for (int h = 0; h < count(); ++h) {
      for (const auto& [body, cap] : caps[h]) {
        CapsuleContact gc[2];
        const int n = capsule_ground_contacts(cap, gc);
        for (int i = 0; i < n; ++i) {
          contacts.push_back(Contact{body, -1, gc[i].depth, gc[i].point, gc[i].normal});
        }
      }
    }
  }

  // Within-humanoid pairs (exclusions applied) and cross-humanoid pairs.
  for (int ha = 0; ha < count(); ++ha) {
    for (int hb = ha; hb < count(); ++hb) {
      if (ha != hb && !params_.cross_person_contacts) continue;
      for (size_t i = 0; i < caps[ha].size(); ++i) {
        for (size_t j = (ha == hb ? i + 1 : size_t{0}); j < caps[hb].size(); ++j) {
          const int ga = caps[ha][i].first;
          const int gb = caps[hb][j].first;
          if (ga == gb) continue;  // capsules of one rigid body
          if (ha == hb) {
            const int la = ga - body_off_[ha];
            const int lb = gb - body_off_[hb];
            const auto& excl = humanoids_[ha].collision_exclusions();
            const auto key = std::minmax(la, lb);
            if (std::find(excl.begin(), excl.end(),
                          std::make_pair(key.first, key.second)) != excl.end()) {
              continue;
            }
          }
          const auto c = capsule_capsule_contact(caps[ha][i].second, caps[hb][j].second);
          if (c.has_value()) {
            // Contact normal points into body_a.
            contacts.push_back(Contact{ga, gb, c->depth, c->point, -c->normal});
          }
        }
      }
    }
  }
  std::sort(contacts.begin(), contacts.end(), [](const Contact& a, const Contact& b) {
    return a.body_a != b.body_a ? a.body_a < b.body_a : a.body_b < b.body_b;
  });
  return contacts;
}

std::vector<std::pair<int, Capsule>> MultiHumanoidModel::world_capsules(const Eigen::VectorXd& q,
                                                                        int h) const {
  std::vector<LinkState> ls;
  forward_kinematics_links(h, q, nullptr, ls);
  std::vector<std::pair<int, Capsule>> out;
  const auto& model = humanoids_[h];
  for (size_t b = 0; b < model.bodies().size(); ++b) {
    const LinkState& s = ls[body_link_[h][b]];
    for (const Capsule& local : model.bodies()[b].capsules) {
      Capsule w;
      w.p0 = s.origin + s.rot * local.p0;
      w.p1 = s.origin + s.rot * local.p1;
      w.radius = local.radius;
      out.emplace_back(body_off_[h] + static_cast<int>(b), w);
    }
  }
  return out;
}

void MultiHumanoidModel::accumulate_contact_forces(
    const MultiHumanoidState& x, const std::vector<std::vector<LinkState>>& ls,
    std::vector<Eigen::Vector3d>& force, std::vector<Eigen::Vector3d>& torque,
    std::vector<ContactForce>* record) const {
  const ContactSet contacts = collision_detect(x.q);

  auto body_humanoid = [&](int global) {
    int h = 0;
    while (global >= body_off_[h + 1]) ++h;
    return h;
  };
  auto link_state = [&](int global) -> const LinkState& {
    const int h = body_humanoid(global);
    return ls[h][body_link_[h][global - body_off_[h]]];
  };
  auto point_velocity = [&](int global, const Eigen::Vector3d& w) {
    const LinkState& s = link_state(global);
    return s.vel + s.omega.cross(w - s.origin);
  };
  auto apply = [&](int global, const Eigen::Vector3d& f_world, const Eigen::Vector3d& at) {
    const LinkState& s = link_state(global);
    force[global] += f_world;
    torque[global] += (at - s.origin).cross(f_world);
  };

  for (const Contact& c : contacts) {
    Eigen::Vector3d v_rel = point_velocity(c.body_a, c.point);
    if (c.body_b >= 0) v_rel -= point_velocity(c.body_b, c.point);
    const double vn = c.normal.dot(v_rel);
    const double fn = std::max(
        0.0, params_.contact_stiffness * c.depth - params_.contact_damping * vn);
    const Eigen::Vector3d vt = v_rel - vn * c.normal;
    const double vt_norm = std::max(vt.norm(), params_.friction_vel_eps);
    const Eigen::Vector3d ft = -params_.friction * fn * vt / vt_norm;
    apply(c.body_a, fn * c.normal + ft, c.point);
    if (c.body_b >= 0) apply(c.body_b, -(fn * c.normal + ft), c.point);
    if (record) record->push_back(ContactForce{c, fn * c.normal, ft});
  }
}

MultiHumanoidState MultiHumanoidModel::step(const MultiHumanoidState& x, const Control& u,
                                            double dt) const {
  if (dt < 0.0 || dt > 0.02) {
    throw Error("step: dt must lie in [0, 0.02], got " + std::to_string(dt));
  }
  if (x.q.size() != nq_ || x.v.size() != nv_ || u.u.size() != nu_) {
    throw DimensionMismatch("step: state/control dimensions do not match the model set");
  }
  if (dt == 0.0) return x;

  std::vector<std::vector<LinkState>> ls(count());
  for (int h = 0; h < count(); ++h) forward_kinematics_links(h, x.q, &x.v, ls[h]);

  // Contact handling is semi-implicit: the penalty spring is evaluated at the
  // end-of-step depth estimate and the damping and regularized-friction
  // parts, stiff on light distal bodies, are linear in the new velocity. All
  // of it folds into one SPD solve
  //   (M + dt J^T D J) v_new = M v + dt (tau - C) + dt k d J^T n.
  const ContactSet contacts = collision_detect(x.q);

  auto body_humanoid = [&](int global) {
    int h = 0;
    while (global >= body_off_[h + 1]) ++h;
    return h;
  };

  // Per-humanoid blocks: A_h = M_h + armature, rhs_h = A_h v + dt (tau - C).
  std::vector<Eigen::MatrixXd> a_blocks(count());
  std::vector<Eigen::VectorXd> rhs_blocks(count());
  for (int h = 0; h < count(); ++h) {
    const auto& model = humanoids_[h];
    const int vo = v_off_[h];
    const int na = model.nu();
    std::vector<Eigen::Vector3d> zero3(model.bodies().size(), Eigen::Vector3d::Zero());
    const Eigen::VectorXd bias =
        rnea(h, ls[h], Eigen::VectorXd::Zero(model.nv()), zero3, zero3, params_.gravity);
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(model.nv());
    tau.tail(na) = u.u.segment(u_off_[h], na);
    Eigen::MatrixXd m = mass_matrix(h, ls[h]);
    for (int k = 0; k < na; ++k) m(6 + k, 6 + k) += params_.armature;
    rhs_blocks[h] = m * x.v.segment(vo, model.nv()) + dt * (tau - bias);
    for (int k = 0; k < na; ++k) m(6 + k, 6 + k) += dt * params_.joint_damping;
    a_blocks[h] = std::move(m);
  }

  // Sparse contact Jacobian: nonzero columns of d(point velocity)/dv. Root
  // columns are [I | -skew(w - o_root)], revolute columns axis x (w - o_k)
  // along the path to the root.
  struct SparseJac {
    std::vector<int> cols;     // global v indices
    Eigen::Matrix3Xd j;
  };
  auto point_jacobian = [&](SparseJac& sj, int global, const Eigen::Vector3d& w, double sign) {
    const int h = body_humanoid(global);
    const int vo = v_off_[h];
    const auto& links = links_[h];
    std::vector<std::pair<int, Eigen::Vector3d>> entries;
    int l = body_link_[h][global - body_off_[h]];
    while (l >= 1) {
      entries.emplace_back(vo + 6 + links[l].q_index,
                           sign * ls[h][l].axis_w.cross(w - ls[h][l].origin));
      l = links[l].parent;
    }
    const int base = static_cast<int>(sj.cols.size());
    sj.cols.resize(base + 6 + entries.size());
    sj.j.conservativeResize(3, base + 6 + static_cast<int>(entries.size()));
    const Eigen::Vector3d arm = w - ls[h][0].origin;
    Eigen::Matrix3d sk;
    sk << 0, -arm.z(), arm.y(), arm.z(), 0, -arm.x(), -arm.y(), arm.x(), 0;
    for (int k = 0; k < 3; ++k) {
      sj.cols[base + k] = vo + k;
      sj.j.col(base + k) = sign * Eigen::Vector3d::Unit(k);
      sj.cols[base + 3 + k] = vo + 3 + k;
      sj.j.col(base + 3 + k) = -sign * sk.col(k);
    }
    for (size_t e = 0; e < entries.size(); ++e) {
      sj.cols[base + 6 + e] = entries[e].first;
      sj.j.col(base + 6 + e) = entries[e].second;
    }
  };

  bool coupled = false;
  struct ContactTerm {
    SparseJac jac;
    Eigen::Matrix3d d;
    Eigen::Vector3d rhs_force;
  };
  std::vector<ContactTerm> terms;
  terms.reserve(contacts.size());
  for (const Contact& c : contacts) {
    ContactTerm term;
    term.jac.j.resize(3, 0);
    point_jacobian(term.jac, c.body_a, c.point, 1.0);
    if (c.body_b >= 0) {
      point_jacobian(term.jac, c.body_b, c.point, -1.0);
      if (body_humanoid(c.body_a) != body_humanoid(c.body_b)) coupled = true;
    }
    Eigen::Vector3d v_rel = Eigen::Vector3d::Zero();
    for (size_t k = 0; k < term.jac.cols.size(); ++k) {
      v_rel += term.jac.j.col(k) * x.v(term.jac.cols[k]);
    }
    const double vn = c.normal.dot(v_rel);
    const double fn_pre = params_.contact_stiffness * c.depth - params_.contact_damping * vn;
    if (fn_pre <= 0.0) continue;  // separating; inactive this substep
    const Eigen::Vector3d vt = v_rel - vn * c.normal;
    const double c_t =
        params_.friction * fn_pre / std::max(vt.norm(), params_.friction_vel_eps);
    const Eigen::Matrix3d nn = c.normal * c.normal.transpose();
    term.d = (params_.contact_damping + dt * params_.contact_stiffness) * nn +
             c_t * (Eigen::Matrix3d::Identity() - nn);
    term.rhs_force = params_.contact_stiffness * c.depth * c.normal;
    terms.push_back(std::move(term));
  }

  auto scatter = [&](Eigen::MatrixXd& a, Eigen::VectorXd& rhs, int col_base) {
    for (const ContactTerm& term : terms) {
      const int m = static_cast<int>(term.jac.cols.size());
      const Eigen::Matrix3Xd dj = term.d * term.jac.j;
      for (int i = 0; i < m; ++i) {
        const int gi = term.jac.cols[i] - col_base;
        rhs(gi) += dt * term.jac.j.col(i).dot(term.rhs_force);
        for (int k = 0; k < m; ++k) {
          a(gi, term.jac.cols[k] - col_base) += dt * term.jac.j.col(i).dot(dj.col(k));
        }
      }
    }
  };

  Eigen::VectorXd v_new(nv_);
  if (!coupled) {
    // Independent humanoids: per-humanoid solves. Contacts touch only one
    // humanoid each, so scatter them into the owning block.
    for (int h = 0; h < count(); ++h) {
      const int vo = v_off_[h];
      const int n = humanoids_[h].nv();
      for (const ContactTerm& term : terms) {
        if (term.jac.cols[0] < vo || term.jac.cols[0] >= vo + n) continue;
        const int m = static_cast<int>(term.jac.cols.size());
        const Eigen::Matrix3Xd dj = term.d * term.jac.j;
        for (int i = 0; i < m; ++i) {
          const int gi = term.jac.cols[i] - vo;
          rhs_blocks[h](gi) += dt * term.jac.j.col(i).dot(term.rhs_force);
          for (int k = 0; k < m; ++k) {
            a_blocks[h](gi, term.jac.cols[k] - vo) += dt * term.jac.j.col(i).dot(dj.col(k));
          }
        }
      }
      v_new.segment(vo, n) = Eigen::LLT<Eigen::MatrixXd>(a_blocks[h]).solve(rhs_blocks[h]);
    }
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nv_, nv_);
    Eigen::VectorXd rhs(nv_);
    for (int h = 0; h < count(); ++h) {
      a.block(v_off_[h], v_off_[h], humanoids_[h].nv(), humanoids_[h].nv()) = a_blocks[h];
      rhs.segment(v_off_[h], humanoids_[h].nv()) = rhs_blocks[h];
    }
    scatter(a, rhs, 0);
    v_new = Eigen::LLT<Eigen::MatrixXd>(a).solve(rhs);
  }

  MultiHumanoidState out;
  out.q = x.q;
  out.v = v_new;
  out.time = x.time + dt;
  for (int h = 0; h < count(); ++h) {
    const auto& model = humanoids_[h];
    const int vo = v_off_[h];
    const int qo = q_off_[h];
    const int na = model.nu();
    out.q.segment<3>(qo) = x.q.segment<3>(qo) + dt * v_new.segment<3>(vo);
    out.q.segment<4>(qo + 3) =
        quat_integrate(x.q.segment<4>(qo + 3), v_new.segment<3>(vo + 3), dt);
    out.q.segment(qo + 7, na) = x.q.segment(qo + 7, na) + dt * v_new.segment(vo + 6, na);
  }
  for (int i = 0; i < out.q.size(); ++i) {
    if (!std::isfinite(out.q(i))) {
      throw NonFiniteState("q(" + std::to_string(i) + ") non-finite at t = " +
                           std::to_string(out.time));
    }
  }
  for (int i = 0; i < out.v.size(); ++i) {
    if (!std::isfinite(out.v(i))) {
      throw NonFiniteState("v(" + std::to_string(i) + ") non-finite at t = " +
                           std::to_string(out.time));
    }
  }
  return out;
}

MultiHumanoidState MultiHumanoidModel::step_frame(const MultiHumanoidState& x, const Control& u,
                                                  double dt_frame) const {
  const int n = std::max(1, params_.substeps);
  MultiHumanoidState s = x;
  for (int i = 0; i < n; ++i) s = step(s, u, dt_frame / n);
  return s;
}

std::vector<ContactForce> MultiHumanoidModel::contact_forces(const MultiHumanoidState& x) const {
  std::vector<std::vector<LinkState>> ls(count());
  for (int h = 0; h < count(); ++h) forward_kinematics_links(h, x.q, &x.v, ls[h]);
  std::vector<Eigen::Vector3d> f(total_bodies(), Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> t(total_bodies(), Eigen::Vector3d::Zero());
  std::vector<ContactForce> out;
  accumulate_contact_forces(x, ls, f, t, &out);
  return out;
}

std::vector<std::vector<Eigen::Vector3d>> MultiHumanoidModel::joint_positions(
    const Eigen::VectorXd& q) const {
  std::vector<std::vector<Eigen::Vector3d>> out(count());
  for (int h = 0; h < count(); ++h) {
    std::vector<LinkState> ls;
    forward_kinematics_links(h, q, nullptr, ls);
    const auto& model = humanoids_[h];
    out[h].assign(model.skeleton_joint_count(), Eigen::Vector3d::Zero());
    for (size_t b = 0; b < model.bodies().size(); ++b) {
      out[h][model.bodies()[b].skeleton_joint] = ls[body_link_[h][b]].origin;
    }
    for (const LeafSite& site : model.leaf_sites()) {
      const LinkState& s = ls[body_link_[h][site.body]];
      out[h][site.skeleton_joint] = s.origin + s.rot * site.offset;
    }
  }
  return out;
}

double MultiHumanoidModel::kinetic_energy(const MultiHumanoidState& x) const {
  double e = 0.0;
  for (int h = 0; h < count(); ++h) {
    std::vector<LinkState> ls;
    forward_kinematics_links(h, x.q, &x.v, ls);
    const auto& links = links_[h];
    for (size_t l = 0; l < links.size(); ++l) {
      if (links[l].mass <= 0.0) continue;
      const Eigen::Vector3d r = ls[l].rot * links[l].com;
      const Eigen::Vector3d v_com = ls[l].vel + ls[l].omega.cross(r);
      const Eigen::Matrix3d iw = ls[l].rot * links[l].inertia * ls[l].rot.transpose();
      e += 0.5 * links[l].mass * v_com.squaredNorm() + 0.5 * ls[l].omega.dot(iw * ls[l].omega);
    }
  }
  return e;
}

Eigen::Vector3d MultiHumanoidModel::linear_momentum(const MultiHumanoidState& x, int h) const {
  std::vector<LinkState> ls;
  forward_kinematics_links(h, x.q, &x.v, ls);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  const auto& links = links_[h];
  for (size_t l = 0; l < links.size(); ++l) {
    if (links[l].mass <= 0.0) continue;
    const Eigen::Vector3d r = ls[l].rot * links[l].com;
    p += links[l].mass * (ls[l].vel + ls[l].omega.cross(r));
  }
  return p;
}

MultiHumanoidModel::JointJacobians MultiHumanoidModel::joint_position_jacobians(
    const Eigen::VectorXd& q, int h) const {
  std::vector<LinkState> ls;
  forward_kinematics_links(h, q, nullptr, ls);
  const auto& model = humanoids_[h];
  const auto& links = links_[h];
  JointJacobians out;
  out.positions.assign(model.skeleton_joint_count(), Eigen::Vector3d::Zero());
  out.jacobians.assign(model.skeleton_joint_count(),
                       Eigen::Matrix3Xd::Zero(3, model.nv()));

  auto fill = [&](int joint, int carrying_link, const Eigen::Vector3d& w) {
    out.positions[joint] = w;
    auto& jac = out.jacobians[joint];
    jac.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
    const Eigen::Vector3d arm = w - ls[0].origin;
    Eigen::Matrix3d sk;
    sk << 0, -arm.z(), arm.y(), arm.z(), 0, -arm.x(), -arm.y(), arm.x(), 0;
    jac.block<3, 3>(0, 3) = -sk;
    int l = carrying_link;
    while (l >= 1) {
      jac.col(6 + links[l].q_index) = ls[l].axis_w.cross(w - ls[l].origin);
      l = links[l].parent;
    }
  };

  for (size_t b = 0; b < model.bodies().size(); ++b) {
    const int link = body_link_[h][b];
    // The joint position does not move with its own body's DOFs, so the
    // chain starts at the parent link.
    fill(model.bodies()[b].skeleton_joint, links[link].parent, ls[link].origin);
  }
  for (const LeafSite& site : model.leaf_sites()) {
    const int link = body_link_[h][site.body];
    fill(site.skeleton_joint, link, ls[link].origin + ls[link].rot * site.offset);
  }
  return out;
}

std::vector<MultiHumanoidModel::DepthGradient>
MultiHumanoidModel::body_contact_depth_gradients(const Eigen::VectorXd& q) const {
  std::vector<std::vector<LinkState>> ls(count());
  for (int h = 0; h < count(); ++h) forward_kinematics_links(h, q, nullptr, ls[h]);

  auto body_humanoid = [&](int global) {
    int h = 0;
    while (global >= body_off_[h + 1]) ++h;
    return h;
  };
  auto point_grad = [&](Eigen::VectorXd& grad, int global, const Eigen::Vector3d& w,
                        const Eigen::Vector3d& n, double sign) {
    const int h = body_humanoid(global);
    const int vo = v_off_[h];
    const auto& links = links_[h];
    grad.segment<3>(vo) += sign * n;
    grad.segment<3>(vo + 3) += sign * (w - ls[h][0].origin).cross(n);
    int l = body_link_[h][global - body_off_[h]];
    while (l >= 1) {
      grad(vo + 6 + links[l].q_index) +=
          sign * n.dot(ls[h][l].axis_w.cross(w - ls[h][l].origin));
      l = links[l].parent;
    }
  };

  std::vector<DepthGradient> out;
  for (const Contact& c : collision_detect(q)) {
    if (c.body_b < 0) continue;  // ground handled by the simulator, not the cost
    DepthGradient dg;
    dg.depth = c.depth;
    dg.body_a = c.body_a;
    dg.body_b = c.body_b;
    dg.grad = Eigen::VectorXd::Zero(nv_);
    // depth shrinks when body_a moves along the normal (which points into a).
    point_grad(dg.grad, c.body_a, c.point, c.normal, -1.0);
    point_grad(dg.grad, c.body_b, c.point, c.normal, 1.0);
    out.push_back(std::move(dg));
  }
  return out;
}

double MultiHumanoidModel::cross_person_clearance(const Eigen::VectorXd& q) const {
  if (count() < 2) return std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::pair<int, Capsule>>> caps(count());
  for (int h = 0; h < count(); ++h) caps[h] = world_capsules(q, h);
  double clearance = std::numeric_limits<double>::infinity();
  for (int ha = 0; ha < count(); ++ha) {
    for (int hb = ha + 1; hb < count(); ++hb) {
      for (const auto& [ba, ca] : caps[ha]) {
        for (const auto& [bb, cb] : caps[hb]) {
          const double d2 = segment_segment_closest(ca.p0, ca.p1, cb.p0, cb.p1, nullptr, nullptr);
          clearance = std::min(clearance, std::sqrt(d2) - ca.radius - cb.radius);
        }
      }
    }
  }
  return clearance;
}

Eigen::VectorXd MultiHumanoidModel::inverse_dynamics(int h, const Eigen::VectorXd& q_h,
                                                     const Eigen::VectorXd& v_h,
                                                     const Eigen::VectorXd& vdot_h) const {
  // Assemble a full-size q/v with this humanoid's segment populated.
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nq_);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nv_);
  for (int k = 0; k < count(); ++k) q(q_off_[k] + 3) = 1.0;
  q.segment(q_off_[h], humanoids_[h].nq()) = q_h;
  v.segment(v_off_[h], humanoids_[h].nv()) = v_h;
  std::vector<LinkState> ls;
  forward_kinematics_links(h, q, &v, ls);
  const int nb = static_cast<int>(humanoids_[h].bodies().size());
  std::vector<Eigen::Vector3d> zero(nb, Eigen::Vector3d::Zero());
  return rnea(h, ls, vdot_h, zero, zero, params_.gravity);
}

}  // namespace mvmc
