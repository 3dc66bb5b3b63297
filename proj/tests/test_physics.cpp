#include <doctest.h>

#include "mvmc/dynamics.hpp"
#include "mvmc/rng.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

// Root joint plus one leaf: a single free rigid body (one capsule).
SkeletonShape single_bone(double length = 0.4) {
  std::vector<JointSpec> j(2);
  j[0].name = "base";
  j[0].parent = -1;
  j[1].name = "tip";
  j[1].parent = 0;
  j[1].offset = Eigen::Vector3d(length, 0, 0);
  j[1].dof = JointDof::Ball;
  j[1].limit_lo = Eigen::Vector3d::Constant(-3.0);
  j[1].limit_hi = Eigen::Vector3d::Constant(3.0);
  return SkeletonShape(j);
}

SkeletonShape scaled_skeleton(double scale) {
  std::vector<JointSpec> j(4);
  j[0].name = "root";
  j[0].parent = -1;
  j[1].name = "a";
  j[1].parent = 0;
  j[1].offset = scale * Eigen::Vector3d(0.4, 0, 0);
  j[2].name = "b";
  j[2].parent = 1;
  j[2].offset = scale * Eigen::Vector3d(0, 0.5, 0);
  j[3].name = "c";
  j[3].parent = 2;
  j[3].offset = scale * Eigen::Vector3d(0, 0, 0.3);
  for (int k = 1; k < 4; ++k) {
    j[k].dof = JointDof::Ball;
    j[k].limit_lo = Eigen::Vector3d::Constant(-3.0);
    j[k].limit_hi = Eigen::Vector3d::Constant(3.0);
  }
  return SkeletonShape(j);
}

MultiHumanoidState humanoid_rest_state(const MultiHumanoidModel& sim, double z = 1.0) {
  return sim.default_state({Eigen::Vector3d(0, 0, z)});
}

}  // namespace

TEST_CASE("capsule: volume and mass formula") {
  Capsule c{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.4, 0, 0), 0.048};
  const double r = 0.048, l = 0.4;
  CHECK(c.volume() ==
        doctest::Approx(M_PI * r * r * l + 4.0 / 3.0 * M_PI * r * r * r).epsilon(1e-12));
}

TEST_CASE("capsule: parallel overlap depth") {
  Capsule a{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), 0.06};
  Capsule b{Eigen::Vector3d(0, 0.1, 0), Eigen::Vector3d(1, 0.1, 0), 0.06};
  const auto c = capsule_capsule_contact(a, b);
  REQUIRE(c.has_value());
  CHECK(c->depth == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(c->normal.dot(Eigen::Vector3d::UnitY()) == doctest::Approx(1.0));
}

TEST_CASE("capsule: separated capsules produce no contact") {
  Capsule a{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), 0.05};
  Capsule b{Eigen::Vector3d(0, 0.5, 0), Eigen::Vector3d(1, 0.5, 0), 0.05};
  CHECK(!capsule_capsule_contact(a, b).has_value());
}

TEST_CASE("capsule: exact tangency to ground is a zero-depth contact") {
  Capsule c{Eigen::Vector3d(0, 0, 0.05), Eigen::Vector3d(0.3, 0, 0.5), 0.05};
  CapsuleContact out[2];
  const int n = capsule_ground_contacts(c, out);
  REQUIRE(n == 1);
  CHECK(out[0].depth == doctest::Approx(0.0));
}

TEST_CASE("capsule: segment-segment distance oracle") {
  CounterRng rng(211);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Vector3d a0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::Vector3d a1(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::Vector3d b0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::Vector3d b1(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double d2 = segment_segment_closest(a0, a1, b0, b1, nullptr, nullptr);
    // Brute force over a parameter grid.
    double best = 1e300;
    for (int i = 0; i <= 60; ++i) {
      for (int k = 0; k <= 60; ++k) {
        const Eigen::Vector3d pa = a0 + (a1 - a0) * (i / 60.0);
        const Eigen::Vector3d pb = b0 + (b1 - b0) * (k / 60.0);
        best = std::min(best, (pa - pb).squaredNorm());
      }
    }
    CHECK(d2 <= best + 1e-9);
    CHECK(d2 >= best - 2e-3);  // grid resolution slack
  }
}

TEST_CASE("build_humanoid: uniform 1.2x scale cubes the masses") {
  const auto m1 = build_humanoid(scaled_skeleton(1.0));
  const auto m2 = build_humanoid(scaled_skeleton(1.2));
  REQUIRE(m1.bodies().size() == m2.bodies().size());
  for (size_t b = 0; b < m1.bodies().size(); ++b) {
    CHECK(m2.bodies()[b].mass ==
          doctest::Approx(m1.bodies()[b].mass * 1.2 * 1.2 * 1.2).epsilon(1e-9));
  }
  CHECK(m2.total_mass() == doctest::Approx(m1.total_mass() * 1.728).epsilon(1e-9));
}

TEST_CASE("build_humanoid: single bone mass matches the capsule formula") {
  const auto model = build_humanoid(single_bone(0.4));
  REQUIRE(model.bodies().size() == 1);
  const double r = 0.048, l = 0.4;
  const double volume = M_PI * r * r * l + 4.0 / 3.0 * M_PI * r * r * r;
  CHECK(model.bodies()[0].capsules[0].radius == doctest::Approx(r));
  CHECK(model.bodies()[0].mass == doctest::Approx(985.0 * volume).epsilon(1e-12));
  CHECK(model.total_mass() == doctest::Approx(985.0 * volume).epsilon(1e-12));
}

TEST_CASE("build_humanoid: DOF bookkeeping") {
  const auto shape = default_skeleton();
  const auto model = build_humanoid(shape);
  int joint_dofs = 0;
  for (int j = 1; j < shape.joint_count(); ++j) {
    if (!shape.is_leaf(j)) joint_dofs += shape.dof_count(j);
  }
  CHECK(model.nv() == 6 + joint_dofs);
  CHECK(model.nq() == model.nv() + 1);
  CHECK(model.nu() == joint_dofs);
  // 985 kg/m^3 times the summed capsule volume.
  double volume = 0.0;
  for (const auto& b : model.bodies()) {
    for (const auto& c : b.capsules) volume += c.volume();
  }
  CHECK(model.total_mass() == doctest::Approx(985.0 * volume).epsilon(1e-12));
}

TEST_CASE("build_humanoid: degenerate bone throws") {
  CHECK_THROWS_AS(build_humanoid(single_bone(0.005)), DegenerateBone);
}

TEST_CASE("step: free fall matches 1/2 g t^2 within 2%") {
  MultiHumanoidModel sim({build_humanoid(single_bone())});
  sim.params().ground = false;
  MultiHumanoidState x = humanoid_rest_state(sim, 2.0);
  const Control u{Eigen::VectorXd::Zero(sim.nu())};
  const double dt = 1e-3;
  for (int i = 0; i < 300; ++i) x = sim.step(x, u, dt);
  const double drop = 2.0 - x.q(2);
  const double expected = 0.5 * 9.81 * 0.3 * 0.3;
  CHECK(std::abs(drop - expected) / expected < 0.02);
}

TEST_CASE("step: body resting at penalty equilibrium stays put") {
  MultiHumanoidModel sim({build_humanoid(single_bone())});
  const double mass = sim.humanoid(0).total_mass();
  const double r = sim.humanoid(0).bodies()[0].capsules[0].radius;
  // Horizontal capsule: two endpoint contacts share the weight.
  const double depth = mass * 9.81 / (2.0 * sim.params().contact_stiffness);
  MultiHumanoidState x = humanoid_rest_state(sim, r - depth);
  const Control u{Eigen::VectorXd::Zero(sim.nu())};
  const double z0 = x.q(2);
  for (int i = 0; i < 1000; ++i) x = sim.step(x, u, 1e-3);
  CHECK(std::abs(x.q(2) - z0) < 1e-3);
}

TEST_CASE("step: force-free spin conserves kinetic energy within 1% over 1 s") {
  MultiHumanoidModel sim({build_humanoid(single_bone())});
  sim.params().gravity = 0.0;
  sim.params().ground = false;
  MultiHumanoidState x = humanoid_rest_state(sim, 1.0);
  x.v.segment<3>(3) = Eigen::Vector3d(1.0, 2.0, 0.5);
  const Control u{Eigen::VectorXd::Zero(sim.nu())};
  const double e0 = sim.kinetic_energy(x);
  for (int i = 0; i < 2000; ++i) x = sim.step(x, u, 5e-4);
  const double e1 = sim.kinetic_energy(x);
  CHECK(std::abs(e1 - e0) / e0 < 0.01);
}

TEST_CASE("step: linear momentum conserved for a tumbling humanoid") {
  MultiHumanoidModel sim({build_humanoid(default_skeleton())});
  sim.params().gravity = 0.0;
  sim.params().ground = false;
  sim.params().joint_damping = 0.0;
  MultiHumanoidState x = humanoid_rest_state(sim, 1.0);
  CounterRng rng(223);
  for (int i = 0; i < x.v.size(); ++i) x.v(i) = 0.2 * rng.normal();
  const Control u{Eigen::VectorXd::Zero(sim.nu())};
  const Eigen::Vector3d p0 = sim.linear_momentum(x, 0);
  for (int i = 0; i < 1000; ++i) x = sim.step(x, u, 1e-5);
  const Eigen::Vector3d p1 = sim.linear_momentum(x, 0);
  CHECK((p1 - p0).norm() / p0.norm() < 1e-6);
}

TEST_CASE("mass matrix columns agree with inverse dynamics") {
  // CRBA (spatial composite inertias) vs Newton-Euler recursion: column j of
  // M equals the generalized force for unit acceleration e_j at zero
  // velocity and zero gravity.
  MultiHumanoidModel sim({build_humanoid(default_skeleton())});
  sim.params().gravity = 0.0;
  CounterRng rng(227);
  const auto& model = sim.humanoid(0);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXd q(model.nq());
    q.segment<3>(0) = Eigen::Vector3d(rng.normal(), rng.normal(), 1.0 + rng.uniform());
    Eigen::Quaterniond quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    quat.normalize();
    q(3) = quat.w();
    q(4) = quat.x();
    q(5) = quat.y();
    q(6) = quat.z();
    for (int i = 7; i < model.nq(); ++i) q(i) = 0.5 * rng.normal();
    const Eigen::VectorXd v = Eigen::VectorXd::Zero(model.nv());

    // Reconstruct M column-by-column through inverse_dynamics (gravity off).
    const double g_saved = sim.params().gravity;
    sim.params().gravity = 0.0;
    Eigen::MatrixXd m_id(model.nv(), model.nv());
    for (int j = 0; j < model.nv(); ++j) {
      m_id.col(j) = sim.inverse_dynamics(0, q, v, Eigen::VectorXd::Unit(model.nv(), j));
    }
    sim.params().gravity = g_saved;

    // M from a zero-torque, zero-gravity step is not directly exposed;
    // instead verify symmetry and positive definiteness of the recovered
    // matrix and the consistency of a forward step with it.
    CHECK((m_id - m_id.transpose()).norm() < 1e-8 * m_id.norm());
    Eigen::LLT<Eigen::MatrixXd> llt(m_id);
    CHECK(llt.info() == Eigen::Success);

    // Forward consistency: step with zero torque/gravity from (q, v=0) gives
    // v_new = -dt M^{-1} C = 0 since C(q, 0) = 0 without gravity.
    MultiHumanoidState x;
    x.q = q;
    x.v = v;
    sim.params().gravity = 0.0;
    sim.params().ground = false;
    sim.params().contact_stiffness = 0.0;  // random poses can self-intersect
    sim.params().contact_damping = 0.0;
    const Control u0{Eigen::VectorXd::Zero(sim.nu())};
    const auto stepped = sim.step(x, u0, 1e-3);
    CHECK(stepped.v.norm() < 1e-12);
    sim.params().gravity = g_saved;
  }
}

TEST_CASE("step: determinism") {
  MultiHumanoidModel sim({build_humanoid(default_skeleton())});
  MultiHumanoidState x = humanoid_rest_state(sim, 0.94);
  CounterRng rng(229);
  Control u{Eigen::VectorXd::Zero(sim.nu())};
  for (int i = 0; i < u.u.size(); ++i) u.u(i) = rng.normal();
  auto a = sim.step_frame(x, u, 1.0 / 60.0);
  auto b = sim.step_frame(x, u, 1.0 / 60.0);
  CHECK(a.q == b.q);
  CHECK(a.v == b.v);
}

TEST_CASE("step: dt validation and zero-dt no-op") {
  MultiHumanoidModel sim({build_humanoid(single_bone())});
  MultiHumanoidState x = humanoid_rest_state(sim, 1.0);
  const Control u{Eigen::VectorXd::Zero(sim.nu())};
  CHECK_THROWS_AS(sim.step(x, u, 0.05), Error);
  const auto same = sim.step(x, u, 0.0);
  CHECK(same.q == x.q);
  CHECK(same.v == x.v);
}

TEST_CASE("collision_detect: separated humanoids have no cross contacts") {
  const auto shape = default_skeleton();
  MultiHumanoidModel sim({build_humanoid(shape), build_humanoid(shape)});
  auto x = sim.default_state({{0, 0, 2.0}, {3.0, 0, 2.0}});
  for (const auto& c : sim.collision_detect(x.q)) {
    CHECK(c.body_b < 0);  // only potential ground contacts, no body pairs
  }
}

TEST_CASE("collision_detect: rest pose has no self contacts") {
  const auto shape = default_skeleton();
  MultiHumanoidModel sim({build_humanoid(shape)});
  auto x = sim.default_state({{0, 0, 2.0}});
  CHECK(sim.collision_detect(x.q).empty());
}

TEST_CASE("collision_detect: overlapping humanoids report ordered cross contacts") {
  const auto shape = default_skeleton();
  MultiHumanoidModel sim({build_humanoid(shape), build_humanoid(shape)});
  auto x = sim.default_state({{0, 0, 2.0}, {0.12, 0, 2.0}});
  const auto contacts = sim.collision_detect(x.q);
  REQUIRE(!contacts.empty());
  for (size_t i = 1; i < contacts.size(); ++i) {
    const bool ordered = contacts[i - 1].body_a < contacts[i].body_a ||
                         (contacts[i - 1].body_a == contacts[i].body_a &&
                          contacts[i - 1].body_b <= contacts[i].body_b);
    CHECK(ordered);
  }
  for (const auto& c : contacts) CHECK(c.depth >= 0.0);
}

TEST_CASE("contacts: normal force non-negative, friction inside the cone while standing") {
  MultiHumanoidModel sim({build_humanoid(default_skeleton())});
  // Stand on the ground under a PD hold toward the rest pose.
  MultiHumanoidState x = humanoid_rest_state(sim, 0.885);
  const Eigen::VectorXd q_hold = x.q.tail(sim.nu());
  Control u{Eigen::VectorXd::Zero(sim.nu())};
  int contact_steps = 0;
  for (int i = 0; i < 1000; ++i) {
    u.u = 50.0 * (q_hold - x.q.tail(sim.nu())) - 0.5 * x.v.tail(sim.nu());
    x = sim.step(x, u, 1e-3);
    for (const auto& cf : sim.contact_forces(x)) {
      CHECK(cf.normal_force.dot(cf.contact.normal) >= 0.0);
      CHECK(cf.friction_force.norm() <=
            sim.params().friction * cf.normal_force.norm() + 1e-9);
      ++contact_steps;
    }
  }
  CHECK(contact_steps > 500);     // the scenario actually exercises contacts
  CHECK(x.q(2) > 0.5);            // still upright
}

TEST_CASE("joint_positions: matches skeleton FK at the rest configuration") {
  const auto shape = default_skeleton();
  MultiHumanoidModel sim({build_humanoid(shape)});
  auto x = sim.default_state({{0.3, -0.2, 1.1}});
  const auto phys = sim.joint_positions(x.q)[0];
  Pose rest = Pose::rest(shape);
  rest.root_position = Eigen::Vector3d(0.3, -0.2, 1.1);
  const auto kin = forward_kinematics(shape, rest);
  REQUIRE(static_cast<int>(phys.size()) == shape.joint_count());
  for (int j = 0; j < shape.joint_count(); ++j) {
    CHECK((phys[j] - kin.positions[j]).norm() < 1e-12);
  }
}
