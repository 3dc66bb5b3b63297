#include <doctest.h>

#include "mvmc/ilqr.hpp"
#include "mvmc/rng.hpp"
#include "mvmc/tracking.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

// Planar double integrator: x = [p(2); v(2)], semi-implicit Euler.
class DoubleIntegrator : public DynamicalSystem {
 public:
  explicit DoubleIntegrator(double dt) : dt_(dt) {
    a_.setIdentity(4, 4);
    a_.block<2, 2>(0, 2) = dt_ * Eigen::Matrix2d::Identity();
    b_.setZero(4, 2);
    b_.block<2, 2>(0, 0) = dt_ * dt_ * Eigen::Matrix2d::Identity();
    b_.block<2, 2>(2, 0) = dt_ * Eigen::Matrix2d::Identity();
  }
  int state_dim() const override { return 4; }
  int tangent_dim() const override { return 4; }
  int control_dim() const override { return 2; }
  Eigen::VectorXd step(int, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return a_ * x + b_ * u;
  }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& b() const { return b_; }

 private:
  double dt_;
  Eigen::MatrixXd a_, b_;
};

class QuadraticCost : public TrajectoryCostModel {
 public:
  QuadraticCost(Eigen::MatrixXd q, Eigen::MatrixXd r, Eigen::MatrixXd qf)
      : q_(std::move(q)), r_(std::move(r)), qf_(std::move(qf)) {}
  double stage_cost(int, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return x.dot(q_ * x) + u.dot(r_ * u);
  }
  double final_cost(const Eigen::VectorXd& x) const override { return x.dot(qf_ * x); }
  Quadratics quadratics(int, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u) const override {
    Quadratics qq;
    qq.qx = 2.0 * q_ * x;
    qq.qu = 2.0 * r_ * u;
    qq.qxx = 2.0 * q_;
    qq.quu = 2.0 * r_;
    qq.qux = Eigen::MatrixXd::Zero(u.size(), x.size());
    return qq;
  }
  Quadratics final_quadratics(const Eigen::VectorXd& x) const override {
    Quadratics qq;
    qq.qx = 2.0 * qf_ * x;
    qq.qxx = 2.0 * qf_;
    return qq;
  }

 private:
  Eigen::MatrixXd q_, r_, qf_;
};

// Discrete-time finite-horizon LQR via the Riccati recursion.
std::vector<Eigen::VectorXd> riccati_controls(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                              const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                                              const Eigen::MatrixXd& qf,
                                              const Eigen::VectorXd& x0, int horizon) {
  std::vector<Eigen::MatrixXd> k(horizon);
  Eigen::MatrixXd p = qf;
  for (int t = horizon - 1; t >= 0; --t) {
    const Eigen::MatrixXd btp = b.transpose() * p;
    k[t] = (r + btp * b).ldlt().solve(btp * a);
    const Eigen::MatrixXd acl = a - b * k[t];
    p = q + k[t].transpose() * r * k[t] + acl.transpose() * p * acl;
  }
  std::vector<Eigen::VectorXd> us(horizon);
  Eigen::VectorXd x = x0;
  for (int t = 0; t < horizon; ++t) {
    us[t] = -k[t] * x;
    x = a * x + b * us[t];
  }
  return us;
}

}  // namespace

TEST_CASE("ilqr: double integrator matches the Riccati closed form") {
  const double dt = 0.05;
  DoubleIntegrator system(dt);
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd r = 0.1 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd qf = 10.0 * Eigen::MatrixXd::Identity(4, 4);
  QuadraticCost cost(q, r, qf);

  Eigen::VectorXd x0(4);
  x0 << 1.0, -0.5, 0.2, 0.0;
  const int horizon = 30;

  IlqrConfig cfg;
  cfg.reg_init = 1e-9;
  cfg.reg_min = 1e-9;
  const auto result = ilqr_optimize(system, cost,
                                    x0, std::vector<Eigen::VectorXd>(horizon, Eigen::Vector2d::Zero()), cfg);
  const auto lqr = riccati_controls(system.a(), system.b(), q, r, qf, x0, horizon);

  CHECK(result.iterations <= 3);
  double max_err = 0.0;
  for (int t = 0; t < horizon; ++t) {
    max_err = std::max(max_err, (result.controls[t] - lqr[t]).lpNorm<Eigen::Infinity>());
  }
  CHECK(max_err < 1e-6);
  CHECK(result.status == "converged");
}

TEST_CASE("ilqr: already-optimal controls terminate immediately with no worse cost") {
  const double dt = 0.05;
  DoubleIntegrator system(dt);
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd r = 0.1 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd qf = 10.0 * Eigen::MatrixXd::Identity(4, 4);
  QuadraticCost cost(q, r, qf);
  Eigen::VectorXd x0(4);
  x0 << 1.0, -0.5, 0.2, 0.0;
  const int horizon = 20;
  const auto lqr = riccati_controls(system.a(), system.b(), q, r, qf, x0, horizon);

  IlqrConfig cfg;
  cfg.reg_init = 1e-9;
  const auto result = ilqr_optimize(system, cost, x0, lqr, cfg);
  CHECK(result.iterations <= 1);
  CHECK(result.status == "converged");
  // Accepted alpha with no improvement still returns the optimal cost.
  CHECK(result.cost <= result.cost_trace.front() + 1e-12);
}

TEST_CASE("ilqr: returned trajectory replays through the dynamics") {
  const double dt = 0.05;
  DoubleIntegrator system(dt);
  QuadraticCost cost(Eigen::MatrixXd::Identity(4, 4), 0.1 * Eigen::MatrixXd::Identity(2, 2),
                     Eigen::MatrixXd::Identity(4, 4));
  Eigen::VectorXd x0(4);
  x0 << -0.3, 0.8, 0.0, 0.1;
  const auto result =
      ilqr_optimize(system, cost, x0, std::vector<Eigen::VectorXd>(25, Eigen::Vector2d::Zero()));
  for (size_t t = 0; t + 1 < result.states.size(); ++t) {
    const Eigen::VectorXd replay =
        system.step(static_cast<int>(t), result.states[t], result.controls[t]);
    CHECK((replay - result.states[t + 1]).lpNorm<Eigen::Infinity>() < 1e-9);
  }
  // Accepted cost trace is non-increasing.
  for (size_t i = 1; i < result.cost_trace.size(); ++i) {
    CHECK(result.cost_trace[i] <= result.cost_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("dynamics_jacobians: exact for linear dynamics") {
  DoubleIntegrator system(0.05);
  Eigen::MatrixXd a, b;
  Eigen::VectorXd x(4), u(2);
  x << 0.3, -0.2, 0.1, 0.4;
  u << 0.5, -0.1;
  dynamics_jacobians(system, 0, x, u, &a, &b);
  CHECK((a - system.a()).norm() < 1e-9);
  CHECK((b - system.b()).norm() < 1e-9);
}

TEST_CASE("dynamics_jacobians: humanoid system, free body block matches analytic") {
  // Single bone in free fall, no contacts: the linear-velocity block of
  // df/dx is dt * I on the position rows.
  std::vector<JointSpec> joints(2);
  joints[0].name = "base";
  joints[0].parent = -1;
  joints[1].name = "tip";
  joints[1].parent = 0;
  joints[1].offset = Eigen::Vector3d(0.4, 0, 0);
  joints[1].dof = JointDof::Ball;
  joints[1].limit_lo = Eigen::Vector3d::Constant(-3);
  joints[1].limit_hi = Eigen::Vector3d::Constant(3);
  MultiHumanoidModel sim({build_humanoid(SkeletonShape(joints))});
  sim.params().ground = false;
  sim.params().substeps = 1;
  const double dt = 1e-3;
  HumanoidTrackingSystem system(sim, dt);

  auto x = sim.default_state({{0, 0, 2.0}});
  Eigen::MatrixXd a, b;
  dynamics_jacobians(system, 0, system.pack(x), Eigen::VectorXd::Zero(0), &a, &b);
  // d(position)/d(linear velocity) = dt I at the top-right block of the
  // humanoid tangent [dq(6), dv(6)].
  CHECK((a.block<3, 3>(0, 6) - dt * Eigen::Matrix3d::Identity()).norm() < 1e-6);
  // d(velocity)/d(velocity) = I for the free body.
  CHECK((a.block<6, 6>(6, 6) - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-6);

  // Richardson: halving h scales the FD error ~4x (order 2). Probed at a
  // tumbling state and h large enough that truncation dominates roundoff.
  HumanoidTrackingSystem spinning(sim, 1e-2);
  x.v.segment<3>(3) = Eigen::Vector3d(2.0, 1.0, 1.5);
  x.v.segment<3>(0) = Eigen::Vector3d(0.5, -0.3, 0.2);
  Eigen::MatrixXd a1, a2, a3;
  dynamics_jacobians(spinning, 0, spinning.pack(x), Eigen::VectorXd::Zero(0), &a1, nullptr,
                     8e-2);
  dynamics_jacobians(spinning, 0, spinning.pack(x), Eigen::VectorXd::Zero(0), &a2, nullptr,
                     4e-2);
  dynamics_jacobians(spinning, 0, spinning.pack(x), Eigen::VectorXd::Zero(0), &a3, nullptr,
                     2e-2);
  const double order = std::log2((a1 - a2).norm() / (a2 - a3).norm());
  CHECK(order > 1.8);
}

TEST_CASE("dynamics_jacobians: zero-dt frame is the identity in tangent space") {
  std::vector<JointSpec> joints(2);
  joints[0].name = "base";
  joints[0].parent = -1;
  joints[1].name = "tip";
  joints[1].parent = 0;
  joints[1].offset = Eigen::Vector3d(0.4, 0, 0);
  joints[1].dof = JointDof::Ball;
  joints[1].limit_lo = Eigen::Vector3d::Constant(-3);
  joints[1].limit_hi = Eigen::Vector3d::Constant(3);
  MultiHumanoidModel sim({build_humanoid(SkeletonShape(joints))});
  HumanoidTrackingSystem system(sim, 0.0);
  auto x = sim.default_state({{0, 0, 1.0}});
  x.v.setConstant(0.2);
  Eigen::MatrixXd a, b;
  dynamics_jacobians(system, 0, system.pack(x), Eigen::VectorXd::Zero(0), &a, &b);
  CHECK((a - Eigen::MatrixXd::Identity(12, 12)).norm() < 1e-7);
  CHECK(b.norm() == 0.0);
}
