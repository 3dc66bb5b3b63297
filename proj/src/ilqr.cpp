#include "mvmc/ilqr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvmc/parallel.hpp"

namespace mvmc {

void dynamics_jacobians(const DynamicalSystem& system, int t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, Eigen::MatrixXd* a, Eigen::MatrixXd* b,
                        double h) {
  const int nt = system.tangent_dim();
  const int nu = system.control_dim();
  auto blocks = system.independent_blocks(x);
  if (blocks.empty()) {
    blocks.push_back({0, nt, 0, nu});
  }
  int max_t = 0, max_u = 0;
  for (const auto& blk : blocks) {
    max_t = std::max(max_t, blk.tangent_size);
    max_u = std::max(max_u, blk.control_size);
  }

  if (a) {
    a->resize(nt, nt);
    parallel_for(max_t, [&](int k) {
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(nt);
      for (const auto& blk : blocks) {
        if (k < blk.tangent_size) dx(blk.tangent_begin + k) = h;
      }
      const Eigen::VectorXd fp = system.step(t, system.state_add(x, dx), u);
      const Eigen::VectorXd fm = system.step(t, system.state_add(x, -dx), u);
      const Eigen::VectorXd col = system.state_diff(fp, fm) / (2.0 * h);
      for (const auto& blk : blocks) {
        if (k < blk.tangent_size) {
          a->col(blk.tangent_begin + k).setZero();
          a->block(blk.tangent_begin, blk.tangent_begin + k, blk.tangent_size, 1) =
              col.segment(blk.tangent_begin, blk.tangent_size);
        }
      }
    });
  }
  if (b) {
    b->resize(nt, nu);
    parallel_for(max_u, [&](int k) {
      Eigen::VectorXd du = Eigen::VectorXd::Zero(nu);
      for (const auto& blk : blocks) {
        if (k < blk.control_size) du(blk.control_begin + k) = h;
      }
      const Eigen::VectorXd fp = system.step(t, x, u + du);
      const Eigen::VectorXd fm = system.step(t, x, u - du);
      const Eigen::VectorXd col = system.state_diff(fp, fm) / (2.0 * h);
      for (const auto& blk : blocks) {
        if (k < blk.control_size) {
          b->col(blk.control_begin + k).setZero();
          b->block(blk.tangent_begin, blk.control_begin + k, blk.tangent_size, 1) =
              col.segment(blk.tangent_begin, blk.tangent_size);
        }
      }
    });
  }
}

double TrajectoryCostModel::total_cost(const std::vector<Eigen::VectorXd>& states,
                                       const std::vector<Eigen::VectorXd>& controls) const {
  double c = 0.0;
  for (size_t t = 0; t < controls.size(); ++t) c += stage_cost(static_cast<int>(t), states[t], controls[t]);
  c += final_cost(states.back());
  return c;
}

namespace {

struct Rollout {
  std::vector<Eigen::VectorXd> states;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> controls;
  bool finite = false;
};

Rollout roll(const DynamicalSystem& system, const TrajectoryCostModel& cost,
             const Eigen::VectorXd& x0, const std::vector<Eigen::VectorXd>& controls) {
  Rollout r;
  r.controls = controls;
  r.states.reserve(controls.size() + 1);
  r.states.push_back(x0);
  double c = 0.0;
  try {
    for (size_t t = 0; t < controls.size(); ++t) {
      c += cost.stage_cost(static_cast<int>(t), r.states.back(), controls[t]);
      r.states.push_back(system.step(static_cast<int>(t), r.states.back(), controls[t]));
    }
    c += cost.final_cost(r.states.back());
  } catch (const Error&) {
    return r;  // non-finite rollout
  }
  if (std::isfinite(c)) {
    r.cost = c;
    r.finite = true;
  }
  return r;
}

// Closed-loop rollout around a reference trajectory.
Rollout roll_feedback(const DynamicalSystem& system, const TrajectoryCostModel& cost,
                      const std::vector<Eigen::VectorXd>& ref_states,
                      const std::vector<Eigen::VectorXd>& ref_controls,
                      const std::vector<Eigen::MatrixXd>& gains_k,
                      const std::vector<Eigen::VectorXd>& ff_k, double alpha) {
  Rollout r;
  const size_t horizon = ref_controls.size();
  r.states.reserve(horizon + 1);
  r.controls.resize(horizon);
  r.states.push_back(ref_states[0]);
  double c = 0.0;
  try {
    for (size_t t = 0; t < horizon; ++t) {
      const Eigen::VectorXd dx = system.state_diff(r.states.back(), ref_states[t]);
      r.controls[t] = ref_controls[t] + alpha * ff_k[t] + gains_k[t] * dx;
      c += cost.stage_cost(static_cast<int>(t), r.states.back(), r.controls[t]);
      r.states.push_back(system.step(static_cast<int>(t), r.states.back(), r.controls[t]));
    }
    c += cost.final_cost(r.states.back());
  } catch (const Error&) {
    return r;
  }
  if (std::isfinite(c)) {
    r.cost = c;
    r.finite = true;
  }
  return r;
}

}  // namespace

TrajOptResult ilqr_optimize(const DynamicalSystem& system, const TrajectoryCostModel& cost,
                            const Eigen::VectorXd& x0,
                            const std::vector<Eigen::VectorXd>& initial_controls,
                            const IlqrConfig& config) {
  const int horizon = static_cast<int>(initial_controls.size());
  const int nt = system.tangent_dim();
  const int nu = system.control_dim();

  Rollout current = roll(system, cost, x0, initial_controls);
  if (!current.finite) {
    throw DivergedRollout("initial rollout is non-finite");
  }

  TrajOptResult result;
  result.cost_trace.push_back(current.cost);
  result.term_trace.push_back(cost.term_breakdown(current.states, current.controls));
  result.feedback_gains.assign(horizon, Eigen::MatrixXd::Zero(nu, nt));
  result.feedforward.assign(horizon, Eigen::VectorXd::Zero(nu));
  result.status = "max_iterations";

  double lambda = config.reg_init;
  std::vector<Eigen::MatrixXd> a_t(horizon), b_t(horizon);
  std::vector<Eigen::MatrixXd> gains(horizon);
  std::vector<Eigen::VectorXd> ff(horizon);

  int iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    // Linearize dynamics and quadraticize cost about the current trajectory.
    for (int t = 0; t < horizon; ++t) {
      dynamics_jacobians(system, t, current.states[t], current.controls[t], &a_t[t], &b_t[t],
                         config.fd_step);
    }

    // Backward pass with Levenberg regularization on Quu.
    bool pass_ok = false;
    while (!pass_ok) {
      pass_ok = true;
      auto vq = cost.final_quadratics(current.states.back());
      Eigen::VectorXd vx = vq.qx;
      Eigen::MatrixXd vxx = vq.qxx;
      for (int t = horizon - 1; t >= 0; --t) {
        const auto q = cost.quadratics(t, current.states[t], current.controls[t]);
        const Eigen::VectorXd qx = q.qx + a_t[t].transpose() * vx;
        const Eigen::VectorXd qu = q.qu + b_t[t].transpose() * vx;
        const Eigen::MatrixXd qxx = q.qxx + a_t[t].transpose() * vxx * a_t[t];
        const Eigen::MatrixXd quu = q.quu + b_t[t].transpose() * vxx * b_t[t];
        const Eigen::MatrixXd qux = q.qux + b_t[t].transpose() * vxx * a_t[t];
        Eigen::MatrixXd quu_reg = quu;
        quu_reg.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(quu_reg);
        if (llt.info() != Eigen::Success) {
          lambda *= 10.0;
          if (lambda > config.reg_max) {
            result.status = "stalled";
            result.states = current.states;
            result.controls = current.controls;
            result.cost = current.cost;
            result.iterations = iter;
            return result;
          }
          pass_ok = false;
          break;
        }
        gains[t] = -llt.solve(qux);
        ff[t] = -llt.solve(qu);
        vx = qx + gains[t].transpose() * quu * ff[t] + gains[t].transpose() * qu +
             qux.transpose() * ff[t];
        vxx = qxx + gains[t].transpose() * quu * gains[t] + gains[t].transpose() * qux +
              qux.transpose() * gains[t];
        vxx = 0.5 * (vxx + vxx.transpose()).eval();
      }
    }

    // Parallel line search: evaluate every candidate, take the best
    // non-worsening one.
    std::vector<double> alphas;
    for (double a = 1.0; a >= config.alpha_min * (1.0 - 1e-12); a *= 0.5) alphas.push_back(a);
    std::vector<Rollout> candidates(alphas.size());
    parallel_for(static_cast<int>(alphas.size()), [&](int i) {
      candidates[i] =
          roll_feedback(system, cost, current.states, current.controls, gains, ff, alphas[i]);
    });

    int best = -1;
    bool any_finite = false;
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (!candidates[i].finite) continue;
      any_finite = true;
      if (candidates[i].cost <= current.cost &&
          (best < 0 || candidates[i].cost < candidates[best].cost)) {
        best = static_cast<int>(i);
      }
    }
    if (best < 0) {
      // No acceptable candidate: strengthen the regularization and redo the
      // backward pass. Divergence of every candidate at the regularization
      // ceiling is terminal.
      lambda *= 10.0;
      if (lambda > config.reg_max) {
        if (!any_finite) {
          throw DivergedRollout("every line-search candidate diverged at iteration " +
                                std::to_string(iter));
        }
        result.status = "stalled";
        break;
      }
      continue;
    }

    const double improvement = current.cost - candidates[best].cost;
    current = std::move(candidates[best]);
    lambda = std::max(config.reg_min, lambda * 0.5);
    result.cost_trace.push_back(current.cost);
    result.term_trace.push_back(cost.term_breakdown(current.states, current.controls));
    result.feedback_gains = gains;
    result.feedforward = ff;

    double ff_mag = 0.0;
    for (int t = 0; t < horizon; ++t) {
      ff_mag = std::max(ff_mag, ff[t].lpNorm<Eigen::Infinity>() /
                                    (current.controls[t].lpNorm<Eigen::Infinity>() + 1.0));
    }
    if (improvement / std::max(1.0, std::abs(current.cost)) < config.rel_improvement_tol ||
        ff_mag < config.grad_tol) {
      result.status = "converged";
      ++iter;
      break;
    }
  }

  result.states = current.states;
  result.controls = current.controls;
  result.cost = current.cost;
  result.iterations = iter;
  return result;
}

}  // namespace mvmc
