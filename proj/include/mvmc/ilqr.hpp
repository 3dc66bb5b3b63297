#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "mvmc/error.hpp"

namespace mvmc {

/// Discrete-time dynamics with an optional manifold structure: states live in
/// an ambient vector (quaternions allowed), derivatives and feedback act on
/// the tangent via state_add / state_diff.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;
  virtual int state_dim() const = 0;    // ambient size
  virtual int tangent_dim() const = 0;  // differentiation/feedback size
  virtual int control_dim() const = 0;
  virtual Eigen::VectorXd step(int t, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd state_add(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
    return x + dx;
  }
  virtual Eigen::VectorXd state_diff(const Eigen::VectorXd& x2,
                                     const Eigen::VectorXd& x1) const {
    return x2 - x1;
  }

  /// Independent sub-systems at state x (e.g. humanoids out of contact
  /// range). Finite differencing perturbs one column of every block
  /// simultaneously. Empty = treat as fully coupled.
  struct Block {
    int tangent_begin = 0, tangent_size = 0;
    int control_begin = 0, control_size = 0;
  };
  virtual std::vector<Block> independent_blocks(const Eigen::VectorXd& x) const { return {}; }
};

/// Central finite-difference linearization about (x, u) with tangent-space
/// handling: A = df/dx (tangent), B = df/du. Columns of independent blocks
/// are probed together.
void dynamics_jacobians(const DynamicalSystem& system, int t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, Eigen::MatrixXd* a, Eigen::MatrixXd* b,
                        double h = 1e-6);

/// Stage/terminal costs with quadratic (Gauss-Newton) expansions in tangent
/// coordinates.
class TrajectoryCostModel {
 public:
  struct Quadratics {
    Eigen::VectorXd qx, qu;
    Eigen::MatrixXd qxx, quu, qux;
  };
  virtual ~TrajectoryCostModel() = default;
  virtual double stage_cost(int t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  virtual double final_cost(const Eigen::VectorXd& x) const = 0;
  virtual Quadratics quadratics(int t, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u) const = 0;
  virtual Quadratics final_quadratics(const Eigen::VectorXd& x) const = 0;
  virtual std::map<std::string, double> term_breakdown(
      const std::vector<Eigen::VectorXd>& states,
      const std::vector<Eigen::VectorXd>& controls) const {
    return {};
  }

  double total_cost(const std::vector<Eigen::VectorXd>& states,
                    const std::vector<Eigen::VectorXd>& controls) const;
};

struct IlqrConfig {
  int max_iterations = 100;
  double alpha_min = 1.0 / 64.0;
  double rel_improvement_tol = 1e-6;
  double grad_tol = 1e-6;              // on the feedforward magnitude
  double reg_init = 1e-6;
  double reg_min = 1e-6;
  double reg_max = 1e10;
  double fd_step = 1e-6;
};

struct TrajOptResult {
  std::vector<Eigen::VectorXd> states;    // T + 1, the accepted rollout
  std::vector<Eigen::VectorXd> controls;  // T
  double cost = 0.0;
  std::vector<double> cost_trace;                          // accepted per iteration
  std::vector<std::map<std::string, double>> term_trace;   // per iteration
  std::vector<Eigen::MatrixXd> feedback_gains;             // K_t of the final pass
  std::vector<Eigen::VectorXd> feedforward;                // k_t of the final pass
  std::string status;  // "converged", "max_iterations", "stalled"
  int iterations = 0;
};

/// Iterative LQR: finite-difference linearization, quadraticized cost,
/// Levenberg-regularized backward pass, and a parallel line search over
/// alpha in {1, 1/2, ..., alpha_min} that accepts the lowest-cost
/// non-worsening candidate. Throws DivergedRollout when the initial rollout
/// or every line-search candidate is non-finite.
TrajOptResult ilqr_optimize(const DynamicalSystem& system, const TrajectoryCostModel& cost,
                            const Eigen::VectorXd& x0,
                            const std::vector<Eigen::VectorXd>& initial_controls,
                            const IlqrConfig& config = {});

}  // namespace mvmc
