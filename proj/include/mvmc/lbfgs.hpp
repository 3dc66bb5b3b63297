#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mvmc {

/// Objective callback: returns f(x) and fills grad (same size as x).
using LbfgsObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsOptions {
  int history = 100;
  int max_iterations = 200;
  double grad_tolerance = 1e-6;      // stop when ||g|| drops below
  double rel_cost_tolerance = 1e-9;  // stop when relative decrease drops below
  double initial_step = 1.0;         // first trial step of each line search
  double wolfe_c1 = 1e-4;            // sufficient decrease
  double wolfe_c2 = 0.9;             // curvature
  int max_line_search = 40;
  // Applied to x after every accepted step (e.g. quaternion renormalization).
  // Must leave the objective value unchanged.
  std::function<void(Eigen::VectorXd&)> postprocess;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  Eigen::VectorXd gradient;
  std::vector<double> cost_trace;  // accepted objective values, monotone non-increasing
  int iterations = 0;
  std::string status;  // "gradient", "cost", "max_iterations", "line_search"
};

/// Limited-memory BFGS with a strong-Wolfe line search (two-loop recursion,
/// bracketing + bisection zoom). Non-finite trial values are treated as
/// infinitely bad, so the search backs off rather than aborting.
inline LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, const Eigen::VectorXd& x0,
                                  const LbfgsOptions& opts = {}) {
  const double inf = std::numeric_limits<double>::infinity();
  auto safe_eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double f = objective(x, g);
    return std::isfinite(f) ? f : inf;
  };

  LbfgsResult res;
  res.x = x0;
  res.gradient.resize(x0.size());
  res.cost = safe_eval(res.x, res.gradient);
  res.cost_trace.push_back(res.cost);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter;
    if (res.gradient.norm() < opts.grad_tolerance) {
      res.status = "gradient";
      return res;
    }

    // Two-loop recursion.
    Eigen::VectorXd d = -res.gradient;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }

    double dg0 = res.gradient.dot(d);
    if (dg0 >= 0) {  // not a descent direction; fall back to steepest descent
      d = -res.gradient;
      dg0 = res.gradient.dot(d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Strong Wolfe line search on phi(t) = f(x + t d).
    Eigen::VectorXd g_trial(res.x.size());
    Eigen::VectorXd x_trial;
    const double f0 = res.cost;
    auto phi = [&](double t, double& dphi) {
      x_trial = res.x + t * d;
      const double f = safe_eval(x_trial, g_trial);
      dphi = std::isfinite(f) ? g_trial.dot(d) : inf;
      return f;
    };

    double t_prev = 0.0, f_prev = f0, dphi_prev = dg0;
    double t = opts.initial_step;
    double t_accept = -1.0, f_accept = 0.0;
    double lo = 0.0, hi = -1.0, f_lo = f0, dphi_lo = dg0;
    bool bracketed = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      double dphi_t;
      const double f_t = phi(t, dphi_t);
      if (f_t > f0 + opts.wolfe_c1 * t * dg0 || (ls > 0 && f_t >= f_prev)) {
        lo = t_prev, hi = t, f_lo = f_prev, dphi_lo = dphi_prev;
        bracketed = true;
        break;
      }
      if (std::abs(dphi_t) <= -opts.wolfe_c2 * dg0) {
        t_accept = t;
        f_accept = f_t;
        break;
      }
      if (dphi_t >= 0) {
        lo = t, hi = t_prev, f_lo = f_t, dphi_lo = dphi_t;
        bracketed = true;
        break;
      }
      t_prev = t, f_prev = f_t, dphi_prev = dphi_t;
      t *= 2.0;
    }
    if (bracketed) {
      for (int z = 0; z < opts.max_line_search; ++z) {
        const double tm = 0.5 * (lo + hi);
        double dphi_m;
        const double f_m = phi(tm, dphi_m);
        if (f_m > f0 + opts.wolfe_c1 * tm * dg0 || f_m >= f_lo) {
          hi = tm;
        } else {
          if (std::abs(dphi_m) <= -opts.wolfe_c2 * dg0) {
            t_accept = tm;
            f_accept = f_m;
            break;
          }
          if (dphi_m * (hi - lo) >= 0) hi = lo;
          lo = tm, f_lo = f_m, dphi_lo = dphi_m;
        }
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
      }
    }
    if (t_accept < 0) {
      // Wolfe conditions unattainable (flat or numerically exhausted): take
      // the best sufficient-decrease point if any, else stop.
      if (bracketed && f_lo < f0 && lo > 0) {
        t_accept = lo;
        double dphi_dummy;
        f_accept = phi(lo, dphi_dummy);
      } else {
        res.status = "line_search";
        return res;
      }
    }

    Eigen::VectorXd x_new = res.x + t_accept * d;
    Eigen::VectorXd g_new(res.x.size());
    double f_new;
    if (opts.postprocess) {
      opts.postprocess(x_new);
      f_new = safe_eval(x_new, g_new);
    } else if ((x_new - x_trial).norm() == 0.0) {
      f_new = f_accept;
      g_new = g_trial;
    } else {
      f_new = safe_eval(x_new, g_new);
    }

    Eigen::VectorXd s = x_new - res.x;
    Eigen::VectorXd y = g_new - res.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = res.cost - f_new;
    res.x = std::move(x_new);
    res.cost = f_new;
    res.gradient = std::move(g_new);
    res.cost_trace.push_back(res.cost);
    if (decrease >= 0 && decrease < opts.rel_cost_tolerance * std::max(1.0, std::abs(f0))) {
      res.status = "cost";
      res.iterations = iter + 1;
      return res;
    }
  }
  res.status = "max_iterations";
  res.iterations = opts.max_iterations;
  return res;
}

}  // namespace mvmc
