#include "fenn/optim.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fenn {

namespace {

// Cubic interpolation of a step within [lo, hi] from values/derivatives at
// the bracket ends; falls back to bisection when the cubic is degenerate or
// leaves the bracket interior.
double interpolate_step(double a_lo, double f_lo, double g_lo, double a_hi, double f_hi,
                        double g_hi) {
  const double d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
  const double disc = d1 * d1 - g_lo * g_hi;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), a_hi - a_lo);
    double a = a_hi - (a_hi - a_lo) * (g_hi + d2 - d1) / (g_hi - g_lo + 2.0 * d2);
    const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
    const double margin = 0.1 * (hi - lo);
    if (std::isfinite(a) && a > lo + margin && a < hi - margin) return a;
  }
  return 0.5 * (a_lo + a_hi);
}

}  // namespace

bool lbfgs_step(TrainState& state, Eigen::VectorXd& x, const LossGradFn& fn,
                const LbfgsConfig& config) {
  if (!(config.c1 > 0 && config.c1 < config.c2 && config.c2 < 1)) {
    throw std::runtime_error("lbfgs_step: need 0 < c1 < c2 < 1");
  }
  const auto t_start = std::chrono::steady_clock::now();
  auto record = [&](double loss) {
    state.last_loss = loss;
    state.loss_trace.push_back(loss);
    state.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count());
    ++state.iteration;
  };

  Eigen::VectorXd grad(x.size());
  const double f0 = fn(x, grad);
  if (!std::isfinite(f0) || !grad.allFinite()) {
    throw std::runtime_error("lbfgs_step: non-finite loss or gradient");
  }
  if (grad.norm() <= config.grad_tolerance) {
    record(f0);
    return false;
  }

  // Two-loop recursion.
  Eigen::VectorXd q = grad;
  const int m = static_cast<int>(state.pairs.size());
  std::vector<double> alpha(m);
  for (int i = m - 1; i >= 0; --i) {
    const auto& [s, y] = state.pairs[i];
    alpha[i] = s.dot(q) / y.dot(s);
    q -= alpha[i] * y;
  }
  if (m > 0) {
    const auto& [s, y] = state.pairs.back();
    q *= s.dot(y) / y.dot(y);
  }
  for (int i = 0; i < m; ++i) {
    const auto& [s, y] = state.pairs[i];
    const double beta = y.dot(q) / y.dot(s);
    q += (alpha[i] - beta) * s;
  }
  Eigen::VectorXd dir = -q;
  double dg0 = dir.dot(grad);
  if (dg0 >= 0) {  // not a descent direction; fall back to steepest descent
    dir = -grad;
    dg0 = dir.dot(grad);
  }

  // Strong-Wolfe line search (bracketing + zoom with cubic interpolation).
  Eigen::VectorXd x_trial(x.size());
  Eigen::VectorXd grad_trial(x.size());
  auto phi = [&](double step, double& dphi) {
    x_trial = x + step * dir;
    const double f = fn(x_trial, grad_trial);
    dphi = grad_trial.dot(dir);
    return f;
  };

  int evals = 0;
  double a_prev = 0.0, f_prev = f0, g_prev = dg0;
  double a = config.initial_step;
  double a_accept = -1.0, f_accept = 0.0;
  const double a_max = 1e6;

  double a_lo = -1, f_lo = 0, g_lo = 0, a_hi = -1, f_hi = 0, g_hi = 0;
  bool bracketed = false;
  while (evals < config.max_line_search_evals) {
    double ga;
    const double fa = phi(a, ga);
    ++evals;
    if (!std::isfinite(fa)) {  // shrink into the finite region
      a = 0.5 * (a_prev + a);
      continue;
    }
    if (fa > f0 + config.c1 * a * dg0 || (evals > 1 && fa >= f_prev)) {
      a_lo = a_prev; f_lo = f_prev; g_lo = g_prev;
      a_hi = a; f_hi = fa; g_hi = ga;
      bracketed = true;
      break;
    }
    if (std::abs(ga) <= -config.c2 * dg0) {
      a_accept = a;
      f_accept = fa;
      break;
    }
    if (ga >= 0) {
      a_lo = a; f_lo = fa; g_lo = ga;
      a_hi = a_prev; f_hi = f_prev; g_hi = g_prev;
      bracketed = true;
      break;
    }
    a_prev = a; f_prev = fa; g_prev = ga;
    a = std::min(2.0 * a, a_max);
  }

  if (bracketed && a_accept < 0) {
    while (evals < config.max_line_search_evals) {
      const double trial = interpolate_step(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi);
      double gt;
      const double ft = phi(trial, gt);
      ++evals;
      if (!std::isfinite(ft) || ft > f0 + config.c1 * trial * dg0 || ft >= f_lo) {
        a_hi = trial; f_hi = ft; g_hi = gt;
      } else {
        if (std::abs(gt) <= -config.c2 * dg0) {
          a_accept = trial;
          f_accept = ft;
          break;
        }
        if (gt * (a_hi - a_lo) >= 0) {
          a_hi = a_lo; f_hi = f_lo; g_hi = g_lo;
        }
        a_lo = trial; f_lo = ft; g_lo = gt;
      }
      if (std::abs(a_hi - a_lo) < 1e-16 * std::max(1.0, std::abs(a_lo))) break;
    }
    // Accept a plain sufficient-decrease point if the curvature condition was
    // never met inside the bracket.
    if (a_accept < 0 && a_lo > 0 && f_lo < f0) {
      double gt;
      f_accept = phi(a_lo, gt);
      a_accept = a_lo;
    }
  }

  if (a_accept <= 0 || f_accept > f0) {
    ++state.consecutive_rejections;
    record(f0);
    return false;
  }
  state.consecutive_rejections = 0;

  // x_trial/grad_trial hold the accepted point.
  const Eigen::VectorXd s = a_accept * dir;
  const Eigen::VectorXd y = grad_trial - grad;
  if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
    state.pairs.emplace_back(s, y);
    while (static_cast<int>(state.pairs.size()) > config.history_size) {
      state.pairs.pop_front();
    }
  }
  x = x_trial;
  record(f_accept);
  return true;
}

}  // namespace fenn
