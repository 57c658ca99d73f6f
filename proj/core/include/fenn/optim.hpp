#pragma once

#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace fenn {

struct LbfgsConfig {
  int history_size = 100;
  double c1 = 1e-4;   // sufficient decrease
  double c2 = 0.9;    // curvature
  double initial_step = 1.0;
  double grad_tolerance = 1e-12;
  int max_line_search_evals = 25;
};

struct TrainState {
  int iteration = 0;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)
  double last_loss = 0.0;
  std::vector<double> loss_trace;
  std::vector<double> wall_ms;
  int consecutive_rejections = 0;
};

/// Returns loss at x and writes the gradient.
using LossGradFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// One L-BFGS step: two-loop recursion with gamma scaling, strong-Wolfe
/// cubic-interpolation line search. Returns false when the step was a no-op
/// (converged gradient) or was rejected by the line search; in the latter
/// case consecutive_rejections is incremented.
bool lbfgs_step(TrainState& state, Eigen::VectorXd& x, const LossGradFn& fn,
                const LbfgsConfig& config = {});

}  // namespace fenn
