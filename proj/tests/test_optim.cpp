#include <doctest.h>

#include <cmath>
#include <random>

#include "fenn/optim.hpp"

using namespace fenn;

namespace {

LossGradFn quadratic(const Eigen::MatrixXd& h, const Eigen::VectorXd& b) {
  return [h, b](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = h * x - b;
    return 0.5 * x.dot(h * x) - b.dot(x);
  };
}

}  // namespace

TEST_CASE("diagonal quadratic converges quickly") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 2);
  h(0, 0) = 1;
  h(1, 1) = 10;
  Eigen::VectorXd b(2);
  b << 1, -2;
  const Eigen::VectorXd solution = h.ldlt().solve(b);

  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 5.0);
  const LossGradFn fn = quadratic(h, b);
  for (int i = 0; i < 20; ++i) {
    if (!lbfgs_step(state, x, fn)) break;
  }
  CHECK((x - solution).norm() <= 1e-10);
}

TEST_CASE("a converged point is a no-op") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK_FALSE(lbfgs_step(state, x, quadratic(h, b)));
  CHECK(x.cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.consecutive_rejections == 0);  // convergence is not a rejection
}

TEST_CASE("random convex quadratics reach the solver tolerance") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 6;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
  const Eigen::MatrixXd h = m * m.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = normal(rng);
  const Eigen::VectorXd solution = h.ldlt().solve(b);

  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const LossGradFn fn = quadratic(h, b);
  int used = 0;
  for (; used < 3 * n; ++used) {
    if (!lbfgs_step(state, x, fn)) break;
  }
  CHECK((x - solution).norm() <= 1e-8 * (1 + solution.norm()));
  CHECK(used <= 3 * n);
}

TEST_CASE("the loss trace decreases monotonically on a smooth objective") {
  // Quartic bowl with cross terms.
  const LossGradFn fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = x[0] - 1, b = x[1] + 2;
    grad.resize(2);
    grad[0] = 4 * a * a * a + b;
    grad[1] = 4 * b * b * b + a;
    return a * a * a * a + b * b * b * b + a * b;
  };
  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 3.0);
  for (int i = 0; i < 60; ++i) {
    if (!lbfgs_step(state, x, fn)) break;
  }
  REQUIRE(state.loss_trace.size() >= 2);
  for (std::size_t i = 1; i < state.loss_trace.size(); ++i) {
    CHECK(state.loss_trace[i] <= state.loss_trace[i - 1] + 1e-15);
  }
  Eigen::VectorXd g;
  fn(x, g);
  CHECK(g.norm() <= 1e-6);
}

TEST_CASE("rosenbrock valley is solved") {
  const LossGradFn fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    grad.resize(2);
    grad[0] = -2 * a - 400 * x[0] * b;
    grad[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  TrainState state;
  Eigen::VectorXd x(2);
  x << -1.2, 1.0;
  for (int i = 0; i < 500; ++i) {
    if (!lbfgs_step(state, x, fn) && state.consecutive_rejections == 0) break;
  }
  CHECK(std::abs(x[0] - 1.0) <= 1e-6);
  CHECK(std::abs(x[1] - 1.0) <= 1e-6);
}

TEST_CASE("history length is bounded by the configuration") {
  LbfgsConfig cfg;
  cfg.history_size = 3;
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(4, 4) * 2.0;
  h(0, 0) = 17.0;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(4);
  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 4.0);
  const LossGradFn fn = quadratic(h, b);
  for (int i = 0; i < 12; ++i) {
    if (!lbfgs_step(state, x, fn, cfg)) break;
    CHECK(state.pairs.size() <= 3);
  }
}

TEST_CASE("wall-clock trace grows with the loss trace") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(2);
  TrainState state;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 2.0);
  const LossGradFn fn = quadratic(h, b);
  for (int i = 0; i < 5; ++i) {
    if (!lbfgs_step(state, x, fn)) break;
  }
  CHECK(state.wall_ms.size() == state.loss_trace.size());
  for (double ms : state.wall_ms) CHECK(ms >= 0.0);
}
