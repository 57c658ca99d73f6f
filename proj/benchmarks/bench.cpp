#include <benchmark/benchmark.h>

#include "fenn/train.hpp"

namespace {

using namespace fenn;

DomainSpec desk_domain(int resolution) {
  DomainSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.resolution = resolution;
  spec.obstacle = Rect{2, 2, 3, 3};
  return spec;
}

void BM_assemble_stokes(benchmark::State& state) {
  const Mesh mesh = generate_structured(desk_domain(int(state.range(0))));
  const TaylorHoodSpace space = build_space(mesh);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_stokes(space, 1.0, 10.0));
  }
}
BENCHMARK(BM_assemble_stokes)->Arg(2)->Arg(4);

void BM_build_preconditioner(benchmark::State& state) {
  const Mesh mesh = generate_structured(desk_domain(int(state.range(0))));
  const StokesSystem sys = assemble_stokes(build_space(mesh), 1.0, 10.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_preconditioner(sys));
  }
}
BENCHMARK(BM_build_preconditioner)->Arg(2)->Arg(3);

TrainConfig bench_config(Problem problem, bool use_pre) {
  TrainConfig cfg;
  cfg.problem = problem;
  cfg.domain = desk_domain(2);
  cfg.lambda_train = {1, 23, 45};
  cfg.hidden_layers = {16, 16};
  cfg.use_preconditioner = use_pre;
  cfg.seed = 1;
  return cfg;
}

void BM_residual(benchmark::State& state) {
  const bool use_pre = state.range(0) != 0;
  const TrainConfig cfg = bench_config(Problem::Stokes, use_pre);
  const Mesh mesh = generate_structured(cfg.domain);
  const ProblemSetup setup = build_setup(cfg, mesh);
  const StokesSystem& sys = setup.systems.front();
  const Eigen::VectorXd u = Eigen::VectorXd::Random(sys.num_velocity_dofs());
  const Eigen::VectorXd p = Eigen::VectorXd::Random(sys.num_pressure_dofs());
  for (auto _ : state) {
    if (use_pre) {
      benchmark::DoNotOptimize(preconditioned_residual_stokes(*setup.pre, sys, u, p));
    } else {
      benchmark::DoNotOptimize(residual_stokes(sys, u, p));
    }
  }
}
BENCHMARK(BM_residual)->Arg(0)->Arg(1);

void BM_loss_and_gradient(benchmark::State& state) {
  const Problem problem = state.range(0) ? Problem::NavierStokes : Problem::Stokes;
  const TrainConfig cfg = bench_config(problem, true);
  const Mesh mesh = generate_structured(cfg.domain);
  const ProblemSetup setup = build_setup(cfg, mesh);
  const MlpParams params = init_xavier_scaled({1, 16, 16, setup.output_dim()}, 1);
  Eigen::VectorXd grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_gradient(setup, params, grad));
  }
}
BENCHMARK(BM_loss_and_gradient)->Arg(0)->Arg(1);

void BM_lbfgs_step(benchmark::State& state) {
  const TrainConfig cfg = bench_config(Problem::Stokes, true);
  const Mesh mesh = generate_structured(cfg.domain);
  const ProblemSetup setup = build_setup(cfg, mesh);
  const MlpParams init = init_xavier_scaled({1, 16, 16, setup.output_dim()}, 1);
  const auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    MlpParams params = init;
    params.set_from_flat(x);
    return loss_and_gradient(setup, params, grad);
  };
  for (auto _ : state) {
    state.PauseTiming();
    TrainState train_state;
    Eigen::VectorXd x = init.flatten();
    state.ResumeTiming();
    lbfgs_step(train_state, x, objective);
  }
}
BENCHMARK(BM_lbfgs_step);

}  // namespace

BENCHMARK_MAIN();
