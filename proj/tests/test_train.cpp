#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fenn/reference.hpp"
#include "fenn/train.hpp"
#include "helpers.hpp"

using namespace fenn;

namespace {

TrainConfig small_config(Problem problem, std::vector<double> lambdas, bool pre) {
  TrainConfig cfg;
  cfg.problem = problem;
  cfg.eta = 1.0;
  cfg.lambda_train = std::move(lambdas);
  cfg.use_preconditioner = pre;
  cfg.max_iterations = 0;
  cfg.seed = 3;
  cfg.domain = fenn::testing::make_domain(2, 1, 1);
  return cfg;
}

Mesh small_mesh() { return generate_structured(fenn::testing::make_domain(2, 1, 1)); }

// A single linear layer with zero weight producing a fixed output vector.
MlpParams constant_net(const Eigen::VectorXd& output) {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Zero(output.size(), 1), output, Activation::Linear});
  return p;
}

}  // namespace

TEST_CASE("loss gradients match finite differences for all four variants") {
  const Mesh mesh = small_mesh();
  for (Problem problem : {Problem::Stokes, Problem::NavierStokes}) {
    for (bool pre : {false, true}) {
      CAPTURE(static_cast<int>(problem));
      CAPTURE(pre);
      // Build with the preconditioner available, then select the path.
      ProblemSetup setup = build_setup(small_config(problem, {7.0, 29.0}, true), mesh);
      setup.use_preconditioner = pre;

      MlpParams params = init_xavier_scaled({1, 5, setup.output_dim()}, 17);
      Eigen::VectorXd grad;
      loss_and_gradient(setup, params, grad);
      REQUIRE(grad.size() == params.num_parameters());

      const Eigen::VectorXd flat = params.flatten();
      const double h = 1e-6;
      MlpParams scratch = params;
      const int stride = std::max<int>(1, static_cast<int>(flat.size()) / 30);
      for (int i = 0; i < flat.size(); i += stride) {
        Eigen::VectorXd fp = flat, fm = flat;
        fp[i] += h;
        fm[i] -= h;
        scratch.set_from_flat(fp);
        const double vp = loss_value(setup, scratch);
        scratch.set_from_flat(fm);
        const double vm = loss_value(setup, scratch);
        const double fd = (vp - vm) / (2 * h);
        CHECK(std::abs(grad[i] - fd) <= 1e-5 * (1 + std::abs(fd)));
      }
    }
  }
}

TEST_CASE("two-path equality of the preconditioned loss") {
  const Mesh mesh = small_mesh();
  for (Problem problem : {Problem::Stokes, Problem::NavierStokes}) {
    const ProblemSetup setup = build_setup(small_config(problem, {13.0}, true), mesh);
    const MlpParams params = init_xavier_scaled({1, 4, setup.output_dim()}, 5);

    const double direct = loss_preconditioned(setup, params);

    // Same quantity through the unpreconditioned residual at recovered
    // coefficients, left-multiplied by the inverse factors.
    const StokesSystem& sys = setup.systems.front();
    const int nu = sys.num_velocity_dofs(), np = sys.num_pressure_dofs();
    const Eigen::VectorXd z = forward(params, setup.network_input(13.0));
    const auto [u, p] = recover_physical(*setup.pre, z.head(nu), z.tail(np));
    const auto [ru, rp] = problem == Problem::NavierStokes
                              ? residual_navier_stokes(sys, setup.convection, u, p)
                              : residual_stokes(sys, u, p);
    const double two_path =
        setup.pre->solve_L(ru).squaredNorm() + setup.pre->solve_M(rp).squaredNorm();
    CHECK(std::abs(direct - two_path) <= 1e-12 * (1 + std::abs(two_path)));
  }
}

TEST_CASE("exact reference coefficients give a vanishing loss and gradient") {
  const Mesh mesh = small_mesh();
  for (Problem problem : {Problem::Stokes, Problem::NavierStokes}) {
    ProblemSetup setup = build_setup(small_config(problem, {9.0}, true), mesh);
    const StokesSystem& sys = setup.systems.front();
    const ReferenceSolution ref =
        problem == Problem::NavierStokes
            ? solve_ns_newton(sys, setup.convection, *setup.pre)
            : solve_stokes_direct(sys, *setup.pre);

    Eigen::VectorXd physical(setup.output_dim());
    physical << ref.u, ref.p;
    setup.use_preconditioner = false;
    CHECK(loss_value(setup, constant_net(physical)) <= 1e-18);

    Eigen::VectorXd transformed(setup.output_dim());
    transformed << setup.pre->apply_Lt(ref.u), setup.pre->apply_Mt(ref.p);
    setup.use_preconditioner = true;
    CHECK(loss_value(setup, constant_net(transformed)) <= 1e-16);

    Eigen::VectorXd grad;
    loss_and_gradient(setup, constant_net(transformed), grad);
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("zero network output reproduces the data norm") {
  const Mesh mesh = small_mesh();
  ProblemSetup setup = build_setup(small_config(Problem::Stokes, {21.0}, true), mesh);
  const MlpParams zero = constant_net(Eigen::VectorXd::Zero(setup.output_dim()));
  const StokesSystem& sys = setup.systems.front();

  setup.use_preconditioner = false;
  const double plain = loss_value(setup, zero);
  CHECK(std::abs(plain - (sys.f.squaredNorm() + sys.g.squaredNorm())) <= 1e-12 * plain);

  setup.use_preconditioner = true;
  const double pre = loss_value(setup, zero);
  const double expected =
      setup.pre->solve_L(sys.f).squaredNorm() + setup.pre->solve_M(sys.g).squaredNorm();
  CHECK(std::abs(pre - expected) <= 1e-12 * expected);
}

TEST_CASE("multi-angle loss is the mean of single-angle losses") {
  const Mesh mesh = small_mesh();
  ProblemSetup both = build_setup(small_config(Problem::Stokes, {5.0, 40.0}, true), mesh);
  ProblemSetup first = build_setup(small_config(Problem::Stokes, {5.0}, true), mesh);
  ProblemSetup second = build_setup(small_config(Problem::Stokes, {40.0}, true), mesh);
  // Align the input maps so the same network sees the same inputs.
  both.norm = first.norm = second.norm = InputNorm{};

  const MlpParams params = init_xavier_scaled({1, 3, both.output_dim()}, 8);
  const double combined = loss_value(both, params);
  const double mean = 0.5 * (loss_value(first, params) + loss_value(second, params));
  CHECK(std::abs(combined - mean) <= 1e-12 * (1 + mean));
}

TEST_CASE("training for zero iterations returns the initialization") {
  TrainConfig cfg = small_config(Problem::Stokes, {10.0}, true);
  cfg.max_iterations = 0;
  const TrainResult result = run_training(cfg);
  const ProblemSetup setup = build_setup(cfg, small_mesh());
  const MlpParams init = init_xavier_scaled({1, setup.output_dim()}, cfg.seed);
  CHECK(result.checkpoint.params.flatten() == init.flatten());
  CHECK(result.report.loss_trace.empty());
  CHECK_FALSE(result.report.stalled);
}

TEST_CASE("short training runs decrease the loss deterministically") {
  TrainConfig cfg = small_config(Problem::Stokes, {10.0}, true);
  cfg.max_iterations = 25;
  const TrainResult a = run_training(cfg);
  const TrainResult b = run_training(cfg);
  CHECK(a.checkpoint.params.flatten() == b.checkpoint.params.flatten());

  REQUIRE(a.report.loss_trace.size() >= 2);
  CHECK(a.report.loss_trace.back() < a.report.loss_trace.front());
  for (std::size_t i = 1; i < a.report.loss_trace.size(); ++i) {
    CHECK(a.report.loss_trace[i] <= a.report.loss_trace[i - 1] + 1e-15);
  }
  CHECK(a.report.final_residual_norms.size() == 1);
  CHECK(a.report.final_residual_norms[0] ==
        doctest::Approx(std::sqrt(a.report.loss_trace.back())).epsilon(1e-6));
}

TEST_CASE("preconditioning cuts the iterations needed by a wide margin") {
  // Linear net, single angle: the preconditioned loss reaches 1e-10 in at
  // most a tenth of the iterations the plain loss needs to reach 1e-2.
  const Mesh mesh = generate_structured(fenn::testing::make_domain(2, 1, 2));
  auto iterations_to = [&](bool pre, double target, int cap) {
    TrainConfig cfg = small_config(Problem::Stokes, {1.0}, pre);
    cfg.domain = fenn::testing::make_domain(2, 1, 2);
    cfg.max_iterations = cap;
    const TrainResult r = run_training(cfg, mesh);
    for (std::size_t i = 0; i < r.report.loss_trace.size(); ++i) {
      if (r.report.loss_trace[i] <= target) return static_cast<int>(i) + 1;
    }
    return cap + 1;
  };
  const int pre_iters = iterations_to(true, 1e-10, 400);
  const int plain_iters = iterations_to(false, 1e-2, 400);
  CAPTURE(pre_iters);
  CAPTURE(plain_iters);
  CHECK(pre_iters <= 400);
  CHECK(10 * pre_iters <= plain_iters);
}

TEST_CASE("prediction at a trained angle inverts the transform") {
  const Mesh mesh = small_mesh();
  ProblemSetup setup = build_setup(small_config(Problem::Stokes, {9.0}, true), mesh);
  const StokesSystem& sys = setup.systems.front();
  const ReferenceSolution ref = solve_stokes_direct(sys, *setup.pre);

  Eigen::VectorXd transformed(setup.output_dim());
  transformed << setup.pre->apply_Lt(ref.u), setup.pre->apply_Mt(ref.p);
  Checkpoint ckpt{constant_net(transformed), InputNorm{}, 0};
  const auto [u, p] = predict_coefficients(ckpt, setup, 9.0);
  CHECK((u - ref.u).cwiseAbs().maxCoeff() <= 1e-11);
  CHECK((p - ref.p).cwiseAbs().maxCoeff() <= 1e-11);
}

TEST_CASE("error evaluation is zero at the reference and scales a perturbation") {
  const TaylorHoodSpace space =
      build_space(generate_structured(fenn::testing::make_domain(2, 1, 1)));
  const StokesSystem sys = assemble_stokes(space, 1.0, 25.0);
  const Preconditioner pre = build_preconditioner(sys);
  const ReferenceSolution ref = solve_stokes_direct(sys, pre);

  const std::vector<ReferenceSolution> refs{ref};
  {
    const auto rows = evaluate_errors(space, {{ref.u, ref.p}}, refs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].field == "u_x");
    CHECK(rows[1].field == "u_y");
    CHECK(rows[2].field == "p");
    for (const auto& row : rows) {
      CHECK(row.l2_rel <= 1e-14);
      CHECK(row.linf_rel <= 1e-14);
      CHECK(row.lambda_deg == 25.0);
    }
  }
  {
    // Bump one x-velocity coefficient by a known amount.
    const double eps = 1e-3;
    Eigen::VectorXd u = ref.u;
    u[0] += eps;
    const auto rows = evaluate_errors(space, {{u, ref.p}}, refs);
    Eigen::VectorXd ux(space.num_scalar_nodes());
    for (int n = 0; n < space.num_scalar_nodes(); ++n) ux[n] = ref.u[2 * n];
    CHECK(rows[0].linf_rel ==
          doctest::Approx(eps / ux.lpNorm<Eigen::Infinity>()).epsilon(1e-10));
    CHECK(rows[1].linf_rel <= 1e-14);
    CHECK(rows[2].linf_rel <= 1e-14);
  }
}

TEST_CASE("config files parse into validated configurations") {
  const std::string path = "fenn_test_config.json";
  {
    std::ofstream out(path);
    out << R"({
      "problem": "navier-stokes",
      "eta": 0.5,
      "lambda_train": [1.0, 23.0, 45.0],
      "use_preconditioner": false,
      "max_iterations": 42,
      "seed": 9,
      "hidden_layers": [10, 20],
      "domain": {"width": 5, "height": 5, "resolution": 3, "obstacle": [2, 2, 3, 3]},
      "checkpoint_every": 7,
      "checkpoint_path": "out.ckpt"
    })";
  }
  const TrainConfig cfg = parse_train_config_file(path);
  std::remove(path.c_str());

  CHECK(cfg.problem == Problem::NavierStokes);
  CHECK(cfg.eta == 0.5);
  CHECK(cfg.lambda_train == std::vector<double>{1.0, 23.0, 45.0});
  CHECK_FALSE(cfg.use_preconditioner);
  CHECK(cfg.max_iterations == 42);
  CHECK(cfg.seed == 9);
  CHECK(cfg.hidden_layers == std::vector<int>{10, 20});
  REQUIRE(cfg.domain.obstacle.has_value());
  CHECK(cfg.domain.obstacle->x0 == 2.0);
  CHECK(cfg.checkpoint_every == 7);
  CHECK(cfg.checkpoint_path == "out.ckpt");

  // Invalid configs are rejected.
  {
    std::ofstream out(path);
    out << R"({"problem": "stokes", "lambda_train": []})";
  }
  CHECK_THROWS_AS(parse_train_config_file(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(parse_train_config_file("missing-config.json"), std::runtime_error);
}
