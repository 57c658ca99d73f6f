#include "fenn/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fenn {

namespace {

using Json = nlohmann::json;

// Residual and its adjoint for one training angle, in whichever variables
// the network predicts (physical without preconditioning, transformed with).
ResidualPair eval_residual(const ProblemSetup& setup, bool use_pre, int idx,
                           const Eigen::VectorXd& zu, const Eigen::VectorXd& zp) {
  const StokesSystem& sys = setup.systems[idx];
  if (use_pre) {
    if (setup.problem == Problem::NavierStokes) {
      return preconditioned_residual_ns(*setup.pre, sys, setup.convection, zu, zp);
    }
    return preconditioned_residual_stokes(*setup.pre, sys, zu, zp);
  }
  if (setup.problem == Problem::NavierStokes) {
    return residual_navier_stokes(sys, setup.convection, zu, zp);
  }
  return residual_stokes(sys, zu, zp);
}

// Gradient of <a, residual(z)> with respect to the network output z.
ResidualPair eval_adjoint(const ProblemSetup& setup, bool use_pre, int idx,
                          const Eigen::VectorXd& zu, const Eigen::VectorXd& zp,
                          const Eigen::VectorXd& a_u, const Eigen::VectorXd& a_p) {
  const StokesSystem& sys = setup.systems[idx];
  const bool ns = setup.problem == Problem::NavierStokes;
  if (!use_pre) {
    return ns_jacobian_adjoint(sys, ns ? setup.convection : ConvectionTensor{}, zu, a_u, a_p);
  }
  const Preconditioner& pre = *setup.pre;
  const Eigen::VectorXd lt_au = pre.solve_Lt(a_u);
  Eigen::VectorXd gu = a_u + pre.solve_L(sys.B.transpose() * pre.solve_Mt(a_p));
  Eigen::VectorXd gp = pre.solve_M(sys.B * lt_au);
  if (ns && !setup.convection.empty()) {
    const Eigen::VectorXd u = pre.solve_Lt(zu);
    const Eigen::VectorXd uhat = mask_dirichlet(sys, u);
    Eigen::VectorXd a_conv = lt_au;
    sys.zero_dirichlet(a_conv);
    Eigen::VectorXd via_w = setup.convection.adjoint_w(a_conv, u);
    sys.zero_dirichlet(via_w);
    gu += pre.solve_L(setup.convection.adjoint_u(a_conv, uhat) + via_w);
  }
  return {std::move(gu), std::move(gp)};
}

double loss_impl(const ProblemSetup& setup, bool use_pre, const MlpParams& params,
                 Eigen::VectorXd* grad) {
  if (use_pre && !setup.pre) {
    throw std::runtime_error("loss: preconditioner requested but not built");
  }
  const int nu = setup.systems.front().num_velocity_dofs();
  const int np = setup.systems.front().num_pressure_dofs();
  const double inv_count = 1.0 / static_cast<double>(setup.lambdas.size());
  double loss = 0;
  if (grad) grad->setZero(params.num_parameters());

  for (size_t idx = 0; idx < setup.lambdas.size(); ++idx) {
    const Eigen::VectorXd input = setup.network_input(setup.lambdas[idx]);
    const Eigen::VectorXd z = forward(params, input);
    const Eigen::VectorXd zu = z.head(nu);
    const Eigen::VectorXd zp = z.tail(np);
    const auto [ru, rp] = eval_residual(setup, use_pre, static_cast<int>(idx), zu, zp);
    const double sample = ru.squaredNorm() + rp.squaredNorm();
    if (!std::isfinite(sample)) {
      throw std::runtime_error("loss: non-finite residual at lambda = " +
                               std::to_string(setup.lambdas[idx]));
    }
    loss += inv_count * sample;
    if (grad) {
      const auto [gu, gp] =
          eval_adjoint(setup, use_pre, static_cast<int>(idx), zu, zp, ru, rp);
      Eigen::VectorXd cotangent(nu + np);
      cotangent.head(nu) = 2.0 * inv_count * gu;
      cotangent.tail(np) = 2.0 * inv_count * gp;
      *grad += backward(params, input, cotangent).parameters;
    }
  }
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda_train.empty()) throw std::runtime_error("config: lambda_train must be nonempty");
  if (eta <= 0) throw std::runtime_error("config: eta must be positive");
  if (max_iterations < 0) throw std::runtime_error("config: max_iterations must be >= 0");
  for (int h : hidden_layers) {
    if (h < 1) throw std::runtime_error("config: hidden layer sizes must be positive");
  }
}

TrainConfig parse_train_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  Json j = Json::parse(in);

  TrainConfig cfg;
  const std::string problem = j.value("problem", "stokes");
  if (problem == "stokes") {
    cfg.problem = Problem::Stokes;
  } else if (problem == "navier-stokes") {
    cfg.problem = Problem::NavierStokes;
  } else {
    throw std::runtime_error("config: unknown problem '" + problem + "'");
  }
  cfg.eta = j.value("eta", 1.0);
  cfg.lambda_train = j.at("lambda_train").get<std::vector<double>>();
  cfg.use_preconditioner = j.value("use_preconditioner", true);
  cfg.max_iterations = j.value("max_iterations", 1000);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.hidden_layers = j.value("hidden_layers", std::vector<int>{});
  if (j.contains("mesh_file")) {
    cfg.mesh_file = j.at("mesh_file").get<std::string>();
  } else if (j.contains("domain")) {
    const Json& d = j.at("domain");
    cfg.domain.width = d.value("width", 5.0);
    cfg.domain.height = d.value("height", 5.0);
    cfg.domain.resolution = d.value("resolution", 2);
    if (d.contains("obstacle")) {
      const auto r = d.at("obstacle").get<std::vector<double>>();
      if (r.size() != 4) throw std::runtime_error("config: obstacle needs [x0,y0,x1,y1]");
      cfg.domain.obstacle = Rect{r[0], r[1], r[2], r[3]};
    }
  }
  cfg.checkpoint_every = j.value("checkpoint_every", 0);
  cfg.checkpoint_path = j.value("checkpoint_path", std::string{});
  cfg.lbfgs.history_size = j.value("lbfgs_history", cfg.lbfgs.history_size);
  cfg.validate();
  return cfg;
}

ProblemSetup build_setup(const TrainConfig& config, const Mesh& mesh) {
  config.validate();
  ProblemSetup setup;
  setup.space = build_space(mesh);
  setup.problem = config.problem;
  setup.use_preconditioner = config.use_preconditioner;
  setup.lambdas = config.lambda_train;

  for (double lambda : setup.lambdas) {
    if (setup.systems.empty()) {
      setup.systems.push_back(assemble_stokes(setup.space, config.eta, lambda));
    } else {
      StokesSystem sys = setup.systems.front();
      sys.set_angle(setup.space, lambda);
      setup.systems.push_back(std::move(sys));
    }
  }
  if (config.problem == Problem::NavierStokes) {
    setup.convection = assemble_convection(setup.space);
  }
  if (config.use_preconditioner) {
    setup.pre.emplace(build_preconditioner(setup.systems.front()));
  }
  if (setup.lambdas.size() > 1) {
    const auto [lo, hi] = std::minmax_element(setup.lambdas.begin(), setup.lambdas.end());
    setup.norm = make_input_norm(*lo, *hi);
  }
  return setup;
}

double loss_plain(const ProblemSetup& setup, const MlpParams& params) {
  return loss_impl(setup, false, params, nullptr);
}

double loss_preconditioned(const ProblemSetup& setup, const MlpParams& params) {
  return loss_impl(setup, true, params, nullptr);
}

double loss_value(const ProblemSetup& setup, const MlpParams& params) {
  return loss_impl(setup, setup.use_preconditioner, params, nullptr);
}

double loss_and_gradient(const ProblemSetup& setup, const MlpParams& params,
                         Eigen::VectorXd& grad) {
  return loss_impl(setup, setup.use_preconditioner, params, &grad);
}

TrainResult run_training(const TrainConfig& config) {
  if (!config.mesh_file.empty()) {
    return run_training(config, parse_gmsh_file(config.mesh_file));
  }
  return run_training(config, generate_structured(config.domain));
}

TrainResult run_training(const TrainConfig& config, const Mesh& mesh) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSetup setup = build_setup(config, mesh);

  std::vector<int> arch{1};
  for (int h : config.hidden_layers) arch.push_back(h);
  arch.push_back(setup.output_dim());
  MlpParams params = init_xavier_scaled(arch, config.seed);

  TrainResult result;
  result.checkpoint.seed = config.seed;
  result.checkpoint.norm = setup.norm;
  result.report.setup_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  Eigen::VectorXd x = params.flatten();
  MlpParams scratch = params;
  LossGradFn fn = [&](const Eigen::VectorXd& flat, Eigen::VectorXd& grad) {
    scratch.set_from_flat(flat);
    return loss_and_gradient(setup, scratch, grad);
  };

  TrainState state;
  for (int it = 0; it < config.max_iterations; ++it) {
    lbfgs_step(state, x, fn, config.lbfgs);
    if (state.consecutive_rejections >= 50) {
      result.report.stalled = true;
      break;
    }
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        (it + 1) % config.checkpoint_every == 0) {
      scratch.set_from_flat(x);
      save_checkpoint(Checkpoint{scratch, setup.norm, config.seed}, config.checkpoint_path);
    }
  }
  params.set_from_flat(x);

  result.checkpoint.params = params;
  result.report.loss_trace = state.loss_trace;
  result.report.wall_ms = state.wall_ms;

  const int nu = setup.systems.front().num_velocity_dofs();
  const int np = setup.systems.front().num_pressure_dofs();
  for (size_t idx = 0; idx < setup.lambdas.size(); ++idx) {
    const Eigen::VectorXd z = forward(params, setup.network_input(setup.lambdas[idx]));
    const auto [ru, rp] = eval_residual(setup, setup.use_preconditioner,
                                        static_cast<int>(idx), z.head(nu), z.tail(np));
    result.report.final_residual_norms.push_back(
        std::sqrt(ru.squaredNorm() + rp.squaredNorm()));
  }
  if (!config.checkpoint_path.empty()) {
    save_checkpoint(result.checkpoint, config.checkpoint_path);
  }
  return result;
}

ResidualPair predict_coefficients(const Checkpoint& ckpt, const ProblemSetup& setup,
                                  double lambda_deg) {
  const int nu = setup.systems.front().num_velocity_dofs();
  const int np = setup.systems.front().num_pressure_dofs();
  const Eigen::VectorXd input =
      Eigen::VectorXd::Constant(1, ckpt.norm.apply(lambda_deg));
  const Eigen::VectorXd z = forward(ckpt.params, input);
  if (setup.use_preconditioner) {
    return recover_physical(*setup.pre, z.head(nu), z.tail(np));
  }
  return {z.head(nu), z.tail(np)};
}

std::vector<ErrorRow> evaluate_errors(const TaylorHoodSpace& space,
                                      const std::vector<ResidualPair>& predicted,
                                      const std::vector<ReferenceSolution>& references) {
  if (predicted.size() != references.size()) {
    throw std::runtime_error("evaluate_errors: prediction/reference count mismatch");
  }
  const SparseMat mass_p2 = assemble_p2_mass(space);
  const SparseMat mass_p1 = assemble_p1_mass(space);
  const int nn = space.num_scalar_nodes();

  auto component = [&](const Eigen::VectorXd& u, int c) {
    Eigen::VectorXd out(nn);
    for (int n = 0; n < nn; ++n) out[n] = u[2 * n + c];
    return out;
  };
  auto push = [&](std::vector<ErrorRow>& rows, double lambda, const std::string& field,
                  const Eigen::VectorXd& pred, const Eigen::VectorXd& ref,
                  const SparseMat& mass) {
    const Eigen::VectorXd e = pred - ref;
    ErrorRow row;
    row.lambda_deg = lambda;
    row.field = field;
    row.l2_rel = std::sqrt(e.dot(mass * e) / ref.dot(mass * ref));
    row.linf_rel = e.lpNorm<Eigen::Infinity>() / ref.lpNorm<Eigen::Infinity>();
    rows.push_back(row);
  };

  std::vector<ErrorRow> rows;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const ReferenceSolution& ref = references[i];
    push(rows, ref.lambda_deg, "u_x", component(predicted[i].first, 0), component(ref.u, 0),
         mass_p2);
    push(rows, ref.lambda_deg, "u_y", component(predicted[i].first, 1), component(ref.u, 1),
         mass_p2);
    push(rows, ref.lambda_deg, "p", predicted[i].second, ref.p, mass_p1);
  }
  return rows;
}

void write_loss_csv(const LossReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "iteration,loss,wall_ms\n";
  out.precision(17);
  for (size_t i = 0; i < report.loss_trace.size(); ++i) {
    out << i << "," << report.loss_trace[i] << "," << report.wall_ms[i] << "\n";
  }
}

void write_error_csv(const std::vector<ErrorRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "lambda,field,l2_rel,linf_rel\n";
  out.precision(17);
  for (const ErrorRow& row : rows) {
    out << row.lambda_deg << "," << row.field << "," << row.l2_rel << "," << row.linf_rel
        << "\n";
  }
}

}  // namespace fenn
