#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fenn/inverse.hpp"
#include "fenn/reference.hpp"
#include "fenn/train.hpp"

#ifndef FENN_GIT_DESCRIBE
#define FENN_GIT_DESCRIBE "unknown"
#endif

namespace {

using Json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Records what a command ran, with what inputs, and what it produced.
class Manifest {
 public:
  Manifest(std::string command, Json config, std::uint64_t seed)
      : command_(std::move(command)), config_(std::move(config)), seed_(seed),
        started_(iso_now()) {}

  void add_output(const std::string& path) { outputs_.push_back(path); }

  /// Written beside the primary output as <primary>.manifest.json.
  void write() const {
    if (outputs_.empty()) return;
    Json j;
    j["command"] = command_;
    j["config"] = config_;
    j["git_describe"] = FENN_GIT_DESCRIBE;
    j["seed"] = seed_;
    j["started"] = started_;
    j["finished"] = iso_now();
    j["outputs"] = outputs_;
    const std::string path = outputs_.front() + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  Json config_;
  std::uint64_t seed_ = 0;
  std::string started_;
  std::vector<std::string> outputs_;
};

Json config_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return Json::parse(in);
}

struct MeshArgs {
  double width = 5, height = 5;
  int res = 2;
  std::vector<double> obstacle;
  std::string from;
  bool validate = false;
  std::string out = "mesh.msh";
  std::string summary;
};

fenn::Mesh make_mesh(const MeshArgs& args) {
  if (!args.from.empty()) {
    require_readable(args.from);
    return fenn::parse_gmsh_file(args.from);
  }
  fenn::DomainSpec spec;
  spec.width = args.width;
  spec.height = args.height;
  spec.resolution = args.res;
  if (!args.obstacle.empty()) {
    spec.obstacle = fenn::Rect{args.obstacle[0], args.obstacle[1], args.obstacle[2],
                               args.obstacle[3]};
  }
  return fenn::generate_structured(spec);
}

int cmd_mesh(const MeshArgs& args) {
  const fenn::Mesh mesh = make_mesh(args);
  if (args.validate) mesh.validate();

  Json cfg;
  cfg["width"] = args.width;
  cfg["height"] = args.height;
  cfg["res"] = args.res;
  cfg["from"] = args.from;
  Manifest manifest("mesh", cfg, 0);

  fenn::write_gmsh_file(mesh, args.out);
  manifest.add_output(args.out);
  const std::string summary_path = args.summary.empty() ? args.out + ".summary.json" : args.summary;
  {
    std::ofstream out(summary_path);
    if (!out) throw IoError("cannot open " + summary_path + " for writing");
    out << fenn::mesh_summary_json(mesh) << "\n";
  }
  manifest.add_output(summary_path);
  manifest.write();
  std::cout << fenn::mesh_summary_json(mesh) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& checkpoint_override,
              const std::string& loss_csv) {
  fenn::TrainConfig cfg = fenn::parse_train_config_file(config_path);
  if (!checkpoint_override.empty()) cfg.checkpoint_path = checkpoint_override;
  if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = "model.ckpt";
  if (!cfg.mesh_file.empty()) require_readable(cfg.mesh_file);

  Manifest manifest("train", config_snapshot(config_path), cfg.seed);
  const fenn::TrainResult result = fenn::run_training(cfg);
  manifest.add_output(cfg.checkpoint_path);
  if (!loss_csv.empty()) {
    fenn::write_loss_csv(result.report, loss_csv);
    manifest.add_output(loss_csv);
  }
  manifest.write();

  std::cout << "iterations: " << result.report.loss_trace.size() << "\n";
  if (!result.report.loss_trace.empty()) {
    std::cout << "final loss: " << result.report.loss_trace.back() << "\n";
  }
  if (result.report.stalled) std::cout << "stopped early: optimizer stalled\n";
  return 0;
}

std::vector<fenn::ReferenceSolution> solve_references(const fenn::TrainConfig& cfg,
                                                      const fenn::ProblemSetup& setup,
                                                      const std::vector<double>& angles) {
  std::vector<fenn::ReferenceSolution> refs;
  for (double lambda : angles) {
    if (cfg.problem == fenn::Problem::NavierStokes) {
      refs.push_back(fenn::solve_ns_continuation(setup.space, setup.convection, cfg.eta, lambda));
    } else {
      fenn::StokesSystem sys = setup.systems.front();
      sys.set_angle(setup.space, lambda);
      refs.push_back(fenn::solve_stokes_direct(sys, *setup.pre));
    }
  }
  return refs;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             std::vector<double> angles, const std::string& out_csv) {
  require_readable(checkpoint_path);
  fenn::TrainConfig cfg = fenn::parse_train_config_file(config_path);
  if (!angles.empty()) cfg.lambda_train = std::move(angles);
  cfg.use_preconditioner = true;  // physical recovery needs the factors

  const fenn::Checkpoint ckpt = fenn::load_checkpoint(checkpoint_path);
  const fenn::Mesh mesh = cfg.mesh_file.empty() ? fenn::generate_structured(cfg.domain)
                                                : fenn::parse_gmsh_file(cfg.mesh_file);
  fenn::ProblemSetup setup = fenn::build_setup(cfg, mesh);
  const std::vector<fenn::ReferenceSolution> refs =
      solve_references(cfg, setup, cfg.lambda_train);

  std::vector<fenn::ResidualPair> predicted;
  for (double lambda : cfg.lambda_train) {
    predicted.push_back(fenn::predict_coefficients(ckpt, setup, lambda));
  }
  const auto rows = fenn::evaluate_errors(setup.space, predicted, refs);

  Manifest manifest("eval", config_snapshot(config_path), ckpt.seed);
  fenn::write_error_csv(rows, out_csv);
  manifest.add_output(out_csv);
  manifest.write();
  for (const auto& row : rows) {
    std::cout << row.lambda_deg << " " << row.field << " l2=" << row.l2_rel
              << " linf=" << row.linf_rel << "\n";
  }
  return 0;
}

int cmd_reference(const std::string& config_path, std::vector<double> angles,
                  const std::string& prefix) {
  fenn::TrainConfig cfg = fenn::parse_train_config_file(config_path);
  if (!angles.empty()) cfg.lambda_train = std::move(angles);
  cfg.use_preconditioner = true;

  const fenn::Mesh mesh = cfg.mesh_file.empty() ? fenn::generate_structured(cfg.domain)
                                                : fenn::parse_gmsh_file(cfg.mesh_file);
  fenn::ProblemSetup setup = fenn::build_setup(cfg, mesh);
  const auto refs = solve_references(cfg, setup, cfg.lambda_train);

  Manifest manifest("reference", config_snapshot(config_path), cfg.seed);
  for (const auto& ref : refs) {
    std::ostringstream name;
    name << prefix << "_" << ref.lambda_deg << ".ref";
    fenn::save_reference(ref, name.str());
    manifest.add_output(name.str());
    std::cout << "lambda " << ref.lambda_deg << ": residual " << ref.residual_norm
              << ", newton iterations " << ref.newton_iterations << "\n";
  }
  manifest.write();
  return 0;
}

int cmd_spectral(const MeshArgs& mesh_args, double eta, const std::string& out_json) {
  const fenn::Mesh mesh = make_mesh(mesh_args);
  const fenn::TaylorHoodSpace space = fenn::build_space(mesh);
  const fenn::StokesSystem sys = fenn::assemble_stokes(space, eta, 1.0);
  const fenn::Preconditioner pre = fenn::build_preconditioner(sys);
  const fenn::SpectralReport report = fenn::spectral_check(pre, sys);

  Json cfg;
  cfg["eta"] = eta;
  Manifest manifest("spectral", cfg, 0);
  {
    std::ofstream out(out_json);
    if (!out) throw IoError("cannot open " + out_json + " for writing");
    out << fenn::spectral_report_json(report) << "\n";
  }
  manifest.add_output(out_json);
  manifest.write();
  std::cout << "max cluster distance: " << report.max_cluster_distance << "\n"
            << "annihilator norm: " << report.annihilator_norm << "\n";
  return 0;
}

struct InvertArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string observations;
  bool synthesize = false;
  double true_lambda = 5.0;
  int count = 10;
  double sigma = 0.5;
  int warmup = 1000;
  int samples = 1000;
  std::uint64_t seed = 0;
  std::string prefix = "posterior";
};

int cmd_invert(const InvertArgs& args) {
  require_readable(args.checkpoint_path);
  fenn::TrainConfig cfg = fenn::parse_train_config_file(args.config_path);
  cfg.use_preconditioner = true;
  if (!cfg.domain.obstacle) {
    throw std::runtime_error("inversion requires a domain with an obstacle (sensor placement)");
  }

  const fenn::Checkpoint ckpt = fenn::load_checkpoint(args.checkpoint_path);
  const fenn::Mesh mesh = cfg.mesh_file.empty() ? fenn::generate_structured(cfg.domain)
                                                : fenn::parse_gmsh_file(cfg.mesh_file);
  fenn::ProblemSetup setup = fenn::build_setup(cfg, mesh);
  const fenn::SensorModel model(setup.space, &*setup.pre,
                                fenn::default_sensors(*cfg.domain.obstacle, args.sigma));

  Manifest manifest("invert", config_snapshot(args.config_path), args.seed);
  std::vector<Eigen::Vector2d> observations;
  if (args.synthesize) {
    observations = fenn::synthesize_observations(model, ckpt.params, ckpt.norm,
                                                 args.true_lambda, args.count, args.sigma,
                                                 args.seed);
    const std::string obs_path = args.prefix + "_observations.csv";
    fenn::write_observations_csv(observations, obs_path);
    manifest.add_output(obs_path);
  } else {
    require_readable(args.observations);
    observations = fenn::read_observations_csv(args.observations);
  }

  const fenn::PosteriorFn posterior = [&](double lambda) {
    return fenn::log_posterior(model, ckpt.params, ckpt.norm, observations, lambda);
  };
  fenn::HmcConfig hmc;
  hmc.warmup = args.warmup;
  hmc.samples = args.samples;
  hmc.seed = args.seed;
  const fenn::PosteriorRun run = fenn::run_hmc(posterior, hmc);

  const std::string samples_path = args.prefix + "_samples.csv";
  fenn::write_samples_csv(run, samples_path);
  manifest.add_output(samples_path);
  const std::string summary_path = args.prefix + "_summary.json";
  {
    std::ofstream out(summary_path);
    if (!out) throw IoError("cannot open " + summary_path + " for writing");
    out << fenn::posterior_summary_json(run) << "\n";
  }
  manifest.add_output(summary_path);
  manifest.write();
  std::cout << fenn::posterior_summary_json(run) << "\n";
  return 0;
}

void add_mesh_source_flags(CLI::App* app, MeshArgs& args, bool generator_required) {
  app->add_option("--width", args.width, "Domain width");
  app->add_option("--height", args.height, "Domain height");
  auto* res = app->add_option("--res", args.res, "Grid cells per unit length");
  app->add_option("--obstacle", args.obstacle, "Obstacle rectangle x0,y0,x1,y1")
      ->delimiter(',')
      ->expected(4);
  auto* from = app->add_option("--from", args.from, "Read an existing MSH file instead");
  if (generator_required) res->excludes(from);
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("FENN_NUM_THREADS")) {
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  }

  CLI::App app{"FEM-based neural-network flow surrogates: meshing, training, "
               "evaluation, spectral checks, reference solves, and Bayesian "
               "angle-of-attack inversion"};
  app.require_subcommand(1);

  MeshArgs mesh_args;
  auto* mesh = app.add_subcommand("mesh", "Generate or ingest a mesh and write MSH + summary");
  add_mesh_source_flags(mesh, mesh_args, true);
  mesh->add_flag("--validate", mesh_args.validate, "Run the structural invariant checks");
  mesh->add_option("--out", mesh_args.out, "Output MSH path");
  mesh->add_option("--summary", mesh_args.summary, "Summary JSON path");

  std::string train_config, train_checkpoint, train_loss_csv = "loss.csv";
  auto* train = app.add_subcommand("train", "Train a surrogate from a JSON config");
  train->add_option("config", train_config, "Config file")->required();
  train->add_option("--checkpoint", train_checkpoint, "Checkpoint output path");
  train->add_option("--loss-csv", train_loss_csv, "Loss trace CSV path");

  std::string eval_config, eval_checkpoint, eval_out = "errors.csv";
  std::vector<double> eval_angles;
  auto* eval = app.add_subcommand("eval", "Relative errors of a checkpoint against references");
  eval->add_option("config", eval_config, "Config file")->required();
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--angles", eval_angles, "Angles in degrees")->delimiter(',');
  eval->add_option("--out", eval_out, "Error table CSV path");

  std::string ref_config, ref_prefix = "reference";
  std::vector<double> ref_angles;
  auto* reference = app.add_subcommand("reference", "Direct/Newton reference solves");
  reference->add_option("config", ref_config, "Config file")->required();
  reference->add_option("--angles", ref_angles, "Angles in degrees")->delimiter(',');
  reference->add_option("--out-prefix", ref_prefix, "Output file prefix");

  MeshArgs spectral_args;
  double spectral_eta = 1.0;
  std::string spectral_out = "spectral.json";
  auto* spectral = app.add_subcommand("spectral", "Eigenvalue clustering report");
  add_mesh_source_flags(spectral, spectral_args, false);
  spectral->add_option("--eta", spectral_eta, "Viscosity");
  spectral->add_option("--out", spectral_out, "Report JSON path");

  InvertArgs invert_args;
  auto* invert = app.add_subcommand("invert", "Sample the angle-of-attack posterior (HMC)");
  invert->add_option("config", invert_args.config_path, "Config file")->required();
  invert->add_option("--checkpoint", invert_args.checkpoint_path, "Trained surrogate")->required();
  auto* obs = invert->add_option("--observations", invert_args.observations,
                                 "Observations CSV (index,p1,p2)");
  auto* synth = invert->add_flag("--synthesize", invert_args.synthesize,
                                 "Generate noisy observations from the surrogate");
  synth->excludes(obs);
  invert->add_option("--true-lambda", invert_args.true_lambda, "Angle used when synthesizing");
  invert->add_option("--count", invert_args.count, "Number of synthetic observations");
  invert->add_option("--sigma", invert_args.sigma, "Sensor noise standard deviation");
  invert->add_option("--warmup", invert_args.warmup, "Warmup iterations");
  invert->add_option("--samples", invert_args.samples, "Posterior samples");
  invert->add_option("--seed", invert_args.seed, "RNG seed");
  invert->add_option("--out-prefix", invert_args.prefix, "Output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mesh->parsed()) return cmd_mesh(mesh_args);
    if (train->parsed()) return cmd_train(train_config, train_checkpoint, train_loss_csv);
    if (eval->parsed()) return cmd_eval(eval_config, eval_checkpoint, eval_angles, eval_out);
    if (reference->parsed()) return cmd_reference(ref_config, ref_angles, ref_prefix);
    if (spectral->parsed()) return cmd_spectral(spectral_args, spectral_eta, spectral_out);
    if (invert->parsed()) return cmd_invert(invert_args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("write failed") != std::string::npos) {
      return 3;
    }
    return 1;
  }
  return 2;
}
