#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fenn/assembly.hpp"
#include "fenn/nn.hpp"
#include "fenn/optim.hpp"
#include "fenn/precond.hpp"
#include "fenn/reference.hpp"

namespace fenn {

enum class Problem { Stokes, NavierStokes };

struct TrainConfig {
  Problem problem = Problem::Stokes;
  double eta = 1.0;
  std::vector<double> lambda_train;    // degrees, nonempty
  bool use_preconditioner = true;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  std::vector<int> hidden_layers;      // empty -> single linear layer

  DomainSpec domain;                   // used when mesh_file is empty
  std::string mesh_file;

  int checkpoint_every = 0;            // 0: only the final checkpoint
  std::string checkpoint_path;         // empty: no checkpoints written
  LbfgsConfig lbfgs;

  void validate() const;
};

TrainConfig parse_train_config_file(const std::string& path);

/// Everything assembled once per training run: the space, one system per
/// training angle (A, B and factors shared, only f/g differ), the convection
/// tensor for Navier-Stokes and the preconditioner.
struct ProblemSetup {
  TaylorHoodSpace space;
  std::vector<double> lambdas;
  std::vector<StokesSystem> systems;   // aligned with lambdas
  ConvectionTensor convection;         // empty for Stokes
  std::optional<Preconditioner> pre;
  Problem problem = Problem::Stokes;
  bool use_preconditioner = true;
  InputNorm norm;

  int output_dim() const {
    return systems.front().num_velocity_dofs() + systems.front().num_pressure_dofs();
  }
  Eigen::VectorXd network_input(double lambda_deg) const {
    return Eigen::VectorXd::Constant(1, norm.apply(lambda_deg));
  }
};

ProblemSetup build_setup(const TrainConfig& config, const Mesh& mesh);

/// Mean over the training set of the squared l2 norm of the raw residual,
/// network output read as physical coefficients (u, p).
double loss_plain(const ProblemSetup& setup, const MlpParams& params);

/// As loss_plain but through the two-sided preconditioned residual, network
/// output read as transformed coefficients (u~, p~).
double loss_preconditioned(const ProblemSetup& setup, const MlpParams& params);

/// Dispatches on setup.use_preconditioner.
double loss_value(const ProblemSetup& setup, const MlpParams& params);

/// Exact gradient of the selected loss with respect to all network
/// parameters (flat layout); returns the loss.
double loss_and_gradient(const ProblemSetup& setup, const MlpParams& params,
                         Eigen::VectorXd& grad);

struct LossReport {
  std::vector<double> loss_trace;
  std::vector<double> wall_ms;              // per iteration
  double setup_ms = 0;
  std::vector<double> final_residual_norms; // per training angle
  bool stalled = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  LossReport report;
};

/// Full training loop: setup, optional preconditioner, L-BFGS with one step
/// per outer iteration. Stops early after 50 consecutive rejected steps.
TrainResult run_training(const TrainConfig& config);
TrainResult run_training(const TrainConfig& config, const Mesh& mesh);

struct ErrorRow {
  double lambda_deg = 0;
  std::string field;   // "u_x", "u_y", "p"
  double l2_rel = 0;   // FEM mass-matrix L2
  double linf_rel = 0; // coefficient-wise
};

/// Relative errors of predicted coefficient pairs against references,
/// per field. Predictions and references must be aligned.
std::vector<ErrorRow> evaluate_errors(const TaylorHoodSpace& space,
                                      const std::vector<ResidualPair>& predicted,
                                      const std::vector<ReferenceSolution>& references);

/// Physical (u, p) predicted by a checkpoint at one angle, undoing the
/// preconditioner transform when one is given.
ResidualPair predict_coefficients(const Checkpoint& ckpt, const ProblemSetup& setup,
                                  double lambda_deg);

void write_loss_csv(const LossReport& report, const std::string& path);
void write_error_csv(const std::vector<ErrorRow>& rows, const std::string& path);

}  // namespace fenn
