#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fenn/nn.hpp"
#include "fenn/precond.hpp"
#include "fenn/space.hpp"

namespace fenn {

inline constexpr double kPriorLambdaMin = 1.0;   // degrees
inline constexpr double kPriorLambdaMax = 45.0;

struct SensorSpec {
  std::array<Eigen::Vector2d, 2> points;
  double sigma = 0.5;
};

/// Two probes on the obstacle's top edge, at 8% and 99% of its width.
SensorSpec default_sensors(const Rect& obstacle, double sigma = 0.5);

/// Pressure readout of a surrogate at the two sensor points: network forward
/// pass, physical recovery p = M^{-T} p~ when a preconditioner is given, then
/// P1 barycentric interpolation. Sensor triangles are located once.
class SensorModel {
 public:
  /// `pre` may be null when the surrogate emits physical coefficients.
  /// Throws if a sensor lies outside the mesh.
  SensorModel(const TaylorHoodSpace& space, const Preconditioner* pre, SensorSpec sensors);

  const SensorSpec& sensors() const { return sensors_; }

  /// Interpolates a physical pressure coefficient vector at the sensors.
  Eigen::Vector2d interpolate(const Eigen::VectorXd& pressure) const;

  /// p_hat(lambda); optionally also d p_hat / d lambda (in degrees).
  Eigen::Vector2d predict(const MlpParams& params, const InputNorm& norm,
                          double lambda_deg, Eigen::Vector2d* d_lambda = nullptr) const;

 private:
  int num_velocity_dofs_ = 0;
  int num_pressure_dofs_ = 0;
  SensorSpec sensors_;
  std::array<std::array<int, 3>, 2> sensor_vertices_{};
  std::array<Eigen::Vector3d, 2> sensor_weights_{};
  // Cotangent on the network's pressure block per sensor: the barycentric
  // weight vector, mapped through M^{-1} when a preconditioner is in play.
  std::array<Eigen::VectorXd, 2> cotangents_;
};

struct LogPosterior {
  double value = 0;
  double d_lambda = 0;
  bool in_support = true;
};

/// Gaussian likelihood log p(y|lambda) = -sum_i ||p_hat - y_i||^2 / sigma^2
/// (additive constant dropped) plus a uniform prior on [1, 45] degrees.
/// Outside the support: value -inf, zero gradient, in_support false.
LogPosterior log_posterior(const SensorModel& model, const MlpParams& params,
                           const InputNorm& norm,
                           const std::vector<Eigen::Vector2d>& observations,
                           double lambda_deg);

using PosteriorFn = std::function<LogPosterior(double)>;

struct HmcConfig {
  int warmup = 1000;
  int samples = 1000;
  int leapfrog_steps = 16;
  double target_accept = 0.8;
  double initial_step = 0.1;
  double initial_position = 23.0;
  double lambda_min = kPriorLambdaMin;
  double lambda_max = kPriorLambdaMax;
  std::uint64_t seed = 0;
};

struct PosteriorRun {
  std::vector<double> samples;          // post-warmup chain
  std::vector<double> step_size_trace;  // one entry per warmup iteration
  double step_size = 0;                 // fixed sampling step after warmup
  int warmup = 0;
  int accepted = 0;                     // over the sampling phase
  int proposed = 0;

  double acceptance_rate() const { return proposed ? double(accepted) / proposed : 0.0; }
  double mean() const;
  double stddev() const;  // sample standard deviation (n - 1)
};

/// Leapfrog HMC on the scalar parameter with standard-normal momentum, a
/// fixed trajectory length, and reflection at the support bounds. The step
/// size is adapted toward the target acceptance rate during warmup by dual
/// averaging, then frozen. Deterministic in the seed. Throws if every warmup
/// proposal is rejected.
PosteriorRun run_hmc(const PosteriorFn& posterior, const HmcConfig& config);

/// m noisy sensor readings y_i = p_hat(true_lambda) + Normal(0, sigma^2 I).
std::vector<Eigen::Vector2d> synthesize_observations(const SensorModel& model,
                                                     const MlpParams& params,
                                                     const InputNorm& norm,
                                                     double true_lambda, int m,
                                                     double sigma, std::uint64_t seed);

void write_observations_csv(const std::vector<Eigen::Vector2d>& observations,
                            const std::string& path);
std::vector<Eigen::Vector2d> read_observations_csv(const std::string& path);

void write_samples_csv(const PosteriorRun& run, const std::string& path);
std::string posterior_summary_json(const PosteriorRun& run);

}  // namespace fenn
