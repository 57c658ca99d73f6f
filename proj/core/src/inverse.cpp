#include "fenn/inverse.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fenn {

SensorSpec default_sensors(const Rect& obstacle, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("sensor noise sigma must be positive");
  SensorSpec spec;
  spec.sigma = sigma;
  spec.points[0] = {obstacle.x0 + 0.08 * obstacle.width(), obstacle.y1};
  spec.points[1] = {obstacle.x0 + 0.99 * obstacle.width(), obstacle.y1};
  return spec;
}

SensorModel::SensorModel(const TaylorHoodSpace& space, const Preconditioner* pre,
                         SensorSpec sensors)
    : num_velocity_dofs_(space.num_velocity_dofs()),
      num_pressure_dofs_(space.num_pressure_dofs()),
      sensors_(std::move(sensors)) {
  if (sensors_.sigma <= 0) throw std::invalid_argument("sensor noise sigma must be positive");
  for (int s = 0; s < 2; ++s) {
    const PointLocation loc = locate_point(space.mesh, sensors_.points[s]);
    sensor_vertices_[s] = space.mesh.triangles[loc.triangle];
    sensor_weights_[s] = {loc.bary[0], loc.bary[1], loc.bary[2]};

    Eigen::VectorXd w = Eigen::VectorXd::Zero(num_pressure_dofs_);
    for (int i = 0; i < 3; ++i) w[sensor_vertices_[s][i]] += sensor_weights_[s][i];
    cotangents_[s] = pre ? pre->solve_M(w) : w;
  }
}

Eigen::Vector2d SensorModel::interpolate(const Eigen::VectorXd& pressure) const {
  if (pressure.size() != num_pressure_dofs_) {
    throw std::invalid_argument("pressure vector size does not match the space");
  }
  Eigen::Vector2d out;
  for (int s = 0; s < 2; ++s) {
    double v = 0;
    for (int i = 0; i < 3; ++i) v += sensor_weights_[s][i] * pressure[sensor_vertices_[s][i]];
    out[s] = v;
  }
  return out;
}

Eigen::Vector2d SensorModel::predict(const MlpParams& params, const InputNorm& norm,
                                     double lambda_deg, Eigen::Vector2d* d_lambda) const {
  const Eigen::VectorXd input = Eigen::VectorXd::Constant(1, norm.apply(lambda_deg));
  const Eigen::VectorXd z = forward(params, input);
  if (z.size() != num_velocity_dofs_ + num_pressure_dofs_) {
    throw std::invalid_argument("network output size does not match the space");
  }
  const Eigen::VectorXd zp = z.tail(num_pressure_dofs_);
  Eigen::Vector2d out;
  for (int s = 0; s < 2; ++s) out[s] = cotangents_[s].dot(zp);
  if (d_lambda) {
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXd cot = Eigen::VectorXd::Zero(z.size());
      cot.tail(num_pressure_dofs_) = cotangents_[s];
      const Gradients g = backward(params, input, cot);
      (*d_lambda)[s] = g.input[0] * norm.scale;
    }
  }
  return out;
}

LogPosterior log_posterior(const SensorModel& model, const MlpParams& params,
                           const InputNorm& norm,
                           const std::vector<Eigen::Vector2d>& observations,
                           double lambda_deg) {
  if (observations.empty()) throw std::invalid_argument("no observations");
  LogPosterior lp;
  if (lambda_deg < kPriorLambdaMin || lambda_deg > kPriorLambdaMax) {
    lp.value = -std::numeric_limits<double>::infinity();
    lp.d_lambda = 0;
    lp.in_support = false;
    return lp;
  }
  Eigen::Vector2d dp;
  const Eigen::Vector2d p_hat = model.predict(params, norm, lambda_deg, &dp);
  const double inv_s2 = 1.0 / (model.sensors().sigma * model.sensors().sigma);
  for (const auto& y : observations) {
    const Eigen::Vector2d r = p_hat - y;
    lp.value -= inv_s2 * r.squaredNorm();
    lp.d_lambda -= 2.0 * inv_s2 * r.dot(dp);
  }
  return lp;
}

double PosteriorRun::mean() const {
  if (samples.empty()) return 0;
  double s = 0;
  for (double x : samples) s += x;
  return s / static_cast<double>(samples.size());
}

double PosteriorRun::stddev() const {
  if (samples.size() < 2) return 0;
  const double m = mean();
  double s = 0;
  for (double x : samples) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(samples.size() - 1));
}

namespace {

// Fold the position back into [lo, hi] (sawtooth map), flipping the momentum
// when the fold reverses direction. Returns false on a non-finite position.
bool reflect(double& q, double& r, double lo, double hi) {
  if (q >= lo && q <= hi) return true;
  if (!std::isfinite(q)) return false;
  const double span = hi - lo;
  double t = std::fmod(q - lo, 2 * span);
  if (t < 0) t += 2 * span;
  if (t <= span) {
    q = lo + t;
  } else {
    q = hi - (t - span);
    r = -r;
  }
  return true;
}

struct Trajectory {
  double q = 0;
  LogPosterior lp;
  double accept_prob = 0;
  bool accepted = false;
};

Trajectory propose(const PosteriorFn& posterior, const HmcConfig& cfg, double q0,
                   const LogPosterior& lp0, double step, double momentum, double u01) {
  double q = q0;
  double r = momentum;
  LogPosterior lp = lp0;
  const double h0 = -lp0.value + 0.5 * momentum * momentum;

  bool divergent = false;
  r += 0.5 * step * lp.d_lambda;
  for (int l = 0; l < cfg.leapfrog_steps; ++l) {
    q += step * r;
    if (!reflect(q, r, cfg.lambda_min, cfg.lambda_max)) {
      divergent = true;
      break;
    }
    lp = posterior(q);
    r += (l + 1 < cfg.leapfrog_steps ? step : 0.5 * step) * lp.d_lambda;
  }

  Trajectory t;
  if (divergent) {
    t.q = q0;
    t.lp = lp0;
    return t;
  }
  const double h1 = -lp.value + 0.5 * r * r;
  t.accept_prob = std::isfinite(h1) ? std::min(1.0, std::exp(h0 - h1)) : 0.0;
  t.accepted = u01 < t.accept_prob;
  if (t.accepted) {
    t.q = q;
    t.lp = lp;
  } else {
    t.q = q0;
    t.lp = lp0;
  }
  return t;
}

}  // namespace

PosteriorRun run_hmc(const PosteriorFn& posterior, const HmcConfig& cfg) {
  if (cfg.warmup < 1 || cfg.samples < 1) {
    throw std::invalid_argument("hmc: warmup and sample counts must be positive");
  }
  if (cfg.leapfrog_steps < 1 || cfg.initial_step <= 0) {
    throw std::invalid_argument("hmc: invalid trajectory settings");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  // Per-proposal +-10% step jitter breaks periodic-orbit resonance of the
  // fixed-length trajectory on near-Gaussian targets.
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  double q = cfg.initial_position;
  LogPosterior lp = posterior(q);
  if (!lp.in_support || !std::isfinite(lp.value)) {
    throw std::runtime_error("hmc: initial position has zero posterior density");
  }

  PosteriorRun run;
  run.warmup = cfg.warmup;
  run.samples.reserve(cfg.samples);
  run.step_size_trace.reserve(cfg.warmup);

  // Dual-averaging adaptation toward the target acceptance rate.
  const double mu = std::log(10.0 * cfg.initial_step);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double log_step = std::log(cfg.initial_step);
  double log_step_avg = log_step;
  double h_avg = 0;
  int warmup_accepted = 0;

  for (int m = 1; m <= cfg.warmup; ++m) {
    const double step = std::exp(log_step);
    run.step_size_trace.push_back(step);
    const Trajectory t =
        propose(posterior, cfg, q, lp, step * jitter(rng), normal(rng), uniform(rng));
    q = t.q;
    lp = t.lp;
    warmup_accepted += t.accepted ? 1 : 0;

    const double w = 1.0 / (m + t0);
    h_avg = (1.0 - w) * h_avg + w * (cfg.target_accept - t.accept_prob);
    log_step = mu - std::sqrt(double(m)) / gamma * h_avg;
    const double eta = std::pow(double(m), -kappa);
    log_step_avg = eta * log_step + (1.0 - eta) * log_step_avg;
  }

  if (warmup_accepted == 0) {
    std::ostringstream msg;
    msg << "hmc: all " << cfg.warmup << " warmup proposals rejected; step-size trace "
        << run.step_size_trace.front() << " .. " << run.step_size_trace.back();
    throw std::runtime_error(msg.str());
  }

  run.step_size = std::exp(log_step_avg);
  for (int i = 0; i < cfg.samples; ++i) {
    const Trajectory t = propose(posterior, cfg, q, lp, run.step_size * jitter(rng),
                                 normal(rng), uniform(rng));
    q = t.q;
    lp = t.lp;
    run.accepted += t.accepted ? 1 : 0;
    ++run.proposed;
    run.samples.push_back(q);
  }
  return run;
}

std::vector<Eigen::Vector2d> synthesize_observations(const SensorModel& model,
                                                     const MlpParams& params,
                                                     const InputNorm& norm,
                                                     double true_lambda, int m,
                                                     double sigma, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("observation count must be positive");
  if (sigma < 0) throw std::invalid_argument("noise sigma must be nonnegative");
  const Eigen::Vector2d p_hat = model.predict(params, norm, true_lambda);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::Vector2d> out(m);
  for (auto& y : out) {
    y[0] = p_hat[0] + sigma * normal(rng);
    y[1] = p_hat[1] + sigma * normal(rng);
  }
  return out;
}

void write_observations_csv(const std::vector<Eigen::Vector2d>& observations,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << "index,p1,p2\n";
  for (std::size_t i = 0; i < observations.size(); ++i) {
    out << i << ',' << observations[i][0] << ',' << observations[i][1] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Eigen::Vector2d> read_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty observation file: " + path);
  std::vector<Eigen::Vector2d> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Eigen::Vector2d y;
    if (!std::getline(row, cell, ',') || !std::getline(row, cell, ',')) {
      throw std::runtime_error("malformed observation row: " + line);
    }
    y[0] = std::stod(cell);
    if (!std::getline(row, cell, ',')) {
      throw std::runtime_error("malformed observation row: " + line);
    }
    y[1] = std::stod(cell);
    out.push_back(y);
  }
  if (out.empty()) throw std::runtime_error("no observations in " + path);
  return out;
}

void write_samples_csv(const PosteriorRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << "index,lambda\n";
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    out << i << ',' << run.samples[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string posterior_summary_json(const PosteriorRun& run) {
  nlohmann::json j;
  j["sampler"] = "hmc-dual-averaging";
  j["mean"] = run.mean();
  j["std"] = run.stddev();
  j["acceptance_rate"] = run.acceptance_rate();
  j["step_size"] = run.step_size;
  j["warmup"] = run.warmup;
  j["samples"] = run.samples.size();
  return j.dump(2);
}

}  // namespace fenn
