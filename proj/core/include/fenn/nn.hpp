#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fenn {

enum class Activation { Selu, Linear };

// Published SELU constants.
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluScale = 1.0507009873554805;

struct MlpParams {
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::Linear;
  };
  std::vector<Layer> layers;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
  Eigen::Index num_parameters() const;

  Eigen::VectorXd flatten() const;
  void set_from_flat(const Eigen::VectorXd& flat);
};

/// Hidden layers use SELU, the last layer is linear. Weights are Xavier
/// normal draws scaled by 3/4, biases zero; deterministic in the seed.
MlpParams init_xavier_scaled(const std::vector<int>& arch, std::uint64_t seed);

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input);

struct Gradients {
  Eigen::VectorXd parameters;  // layout matches MlpParams::flatten
  Eigen::VectorXd input;
};

/// Reverse-mode gradients of <cotangent, forward(params, input)> with respect
/// to all weights/biases and the input.
Gradients backward(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& cotangent);

/// Affine input normalization applied before the first layer.
struct InputNorm {
  double offset = 0.0;
  double scale = 1.0;
  double apply(double lambda_deg) const { return (lambda_deg - offset) * scale; }
};

/// Maps [lo, hi] to [-1, 1]; identity when lo == hi.
InputNorm make_input_norm(double lo, double hi);

struct Checkpoint {
  MlpParams params;
  InputNorm norm;
  std::uint64_t seed = 0;
};

/// JSON header line followed by the raw little-endian weight blob, in layer
/// order (weights row-major, then bias, per layer). Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fenn
