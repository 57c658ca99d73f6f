#include "fenn/nn.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace fenn {

namespace {

double selu(double x) {
  return x > 0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
}

double selu_deriv(double x) {
  return x > 0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

Eigen::VectorXd activate(const Eigen::VectorXd& z, Activation act) {
  if (act == Activation::Linear) return z;
  return z.unaryExpr([](double x) { return selu(x); });
}

}  // namespace

Eigen::Index MlpParams::num_parameters() const {
  Eigen::Index n = 0;
  for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(num_parameters());
  Eigen::Index pos = 0;
  for (const Layer& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      flat.segment(pos, l.weight.cols()) = l.weight.row(r);
      pos += l.weight.cols();
    }
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void MlpParams::set_from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != num_parameters()) {
    throw std::runtime_error("set_from_flat: size mismatch");
  }
  Eigen::Index pos = 0;
  for (Layer& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      l.weight.row(r) = flat.segment(pos, l.weight.cols());
      pos += l.weight.cols();
    }
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

MlpParams init_xavier_scaled(const std::vector<int>& arch, std::uint64_t seed) {
  if (arch.size() < 2) throw std::runtime_error("init_xavier_scaled: need at least two layer sizes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpParams params;
  for (size_t l = 0; l + 1 < arch.size(); ++l) {
    const int fan_in = arch[l];
    const int fan_out = arch[l + 1];
    if (fan_in < 1 || fan_out < 1) throw std::runtime_error("init_xavier_scaled: invalid layer size");
    MlpParams::Layer layer;
    layer.weight.resize(fan_out, fan_in);
    const double std_dev = 0.75 * std::sqrt(2.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = std_dev * normal(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = (l + 2 < arch.size()) ? Activation::Selu : Activation::Linear;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input) {
  if (input.size() != params.input_dim()) {
    throw std::runtime_error("forward: input dimension mismatch");
  }
  Eigen::VectorXd x = input;
  for (const MlpParams::Layer& l : params.layers) {
    x = activate(l.weight * x + l.bias, l.activation);
  }
  return x;
}

Gradients backward(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& cotangent) {
  const size_t n_layers = params.layers.size();
  std::vector<Eigen::VectorXd> inputs(n_layers);      // layer inputs
  std::vector<Eigen::VectorXd> preacts(n_layers);
  {
    Eigen::VectorXd x = input;
    for (size_t l = 0; l < n_layers; ++l) {
      inputs[l] = x;
      preacts[l] = params.layers[l].weight * x + params.layers[l].bias;
      x = activate(preacts[l], params.layers[l].activation);
    }
  }
  if (cotangent.size() != params.output_dim()) {
    throw std::runtime_error("backward: cotangent dimension mismatch");
  }

  Gradients grads;
  grads.parameters.resize(params.num_parameters());

  // Per-layer flat offsets, front to back.
  std::vector<Eigen::Index> offsets(n_layers);
  Eigen::Index pos = 0;
  for (size_t l = 0; l < n_layers; ++l) {
    offsets[l] = pos;
    pos += params.layers[l].weight.size() + params.layers[l].bias.size();
  }

  Eigen::VectorXd delta = cotangent;
  for (size_t li = n_layers; li-- > 0;) {
    const MlpParams::Layer& layer = params.layers[li];
    if (layer.activation == Activation::Selu) {
      delta.array() *= preacts[li].unaryExpr([](double x) { return selu_deriv(x); }).array();
    }
    const Eigen::Index rows = layer.weight.rows();
    const Eigen::Index cols = layer.weight.cols();
    Eigen::Index p = offsets[li];
    for (Eigen::Index r = 0; r < rows; ++r) {
      grads.parameters.segment(p, cols) = delta[r] * inputs[li];
      p += cols;
    }
    grads.parameters.segment(p, rows) = delta;
    delta = layer.weight.transpose() * delta;
  }
  grads.input = std::move(delta);
  return grads;
}

InputNorm make_input_norm(double lo, double hi) {
  if (hi <= lo) return InputNorm{0.0, 1.0};
  return InputNorm{0.5 * (lo + hi), 2.0 / (hi - lo)};
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  std::vector<int> arch{ckpt.params.input_dim()};
  std::vector<std::string> acts;
  for (const auto& l : ckpt.params.layers) {
    arch.push_back(static_cast<int>(l.weight.rows()));
    acts.push_back(l.activation == Activation::Selu ? "selu" : "linear");
  }
  header["arch"] = arch;
  header["activations"] = acts;
  header["seed"] = ckpt.seed;
  header["input_norm"] = {{"offset", ckpt.norm.offset}, {"scale", ckpt.norm.scale}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out << header.dump() << "\n";
  const Eigen::VectorXd flat = ckpt.params.flatten();
  const std::uint64_t count = static_cast<std::uint64_t>(flat.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw std::runtime_error("write failure on checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("missing checkpoint header");
  nlohmann::json header = nlohmann::json::parse(header_line);

  Checkpoint ckpt;
  const std::vector<int> arch = header.at("arch").get<std::vector<int>>();
  const std::vector<std::string> acts = header.at("activations").get<std::vector<std::string>>();
  if (arch.size() != acts.size() + 1) throw std::runtime_error("inconsistent checkpoint header");
  for (size_t l = 0; l + 1 < arch.size(); ++l) {
    MlpParams::Layer layer;
    layer.weight = Eigen::MatrixXd::Zero(arch[l + 1], arch[l]);
    layer.bias = Eigen::VectorXd::Zero(arch[l + 1]);
    layer.activation = acts[l] == "selu" ? Activation::Selu : Activation::Linear;
    ckpt.params.layers.push_back(std::move(layer));
  }
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.norm.offset = header.at("input_norm").at("offset").get<double>();
  ckpt.norm.scale = header.at("input_norm").at("scale").get<double>();

  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count != static_cast<std::uint64_t>(ckpt.params.num_parameters())) {
    throw std::runtime_error("checkpoint blob size mismatch");
  }
  Eigen::VectorXd flat(count);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint blob");
  ckpt.params.set_from_flat(flat);
  return ckpt;
}

}  // namespace fenn
