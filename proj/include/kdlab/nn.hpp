#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdlab/error.hpp"

// Small dense networks with exact reverse-mode gradients. Batches are
// column-major: one sample per column.
namespace kdlab::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Relu, Tanh };
enum class OutputHead { Linear, SimplexSoftmax };

struct Mlp {
  std::vector<std::size_t> layer_sizes;
  Activation hidden = Activation::Relu;
  OutputHead head = OutputHead::Linear;
  std::uint64_t seed = 0;
  std::vector<Matrix> weights;  // layer l: fan_in x fan_out
  std::vector<Vector> biases;   // layer l: fan_out

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }

  bool same_shape(const Mlp& other) const {
    return layer_sizes == other.layer_sizes && hidden == other.hidden && head == other.head;
  }
};

/// Glorot-uniform weights from a seeded mt19937_64, zero biases.
inline Mlp mlp_init(std::vector<std::size_t> layer_sizes, Activation hidden, OutputHead head, std::uint64_t seed) {
  require(layer_sizes.size() >= 2, ErrorKind::Validation, "an MLP needs at least 2 layers");
  for (auto s : layer_sizes) require(s >= 1, ErrorKind::Validation, "layer sizes must be >= 1");
  Mlp net;
  net.layer_sizes = std::move(layer_sizes);
  net.hidden = hidden;
  net.head = head;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(net.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(net.layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i)
      for (Eigen::Index j = 0; j < fan_out; ++j) w(i, j) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  return net;
}

/// Column-wise softmax of logits / temperature, max-subtracted.
inline Matrix softmax_columns(const Matrix& logits, double temperature = 1.0) {
  Matrix scaled = logits / temperature;
  Matrix out(scaled.rows(), scaled.cols());
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    Vector e = (scaled.col(c).array() - scaled.col(c).maxCoeff()).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

inline std::vector<double> softmax_temperature(std::span<const double> logits, double temperature) {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::Domain, "temperature must be positive");
  require(!logits.empty(), ErrorKind::Shape, "empty logits");
  Eigen::Map<const Vector> z(logits.data(), static_cast<Eigen::Index>(logits.size()));
  require(z.allFinite(), ErrorKind::Domain, "non-finite logits");
  Vector q = softmax_columns(z, temperature);
  return {q.data(), q.data() + q.size()};
}

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to layer l
  std::vector<Matrix> pre;     // pre-activation of layer l
  Matrix output;               // after the head (equals pre.back() for a linear head)

  const Matrix& logits() const { return pre.back(); }
};

inline ForwardCache forward(const Mlp& net, const Matrix& input) {
  require(static_cast<std::size_t>(input.rows()) == net.input_dim(), ErrorKind::Shape,
          "input has " + std::to_string(input.rows()) + " rows, network expects " + std::to_string(net.input_dim()));
  ForwardCache cache;
  Matrix a = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = (net.weights[l].transpose() * a).colwise() + net.biases[l];
    cache.inputs.push_back(std::move(a));
    if (l + 1 < net.num_layers())
      a = net.hidden == Activation::Relu ? Matrix(z.cwiseMax(0.0)) : Matrix(z.array().tanh().matrix());
    cache.pre.push_back(std::move(z));
  }
  cache.output = net.head == OutputHead::SimplexSoftmax ? softmax_columns(cache.pre.back()) : cache.pre.back();
  return cache;
}

inline std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  Eigen::Map<const Vector> x(input.data(), static_cast<Eigen::Index>(input.size()));
  Matrix y = forward(net, Matrix(x)).output;
  return {y.data(), y.data() + y.size()};
}

struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;  // d loss / d input, one column per sample

  static GradientSet zeros_like(const Mlp& net) {
    GradientSet g;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
      g.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }
};

enum class GradientAt { Output, Logits };

/// Reverse pass. `upstream` is d loss / d output (or d loss / d logits),
/// one column per cached sample; parameter gradients are summed over samples.
inline GradientSet backward(const Mlp& net, const ForwardCache& cache, const Matrix& upstream,
                            GradientAt at = GradientAt::Output) {
  require(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(), ErrorKind::Shape,
          "output gradient shape does not match the forward pass");
  Matrix g = upstream;
  if (net.head == OutputHead::SimplexSoftmax && at == GradientAt::Output) {
    const Matrix& y = cache.output;
    Eigen::RowVectorXd inner = (g.array() * y.array()).colwise().sum();
    g = (y.array() * (g.rowwise() - inner).array()).matrix();
  }
  GradientSet grads;
  grads.weights.resize(net.num_layers());
  grads.biases.resize(net.num_layers());
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    grads.weights[l] = cache.inputs[l] * g.transpose();
    grads.biases[l] = g.rowwise().sum();
    Matrix below = net.weights[l] * g;
    if (l > 0) {
      const Matrix& z = cache.pre[l - 1];
      if (net.hidden == Activation::Relu)
        below = below.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      else
        below = below.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
    }
    g = std::move(below);
  }
  grads.input = std::move(g);
  return grads;
}

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  GradientSet m;
  GradientSet v;

  static AdamState for_net(const Mlp& net, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = GradientSet::zeros_like(net);
    s.v = GradientSet::zeros_like(net);
    return s;
  }
};

/// One bias-corrected Adam step (descent on the given gradients).
inline void adam_step(Mlp& net, const GradientSet& grads, AdamState& state) {
  require(grads.weights.size() == net.num_layers() && state.m.weights.size() == net.num_layers(), ErrorKind::Shape,
          "gradient/optimizer shape mismatch");
  require(grads.all_finite(), ErrorKind::Numeric, "non-finite gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    param.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    require(grads.weights[l].rows() == net.weights[l].rows() && grads.weights[l].cols() == net.weights[l].cols(),
            ErrorKind::Shape, "gradient/parameter shape mismatch");
    update(net.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]);
    update(net.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean squared error over the vector's components.
inline LossAndGradient mse_loss(std::span<const double> pred, std::span<const double> target) {
  require(pred.size() == target.size() && !pred.empty(), ErrorKind::Length, "mse_loss length mismatch");
  const double n = static_cast<double>(pred.size());
  LossAndGradient out;
  out.gradient.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    out.loss += d * d / n;
    out.gradient[i] = 2.0 * d / n;
  }
  return out;
}

/// Hard-label cross-entropy plus lambda T^2 times the cross-entropy between
/// temperature-softened teacher and student distributions. Gradient is taken
/// with respect to the student's logits.
inline LossAndGradient kd_loss(std::span<const double> student_logits, std::span<const double> teacher_logits,
                               std::span<const double> hard_target, double temperature, double lambda) {
  require(student_logits.size() == teacher_logits.size() && student_logits.size() == hard_target.size() &&
              !student_logits.empty(),
          ErrorKind::Length, "kd_loss length mismatch");
  require(temperature > 0.0, ErrorKind::Domain, "temperature must be positive");
  require(lambda >= 0.0, ErrorKind::Domain, "lambda must be >= 0");
  const auto student = softmax_temperature(student_logits, 1.0);
  const auto student_soft = softmax_temperature(student_logits, temperature);
  const auto teacher_soft = softmax_temperature(teacher_logits, temperature);
  double hard_mass = 0.0;
  double soft_mass = 0.0;
  for (std::size_t i = 0; i < hard_target.size(); ++i) {
    hard_mass += hard_target[i];
    soft_mass += teacher_soft[i];
  }
  LossAndGradient out;
  out.gradient.resize(student_logits.size());
  const double soft_weight = lambda * temperature * temperature;
  for (std::size_t i = 0; i < student_logits.size(); ++i) {
    out.loss -= hard_target[i] * std::log(student[i]);
    out.loss -= soft_weight * teacher_soft[i] * std::log(student_soft[i]);
    out.gradient[i] = (student[i] * hard_mass - hard_target[i]) +
                      soft_weight / temperature * (student_soft[i] * soft_mass - teacher_soft[i]);
  }
  return out;
}

/// Flat parameter view: layer by layer, weights (column-major) then bias.
inline Vector flatten(const Mlp& net) {
  std::size_t count = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) count += net.weights[l].size() + net.biases[l].size();
  Vector flat(static_cast<Eigen::Index>(count));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    flat.segment(pos, net.weights[l].size()) = net.weights[l].reshaped();
    pos += net.weights[l].size();
    flat.segment(pos, net.biases[l].size()) = net.biases[l];
    pos += net.biases[l].size();
  }
  return flat;
}

inline Vector flatten(const GradientSet& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    out.insert(out.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    out.insert(out.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline void unflatten(Mlp& net, const Vector& flat) {
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    net.weights[l].reshaped() = flat.segment(pos, net.weights[l].size());
    pos += net.weights[l].size();
    net.biases[l] = flat.segment(pos, net.biases[l].size());
    pos += net.biases[l].size();
  }
  require(pos == flat.size(), ErrorKind::Shape, "flat parameter vector has the wrong length");
}

// ---- kdnn-1 checkpoint format ----

inline constexpr const char* kNetFormat = "kdnn-1";

inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json j;
  j["format"] = kNetFormat;
  j["layer_sizes"] = net.layer_sizes;
  j["hidden_activation"] = net.hidden == Activation::Relu ? "relu" : "tanh";
  j["output_head"] = net.head == OutputHead::Linear ? "linear" : "simplex-softmax";
  j["seed"] = net.seed;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i) {
      std::vector<double> row(net.weights[l].cols());
      for (Eigen::Index k = 0; k < net.weights[l].cols(); ++k) row[k] = net.weights[l](i, k);
      rows.push_back(row);
    }
    std::vector<double> bias(net.biases[l].data(), net.biases[l].data() + net.biases[l].size());
    layers.push_back({{"weights", rows}, {"bias", bias}});
  }
  j["layers"] = layers;
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == kNetFormat, ErrorKind::Validation, "not a kdnn-1 document");
    Mlp net;
    net.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    require(net.layer_sizes.size() >= 2, ErrorKind::Validation, "kdnn-1: need at least 2 layers");
    const auto act = j.at("hidden_activation").get<std::string>();
    require(act == "relu" || act == "tanh", ErrorKind::Validation, "kdnn-1: unknown activation " + act);
    net.hidden = act == "relu" ? Activation::Relu : Activation::Tanh;
    const auto head = j.at("output_head").get<std::string>();
    require(head == "linear" || head == "simplex-softmax", ErrorKind::Validation, "kdnn-1: unknown head " + head);
    net.head = head == "linear" ? OutputHead::Linear : OutputHead::SimplexSoftmax;
    net.seed = j.at("seed").get<std::uint64_t>();
    const auto& layers = j.at("layers");
    require(layers.size() + 1 == net.layer_sizes.size(), ErrorKind::Validation, "kdnn-1: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto fan_in = static_cast<Eigen::Index>(net.layer_sizes[l]);
      const auto fan_out = static_cast<Eigen::Index>(net.layer_sizes[l + 1]);
      const auto& rows = layers[l].at("weights");
      require(static_cast<Eigen::Index>(rows.size()) == fan_in, ErrorKind::Validation, "kdnn-1: weight rows");
      Matrix w(fan_in, fan_out);
      for (Eigen::Index i = 0; i < fan_in; ++i) {
        auto row = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
        require(static_cast<Eigen::Index>(row.size()) == fan_out, ErrorKind::Validation, "kdnn-1: weight columns");
        for (Eigen::Index k = 0; k < fan_out; ++k) w(i, k) = row[static_cast<std::size_t>(k)];
      }
      auto bias = layers[l].at("bias").get<std::vector<double>>();
      require(static_cast<Eigen::Index>(bias.size()) == fan_out, ErrorKind::Validation, "kdnn-1: bias length");
      Vector b = Eigen::Map<Vector>(bias.data(), fan_out);
      require(w.allFinite() && b.allFinite(), ErrorKind::Validation, "kdnn-1: non-finite parameter");
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("kdnn-1: ") + e.what());
  }
}

}  // namespace kdlab::nn
