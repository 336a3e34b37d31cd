// Small dense feedforward networks with hand-written backprop and Adam.
//
// Batched tensors are column-major: one sample per column.
#pragma once

#include "leaf/core.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace leaf::nn {

enum class Activation { Identity, Tanh, Sigmoid, Relu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

inline Mat apply(Activation act, const Mat& pre) {
  switch (act) {
    case Activation::Identity: return pre;
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::Sigmoid: return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
    case Activation::Relu: return pre.cwiseMax(0.0);
  }
  return pre;
}

/// d act / d pre, expressed through the post-activation value where convenient.
inline Mat apply_derivative(Activation act, const Mat& pre, const Mat& post) {
  switch (act) {
    case Activation::Identity: return Mat::Ones(pre.rows(), pre.cols());
    case Activation::Tanh: return (1.0 - post.array().square()).matrix();
    case Activation::Sigmoid: return (post.array() * (1.0 - post.array())).matrix();
    case Activation::Relu: return (pre.array() > 0.0).cast<double>().matrix();
  }
  return Mat::Ones(pre.rows(), pre.cols());
}

/// Flat mutable view of one parameter tensor.
struct ParamView {
  double* data;
  Eigen::Index size;

  [[nodiscard]] Eigen::Map<Vec> map() const { return {data, size}; }
};

struct MlpGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Mat input;  // d loss / d input, one column per sample

  std::vector<ParamView> views() {
    std::vector<ParamView> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({weights[l].data(), weights[l].size()});
      out.push_back({biases[l].data(), biases[l].size()});
    }
    return out;
  }

  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
  }
};

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  std::vector<Mat> inputs;  // inputs[l] feeds layer l; inputs.back() is the network output
  std::vector<Mat> pre;     // pre-activations per layer
};

/// Which quantity the incoming gradient is taken with respect to.
enum class GradWrt { Output, OutputPreActivation };

/// Multilayer perceptron: ReLU on hidden layers, configurable output activation.
class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialised network with the given layer sizes (input, hidden..., output).
  explicit Mlp(std::vector<int> sizes, Activation output = Activation::Identity)
      : sizes_(std::move(sizes)), output_(output) {
    require(sizes_.size() >= 2, "Mlp: need at least input and output sizes");
    for (int s : sizes_) require(s > 0, "Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.push_back(Mat::Zero(sizes_[l + 1], sizes_[l]));
      biases_.push_back(Vec::Zero(sizes_[l + 1]));
    }
  }

  Mlp(std::vector<int> sizes, Activation output, Rng& rng) : Mlp(std::move(sizes), output) {
    init_uniform(rng);
  }

  /// Uniform in +-1/sqrt(fan_in) for weights and biases.
  void init_uniform(Rng& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(weights_[l].cols()));
      for (Eigen::Index i = 0; i < weights_[l].size(); ++i)
        weights_[l].data()[i] = rng.uniform(-bound, bound);
      for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = rng.uniform(-bound, bound);
    }
  }

  [[nodiscard]] const std::vector<int>& sizes() const { return sizes_; }
  [[nodiscard]] int input_size() const { return sizes_.front(); }
  [[nodiscard]] int output_size() const { return sizes_.back(); }
  [[nodiscard]] std::size_t num_layers() const { return weights_.size(); }
  [[nodiscard]] Activation output_activation() const { return output_; }

  [[nodiscard]] Mat& weight(std::size_t l) { return weights_.at(l); }
  [[nodiscard]] const Mat& weight(std::size_t l) const { return weights_.at(l); }
  [[nodiscard]] Vec& bias(std::size_t l) { return biases_.at(l); }
  [[nodiscard]] const Vec& bias(std::size_t l) const { return biases_.at(l); }

  [[nodiscard]] Activation activation(std::size_t l) const {
    return l + 1 == weights_.size() ? output_ : Activation::Relu;
  }

  std::vector<ParamView> views() {
    std::vector<ParamView> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back({weights_[l].data(), weights_[l].size()});
      out.push_back({biases_[l].data(), biases_[l].size()});
    }
    return out;
  }

  [[nodiscard]] Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  [[nodiscard]] bool finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l)
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return true;
  }

  [[nodiscard]] Vec forward(const Vec& x) const {
    require(x.size() == input_size(), "Mlp::forward: input size " + std::to_string(x.size()) +
                                          ", expected " + std::to_string(input_size()));
    Mat out = forward_batch(x);
    return out.col(0);
  }

  [[nodiscard]] Mat forward_batch(const Mat& x) const {
    require(x.rows() == input_size(), "Mlp::forward_batch: input rows " + std::to_string(x.rows()) +
                                          ", expected " + std::to_string(input_size()));
    Mat h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Mat pre = weights_[l] * h;
      pre.colwise() += biases_[l];
      h = apply(activation(l), pre);
    }
    return h;
  }

  Mat forward_cached(const Mat& x, ForwardCache& cache) const {
    require(x.rows() == input_size(), "Mlp::forward_cached: input rows " +
                                          std::to_string(x.rows()) + ", expected " +
                                          std::to_string(input_size()));
    cache.inputs.assign(1, x);
    cache.pre.clear();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Mat pre = weights_[l] * cache.inputs.back();
      pre.colwise() += biases_[l];
      cache.inputs.push_back(apply(activation(l), pre));
      cache.pre.push_back(std::move(pre));
    }
    return cache.inputs.back();
  }

  /// Parameter gradients summed over the batch, plus the input gradient per column.
  [[nodiscard]] MlpGrads backward(const ForwardCache& cache, const Mat& grad,
                                  GradWrt wrt = GradWrt::Output) const {
    require(!cache.pre.empty() && cache.pre.size() == weights_.size(),
            "Mlp::backward: cache does not match network");
    require(grad.rows() == output_size() && grad.cols() == cache.inputs.back().cols(),
            "Mlp::backward: gradient shape mismatch");
    MlpGrads g;
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    Mat delta;
    for (std::size_t li = weights_.size(); li-- > 0;) {
      if (li + 1 == weights_.size()) {
        delta = wrt == GradWrt::OutputPreActivation
                    ? grad
                    : Mat(grad.cwiseProduct(
                          apply_derivative(activation(li), cache.pre[li], cache.inputs[li + 1])));
      } else {
        delta = delta.cwiseProduct(
            apply_derivative(activation(li), cache.pre[li], cache.inputs[li + 1]));
      }
      g.weights[li] = delta * cache.inputs[li].transpose();
      g.biases[li] = delta.rowwise().sum();
      delta = weights_[li].transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
  }

  /// Zero-valued gradient container with this network's shapes.
  [[nodiscard]] MlpGrads zero_grads() const {
    MlpGrads g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights.push_back(Mat::Zero(weights_[l].rows(), weights_[l].cols()));
      g.biases.push_back(Vec::Zero(biases_[l].size()));
    }
    return g;
  }

  /// this = (1 - tau) * this + tau * other
  void soft_update_from(const Mlp& other, double tau) {
    require(other.sizes_ == sizes_, "Mlp::soft_update_from: shape mismatch");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l] = (1.0 - tau) * weights_[l] + tau * other.weights_[l];
      biases_[l] = (1.0 - tau) * biases_[l] + tau * other.biases_[l];
    }
  }

 private:
  std::vector<int> sizes_;
  Activation output_ = Activation::Identity;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

inline void accumulate(MlpGrads& into, const MlpGrads& from) {
  for (std::size_t l = 0; l < into.weights.size(); ++l) {
    into.weights[l] += from.weights[l];
    into.biases[l] += from.biases[l];
  }
}

inline void scale(MlpGrads& g, double s) {
  for (auto& w : g.weights) w *= s;
  for (auto& b : g.biases) b *= s;
}

// ---------------------------------------------------------------------------
// Losses. Each returns the mean loss and fills the gradient w.r.t. the prediction
// (or the logit), already divided by the batch size.

struct LossResult {
  double loss = 0.0;
  Mat grad;
};

inline LossResult mse_loss(const Mat& pred, const Mat& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse_loss: shape mismatch");
  const double n = static_cast<double>(pred.size());
  Mat diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

/// Binary cross-entropy on logits; labels in {0,1}. Gradient is w.r.t. the logit.
inline LossResult bce_with_logits(const Mat& logits, const Mat& labels) {
  require(logits.rows() == labels.rows() && logits.cols() == labels.cols(),
          "bce_with_logits: shape mismatch");
  const double n = static_cast<double>(logits.size());
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double l = logits.data()[i];
    const double y = labels.data()[i];
    // softplus(l) - y*l, evaluated stably
    total += std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))) - y * l;
    r.grad.data()[i] = (1.0 / (1.0 + std::exp(-l)) - y) / n;
  }
  r.loss = total / n;
  return r;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected moment estimates for one list of parameter tensors.
struct AdamState {
  AdamConfig config;
  long step_count = 0;
  std::vector<Vec> first_moment;
  std::vector<Vec> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

/// One Adam update over matching parameter and gradient views.
inline void adam_step(std::span<const ParamView> params, std::span<const ParamView> grads,
                      AdamState& state) {
  require(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].size == grads[i].size, "adam_step: shape mismatch at tensor " +
                                                 std::to_string(i));
    if (!grads[i].map().allFinite())
      throw DivergenceError("adam_step: non-finite gradient in tensor " + std::to_string(i));
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Vec::Zero(p.size));
      state.second_moment.push_back(Vec::Zero(p.size));
    }
  }
  require(state.first_moment.size() == params.size(), "adam_step: state does not match parameters");

  const auto& c = state.config;
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].map();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    require(m.size() == params[i].size, "adam_step: moment shape mismatch");
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    auto p = params[i].map();
    p.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  }
}

inline void adam_step(Mlp& net, MlpGrads& grads, AdamState& state) {
  auto p = net.views();
  auto g = grads.views();
  adam_step(p, g, state);
}

}  // namespace leaf::nn
