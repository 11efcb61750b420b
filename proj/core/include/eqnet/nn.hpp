// SPDX-License-Identifier: Apache-2.0
//
// A small feed-forward network engine: layers form a DAG evaluated in
// insertion order, activations are stored feature-major (one column per
// sample), and backward() returns exact gradients for every dense layer as
// well as for every network input.
//
// Conventions: relu'(0) = 0; dense weights are Glorot-uniform initialized,
// biases start at zero.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqnet/errors.hpp"
#include "eqnet/numerics.hpp"

namespace eqnet::nn {

enum class LayerKind : std::uint32_t { input = 0, dense = 1, relu = 2, tanh = 3, add = 4, concat = 5 };

struct LayerSpec {
  LayerKind kind = LayerKind::input;
  std::vector<std::uint32_t> inputs;  // indices of earlier layers
  std::uint32_t width = 0;            // output width
  std::uint32_t slot = 0;             // network input slot, input layers only

  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Weights (out x in) and bias of one dense layer. Non-dense layers carry
/// empty parameters so that indices line up with the layer list.
template <typename T>
struct DenseParams {
  Matrix<T> weight;
  Vector<T> bias;
};

template <typename T>
class BasicModel {
 public:
  struct Tape {
    std::vector<Matrix<T>> values;
    const BasicModel* owner = nullptr;
    std::uint64_t version = 0;

    const Matrix<T>& output() const { return values.back(); }
  };

  struct Gradients {
    std::vector<DenseParams<T>> params;
    std::vector<Matrix<T>> inputs;  // one per input slot
  };

  std::size_t add_input(std::uint32_t slot, std::uint32_t width) {
    if (width == 0) throw std::invalid_argument("add_input: width must be positive");
    for (const auto& l : layers_)
      if (l.kind == LayerKind::input && l.slot == slot) throw std::invalid_argument("add_input: slot already used");
    input_layers_.resize(std::max<std::size_t>(input_layers_.size(), slot + 1), kNone);
    input_layers_[slot] = static_cast<std::uint32_t>(layers_.size());
    return push({LayerKind::input, {}, width, slot});
  }

  std::size_t add_dense(std::size_t src, std::uint32_t width) {
    check_source(src);
    if (width == 0) throw std::invalid_argument("add_dense: width must be positive");
    const std::size_t idx = push({LayerKind::dense, {static_cast<std::uint32_t>(src)}, width, 0});
    params_[idx].weight = Matrix<T>::Zero(width, layers_[src].width);
    params_[idx].bias = Vector<T>::Zero(width);
    return idx;
  }

  std::size_t add_relu(std::size_t src) { return add_pointwise(LayerKind::relu, src); }
  std::size_t add_tanh(std::size_t src) { return add_pointwise(LayerKind::tanh, src); }

  std::size_t add_add(std::size_t a, std::size_t b) {
    check_source(a);
    check_source(b);
    if (layers_[a].width != layers_[b].width) throw std::invalid_argument("add_add: residual widths differ");
    return push({LayerKind::add, {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)}, layers_[a].width, 0});
  }

  std::size_t add_concat(const std::vector<std::size_t>& srcs) {
    if (srcs.empty()) throw std::invalid_argument("add_concat: no inputs");
    LayerSpec spec{LayerKind::concat, {}, 0, 0};
    for (std::size_t s : srcs) {
      check_source(s);
      spec.inputs.push_back(static_cast<std::uint32_t>(s));
      spec.width += layers_[s].width;
    }
    return push(std::move(spec));
  }

  /// Rebuilds a model from a layer list (parameters zeroed).
  static BasicModel from_specs(const std::vector<LayerSpec>& specs) {
    BasicModel m;
    for (const auto& s : specs) {
      switch (s.kind) {
        case LayerKind::input: m.add_input(s.slot, s.width); break;
        case LayerKind::dense: m.add_dense(one_input(s), s.width); break;
        case LayerKind::relu: m.add_relu(one_input(s)); break;
        case LayerKind::tanh: m.add_tanh(one_input(s)); break;
        case LayerKind::add:
          if (s.inputs.size() != 2) throw std::invalid_argument("from_specs: add takes two inputs");
          m.add_add(s.inputs[0], s.inputs[1]);
          break;
        case LayerKind::concat: {
          std::vector<std::size_t> in(s.inputs.begin(), s.inputs.end());
          m.add_concat(in);
          break;
        }
        default: throw std::invalid_argument("from_specs: unknown layer kind");
      }
      if (m.layers_.back().width != s.width) throw std::invalid_argument("from_specs: inconsistent layer width");
    }
    return m;
  }

  void initialize(numerics::RngStream& rng) {
    require_unfrozen("initialize");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].kind != LayerKind::dense) continue;
      auto& p = params_[i];
      const double limit = std::sqrt(6.0 / static_cast<double>(p.weight.rows() + p.weight.cols()));
      // Row-major fill keeps the draw order independent of Eigen's storage.
      for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = static_cast<T>(rng.uniform(-limit, limit));
      p.bias.setZero();
    }
    ++version_;
  }

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t input_count() const noexcept { return input_layers_.size(); }
  std::uint32_t input_width(std::size_t slot) const { return layers_.at(input_layers_.at(slot)).width; }
  std::uint32_t output_width() const { return layers_.empty() ? 0 : layers_.back().width; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.weight.size() + p.bias.size());
    return n;
  }

  const std::vector<DenseParams<T>>& params() const noexcept { return params_; }
  /// Mutable access invalidates outstanding tapes.
  std::vector<DenseParams<T>>& mutable_params() {
    require_unfrozen("mutable_params");
    ++version_;
    return params_;
  }

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }
  void unfreeze() noexcept { frozen_ = false; }
  std::uint64_t version() const noexcept { return version_; }

  Tape forward(std::span<const Matrix<T>> inputs) const {
    if (inputs.size() != input_layers_.size()) throw std::invalid_argument("forward: wrong number of inputs");
    if (layers_.empty()) throw std::invalid_argument("forward: empty model");
    Eigen::Index batch = -1;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      if (inputs[s].rows() != static_cast<Eigen::Index>(input_width(s))) {
        throw std::invalid_argument("forward: input " + std::to_string(s) + " has width " +
                                    std::to_string(inputs[s].rows()) + ", expected " + std::to_string(input_width(s)));
      }
      if (batch >= 0 && inputs[s].cols() != batch) throw std::invalid_argument("forward: inputs disagree on batch size");
      batch = inputs[s].cols();
    }

    Tape tape;
    tape.owner = this;
    tape.version = version_;
    tape.values.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      Matrix<T>& out = tape.values[i];
      switch (l.kind) {
        case LayerKind::input: out = inputs[l.slot]; break;
        case LayerKind::dense:
          out.noalias() = params_[i].weight * tape.values[l.inputs[0]];
          out.colwise() += params_[i].bias;
          break;
        case LayerKind::relu: out = tape.values[l.inputs[0]].cwiseMax(T(0)); break;
        case LayerKind::tanh: out = tape.values[l.inputs[0]].array().tanh().matrix(); break;
        case LayerKind::add: out = tape.values[l.inputs[0]] + tape.values[l.inputs[1]]; break;
        case LayerKind::concat: {
          out.resize(l.width, batch);
          Eigen::Index row = 0;
          for (std::uint32_t src : l.inputs) {
            const auto& v = tape.values[src];
            out.middleRows(row, v.rows()) = v;
            row += v.rows();
          }
          break;
        }
      }
    }
    return tape;
  }

  Matrix<T> predict(std::span<const Matrix<T>> inputs) const { return forward(inputs).values.back(); }
  Matrix<T> predict(const Matrix<T>& input) const { return predict(std::span<const Matrix<T>>(&input, 1)); }
  Tape forward(const Matrix<T>& input) const { return forward(std::span<const Matrix<T>>(&input, 1)); }

  /// Gradients of a scalar loss given dLoss/dOutput.
  Gradients backward(const Tape& tape, const Matrix<T>& out_grad) const {
    if (tape.owner != this || tape.version != version_) throw StateError("backward: tape does not match the current parameters");
    if (out_grad.rows() != tape.output().rows() || out_grad.cols() != tape.output().cols()) {
      throw std::invalid_argument("backward: output gradient shape mismatch");
    }
    const std::size_t n = layers_.size();
    std::vector<Matrix<T>> grad(n);
    std::vector<bool> has(n, false);
    auto accumulate = [&](std::uint32_t idx, auto&& g) {
      if (has[idx]) {
        grad[idx] += g;
      } else {
        grad[idx] = g;
        has[idx] = true;
      }
    };
    grad[n - 1] = out_grad;
    has[n - 1] = true;

    Gradients result;
    result.params.resize(n);
    result.inputs.resize(input_layers_.size());

    for (std::size_t i = n; i-- > 0;) {
      const LayerSpec& l = layers_[i];
      if (!has[i]) {
        if (l.kind == LayerKind::dense) {
          result.params[i].weight = Matrix<T>::Zero(params_[i].weight.rows(), params_[i].weight.cols());
          result.params[i].bias = Vector<T>::Zero(params_[i].bias.size());
        }
        continue;
      }
      const Matrix<T>& g = grad[i];
      switch (l.kind) {
        case LayerKind::input: result.inputs[l.slot] = g; break;
        case LayerKind::dense: {
          const Matrix<T>& x = tape.values[l.inputs[0]];
          result.params[i].weight.noalias() = g * x.transpose();
          result.params[i].bias = g.rowwise().sum();
          accumulate(l.inputs[0], (params_[i].weight.transpose() * g).eval());
          break;
        }
        case LayerKind::relu: {
          const Matrix<T>& y = tape.values[i];
          accumulate(l.inputs[0], (y.array() > T(0)).select(g, T(0)).eval());
          break;
        }
        case LayerKind::tanh: {
          const Matrix<T>& y = tape.values[i];
          accumulate(l.inputs[0], (g.array() * (T(1) - y.array().square())).matrix().eval());
          break;
        }
        case LayerKind::add:
          accumulate(l.inputs[0], g);
          accumulate(l.inputs[1], g);
          break;
        case LayerKind::concat: {
          Eigen::Index row = 0;
          for (std::uint32_t src : l.inputs) {
            const Eigen::Index w = layers_[src].width;
            accumulate(src, g.middleRows(row, w).eval());
            row += w;
          }
          break;
        }
      }
      grad[i] = Matrix<T>();  // release early
    }
    for (std::size_t s = 0; s < input_layers_.size(); ++s) {
      if (result.inputs[s].size() == 0) result.inputs[s] = Matrix<T>::Zero(input_width(s), tape.output().cols());
    }
    return result;
  }

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out = BasicModel<U>::from_specs(layers_);
    auto& dst = out.mutable_params();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      dst[i].weight = params_[i].weight.template cast<U>();
      dst[i].bias = params_[i].bias.template cast<U>();
    }
    if (frozen_) out.freeze();
    return out;
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffU;

  static std::size_t one_input(const LayerSpec& s) {
    if (s.inputs.size() != 1) throw std::invalid_argument("from_specs: layer expects exactly one input");
    return s.inputs[0];
  }

  void check_source(std::size_t src) const {
    if (src >= layers_.size()) throw std::invalid_argument("layer source index out of range");
  }

  void require_unfrozen(const char* what) const {
    if (frozen_) throw StateError(std::string(what) + ": model is frozen");
  }

  std::size_t add_pointwise(LayerKind kind, std::size_t src) {
    check_source(src);
    return push({kind, {static_cast<std::uint32_t>(src)}, layers_[src].width, 0});
  }

  std::size_t push(LayerSpec spec) {
    require_unfrozen("add layer");
    layers_.push_back(std::move(spec));
    params_.emplace_back();
    ++version_;
    return layers_.size() - 1;
  }

  std::vector<LayerSpec> layers_;
  std::vector<DenseParams<T>> params_;
  std::vector<std::uint32_t> input_layers_;
  bool frozen_ = false;
  std::uint64_t version_ = 0;
};

using Model = BasicModel<float>;

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<DenseParams<T>> m;
  std::vector<DenseParams<T>> v;
};

template <typename T>
AdamState<T> make_adam(const BasicModel<T>& model, double learning_rate) {
  AdamState<T> s;
  s.learning_rate = learning_rate;
  s.m.resize(model.params().size());
  s.v.resize(model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& p = model.params()[i];
    s.m[i].weight = Matrix<T>::Zero(p.weight.rows(), p.weight.cols());
    s.m[i].bias = Vector<T>::Zero(p.bias.size());
    s.v[i] = s.m[i];
  }
  return s;
}

/// One bias-corrected Adam update. Throws StateError on a frozen model.
template <typename T>
void adam_step(BasicModel<T>& model, const typename BasicModel<T>::Gradients& grads, AdamState<T>& state) {
  if (model.frozen()) throw StateError("adam_step: model is frozen");
  if (grads.params.size() != model.params().size() || state.m.size() != model.params().size()) {
    throw std::invalid_argument("adam_step: gradient/state shape mismatch");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(state.learning_rate / (1.0 - std::pow(state.beta1, t)));
  const T v_scale = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, t)));
  const T eps = static_cast<T>(state.epsilon);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    param.array() -= step_size * m.array() / ((v.array() * v_scale).sqrt() + eps);
  };
  auto& params = model.mutable_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weight.size() == 0) continue;
    update(params[i].weight, grads.params[i].weight, state.m[i].weight, state.v[i].weight);
    update(params[i].bias, grads.params[i].bias, state.m[i].bias, state.v[i].bias);
  }
}

/// Sum of squared parameter gradients.
template <typename T>
double squared_norm(const typename BasicModel<T>::Gradients& grads) {
  double s = 0.0;
  for (const auto& p : grads.params) s += static_cast<double>(p.weight.squaredNorm()) + static_cast<double>(p.bias.squaredNorm());
  return s;
}

template <typename T>
void scale_gradients(typename BasicModel<T>::Gradients& grads, T factor) {
  for (auto& p : grads.params) {
    p.weight *= factor;
    p.bias *= factor;
  }
}

/// Rescales all gradient sets together so their joint L2 norm is at most
/// `max_norm`. A non-positive `max_norm` disables clipping. Returns the norm
/// before clipping.
template <typename T>
double clip_global_norm(std::span<typename BasicModel<T>::Gradients* const> grads, double max_norm) {
  double s = 0.0;
  for (const auto* g : grads) s += squared_norm<T>(*g);
  const double norm = std::sqrt(s);
  if (max_norm > 0.0 && norm > max_norm) {
    for (auto* g : grads) scale_gradients<T>(*g, static_cast<T>(max_norm / norm));
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
struct LossResult {
  double loss = 0.0;
  Matrix<T> grad;  // dLoss/dPred
};

inline constexpr double kWmseEpsilon = 1e-6;

/// Weighted, magnitude-normalized squared error. Rows are LLR positions with
/// stream-major layout, so row r uses weight[r % K]. The loss is averaged over
/// samples and streams: mean_{b,k} sum_i w_i (p - t)^2 / (|t| + eps).
template <typename T>
LossResult<T> wmse_loss(const Matrix<T>& pred, const Matrix<T>& target, std::span<const double> weights,
                        double epsilon = kWmseEpsilon) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw std::invalid_argument("wmse_loss: shape mismatch");
  const auto k = static_cast<Eigen::Index>(weights.size());
  if (k == 0 || pred.rows() % k != 0) throw std::invalid_argument("wmse_loss: width must be a multiple of K");
  const Eigen::Index streams = pred.rows() / k;
  const double norm = 1.0 / static_cast<double>(streams * pred.cols());
  LossResult<T> out;
  out.grad.resize(pred.rows(), pred.cols());
  double acc = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c)
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      const double w = weights[static_cast<std::size_t>(r % k)];
      const double t = static_cast<double>(target(r, c));
      const double d = static_cast<double>(pred(r, c)) - t;
      const double inv = w / (std::abs(t) + epsilon);
      acc += inv * d * d;
      out.grad(r, c) = static_cast<T>(2.0 * inv * d * norm);
    }
  out.loss = acc * norm;
  return out;
}

/// Mean absolute error over all entries; subgradient 0 at exact ties.
template <typename T>
LossResult<T> l1_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw std::invalid_argument("l1_loss: shape mismatch");
  const double norm = 1.0 / static_cast<double>(pred.size());
  LossResult<T> out;
  out.grad.resize(pred.rows(), pred.cols());
  double acc = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c)
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      const double d = static_cast<double>(pred(r, c)) - static_cast<double>(target(r, c));
      acc += std::abs(d);
      out.grad(r, c) = static_cast<T>(d > 0.0 ? norm : (d < 0.0 ? -norm : 0.0));
    }
  out.loss = acc * norm;
  return out;
}

// ---------------------------------------------------------------------------
// Weight files (float models)
//
// Layout, all integers little-endian:
//   "EQNW" | u32 version | u64 fingerprint | u32 layer count
//   per layer: u32 kind | u32 width | u32 slot | u32 input count | u32 inputs...
//   per dense layer in order: f32 weights (row-major, out x in) | f32 bias

inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model, std::uint64_t fingerprint);
Model deserialize_model(std::span<const std::uint8_t> bytes, std::uint64_t* fingerprint = nullptr);
void save_model(const Model& model, const std::string& path, std::uint64_t fingerprint);
Model load_model(const std::string& path, std::uint64_t* fingerprint = nullptr);

}  // namespace eqnet::nn
