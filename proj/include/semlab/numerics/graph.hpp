// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over rank-2 tensors (rows = batch).
// The op vocabulary is fixed to what the codec and its losses need.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semlab/numerics/params.hpp"
#include "semlab/numerics/tensor.hpp"

namespace semlab::nn {

enum class Activation { kIdentity, kLeakyRelu, kTanh, kExp };

template <class T>
class Graph {
 public:
  struct Var {
    std::uint32_t id = UINT32_MAX;
    bool valid() const noexcept { return id != UINT32_MAX; }
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  /// A leaf that receives a gradient (used by finite-difference probes).
  Var variable(Tensor<T> value);

  struct LayerVars {
    Var weights;
    Var biases;
  };
  /// Binds a layer by reference. Binding the same name twice returns the
  /// same nodes, so a layer reused within one graph accumulates one gradient.
  LayerVars bind_layer(const std::string& name, const LayerParams<T>& layer);

  /// y = x W^T + b
  Var affine(Var x, LayerVars layer);
  Var leaky_relu(Var x, T slope);
  Var tanh(Var x);
  Var exp(Var x);
  /// clamp(exp(x), lo, hi); zero gradient where clamped.
  Var exp_clamped(Var x, T lo, T hi);
  Var activate(Var x, Activation act, T slope);

  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var x, std::size_t begin, std::size_t end);
  Var pad_cols(Var x, std::size_t width);
  Var gather_rows(Var x, std::span<const std::size_t> rows);
  /// Output row rows[p][j] is row j of parts[p]; uncovered rows are zero.
  Var scatter_rows(std::span<const Var> parts,
                   std::span<const std::vector<std::size_t>> rows,
                   std::size_t total_rows);

  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, T factor);
  /// Sum of same-shape terms with fixed coefficients.
  Var weighted_sum(std::span<const Var> terms, std::span<const T> coeffs);
  Var sum(Var x);
  Var mean(Var x);

  /// Each consecutive (re, im) pair scaled by min(1, 1/|s|).
  Var power_normalize(Var x);
  /// Rows of 3 (axis * angle) to rows of 4 (w, x, y, z).
  Var rotvec_to_quat(Var x);
  /// Per row: (1 - alpha) * |p - p_hat| - alpha * |q . q_hat / |q_hat||.
  Var app_distortion(Var position, Var quat_raw, const Tensor<T>& target_position,
                     const Tensor<T>& target_quat, T alpha);
  /// Per row: 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2).
  Var kl_standard_normal(Var mu, Var sigma);

  /// References stay valid only until the next node is added.
  const Tensor<T>& value(Var v) const;
  /// Gradient of the last backward() target; empty if the node received none.
  const Tensor<T>& grad(Var v) const;
  std::string_view op_name(Var v) const;

  /// Throws NumericError naming the first non-finite node when the loss is
  /// not finite.
  void backward(Var loss);

  /// Adds gradients of all bound layers into `grads`. Layers of `grads` that
  /// were never bound are left untouched (their gradient is zero).
  void accumulate_param_grads(ParamSet<T>& grads) const;

  std::uint64_t flops() const noexcept { return flops_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    const char* op = "";
    bool requires_grad = false;
    std::function<void(Graph&, const Tensor<T>& out_grad)> backward;
  };

  Var push(Tensor<T> value, const char* op, bool requires_grad);
  Var push_ref(const Tensor<T>& ref, const char* op);
  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }
  bool needs(Var v) const { return node(v).requires_grad; }
  /// Zero-initialized on first use.
  Tensor<T>& grad_ref(Var v);

  std::vector<Node> nodes_;
  std::map<std::string, LayerVars> bound_;
  std::uint64_t flops_ = 0;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace semlab::nn
