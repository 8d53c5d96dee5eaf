// SPDX-License-Identifier: Apache-2.0
#include "semlab/numerics/graph.hpp"

#include <algorithm>
#include <cmath>

#include "semlab/simd/kernels.hpp"

namespace semlab::nn {
namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// sin(t/2)/t and (d/dt of that)/t, with series expansions near zero.
template <class T>
void half_angle_factors(T theta, T& f, T& g) {
  if (theta < T(1e-2)) {
    const T t2 = theta * theta;
    f = T(0.5) - t2 / T(48) + t2 * t2 / T(3840);
    g = T(-1) / T(24) + t2 / T(960) - t2 * t2 / T(107520);
  } else {
    const T s = std::sin(theta / 2), c = std::cos(theta / 2);
    f = s / theta;
    g = (theta / 2 * c - s) / (theta * theta * theta);
  }
}

}  // namespace

template <class T>
typename Graph<T>::Var Graph<T>::push(Tensor<T> value, const char* op,
                                      bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
typename Graph<T>::Var Graph<T>::push_ref(const Tensor<T>& ref, const char* op) {
  Node n;
  n.ref = &ref;
  n.op = op;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Tensor<T>& Graph<T>::grad_ref(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) {
    const auto& val = n.ref ? *n.ref : n.value;
    n.grad = Tensor<T>(val.shape());
  }
  return n.grad;
}

template <class T>
const Tensor<T>& Graph<T>::value(Var v) const {
  const Node& n = node(v);
  return n.ref ? *n.ref : n.value;
}

template <class T>
const Tensor<T>& Graph<T>::grad(Var v) const {
  return node(v).grad;
}

template <class T>
std::string_view Graph<T>::op_name(Var v) const {
  return node(v).op;
}

template <class T>
typename Graph<T>::Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), "constant", false);
}

template <class T>
typename Graph<T>::Var Graph<T>::variable(Tensor<T> value) {
  return push(std::move(value), "variable", true);
}

template <class T>
typename Graph<T>::LayerVars Graph<T>::bind_layer(const std::string& name,
                                                  const LayerParams<T>& layer) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  if (layer.weights.rank() != 2 || layer.biases.size() != layer.weights.rows())
    throw ConfigError("layer '" + name + "' has inconsistent shapes " +
                      shape_string(layer.weights.shape()) + " / " +
                      shape_string(layer.biases.shape()));
  LayerVars vars{push_ref(layer.weights, "weights"), push_ref(layer.biases, "biases")};
  bound_.emplace(name, vars);
  return vars;
}

template <class T>
typename Graph<T>::Var Graph<T>::affine(Var x, LayerVars layer) {
  const Tensor<T>& X = value(x);
  const Tensor<T>& W = value(layer.weights);
  const Tensor<T>& B = value(layer.biases);
  const std::size_t n = X.rows(), in = X.cols(), out = W.rows();
  if (W.cols() != in) {
    std::string name = "?";
    for (const auto& [k, v] : bound_)
      if (v.weights.id == layer.weights.id) name = k;
    throw ConfigError("layer '" + name + "' expects input width " +
                      std::to_string(W.cols()) + ", got " + std::to_string(in));
  }
  Tensor<T> Y({n, out});
  simd::kernels<T>().gemm_nt(n, out, in, X.data(), in, W.data(), in, Y.data(), out,
                             false);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < out; ++c) Y.at(r, c) += B[c];
  flops_ += 2ull * n * in * out;

  const Var w = layer.weights, b = layer.biases;
  Var y = push(std::move(Y), "affine", needs(x) || needs(w) || needs(b));
  node(y).backward = [x, w, b, n, in, out](Graph& g, const Tensor<T>& gy) {
    const auto& k = simd::kernels<T>();
    if (g.needs(x)) {
      k.gemm_nn(n, in, out, gy.data(), out, g.value(w).data(), in,
                g.grad_ref(x).data(), in, true);
    }
    if (g.needs(w)) {
      k.gemm_tn(out, in, n, gy.data(), out, g.value(x).data(), in,
                g.grad_ref(w).data(), in, true);
    }
    if (g.needs(b)) {
      Tensor<T>& gb = g.grad_ref(b);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < out; ++c) gb[c] += gy.at(r, c);
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::leaky_relu(Var x, T slope) {
  const Tensor<T>& X = value(x);
  Tensor<T> Y(X.shape());
  simd::kernels<T>().leaky_relu(X.size(), slope, X.data(), Y.data());
  Var y = push(std::move(Y), "leaky_relu", needs(x));
  node(y).backward = [x, slope](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& X = g.value(x);
    simd::kernels<T>().leaky_relu_backward(X.size(), slope, X.data(), gy.data(),
                                           g.grad_ref(x).data());
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::tanh(Var x) {
  const Tensor<T>& X = value(x);
  Tensor<T> Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::tanh(X[i]);
  Var y = push(std::move(Y), "tanh", needs(x));
  node(y).backward = [x, y](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& Y = g.value(y);
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < Y.size(); ++i) gx[i] += gy[i] * (T(1) - Y[i] * Y[i]);
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::exp(Var x) {
  const Tensor<T>& X = value(x);
  Tensor<T> Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::exp(X[i]);
  Var y = push(std::move(Y), "exp", needs(x));
  node(y).backward = [x, y](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& Y = g.value(y);
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < Y.size(); ++i) gx[i] += gy[i] * Y[i];
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::exp_clamped(Var x, T lo, T hi) {
  const Tensor<T>& X = value(x);
  Tensor<T> Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::clamp(std::exp(X[i]), lo, hi);
  Var y = push(std::move(Y), "exp_clamped", needs(x));
  node(y).backward = [x, y, lo, hi](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& Y = g.value(y);
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < Y.size(); ++i)
      if (Y[i] > lo && Y[i] < hi) gx[i] += gy[i] * Y[i];
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::activate(Var x, Activation act, T slope) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kLeakyRelu:
      return leaky_relu(x, slope);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kExp:
      return exp(x);
  }
  return x;
}

template <class T>
typename Graph<T>::Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat_cols of nothing");
  const std::size_t n = value(parts[0]).rows();
  std::size_t width = 0;
  bool any_grad = false;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    if (value(p).rows() != n)
      throw ConfigError("concat_cols row mismatch: " + std::to_string(value(p).rows()) +
                        " vs " + std::to_string(n));
    offsets.push_back(width);
    width += value(p).cols();
    any_grad = any_grad || needs(p);
  }
  Tensor<T> Y({n, width});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& P = value(parts[k]);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(P.row_span(r).begin(), P.row_span(r).end(),
                Y.data() + r * width + offsets[k]);
  }
  Var y = push(std::move(Y), "concat_cols", any_grad);
  std::vector<Var> ps(parts.begin(), parts.end());
  node(y).backward = [ps, offsets, n, width](Graph& g, const Tensor<T>& gy) {
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (!g.needs(ps[k])) continue;
      Tensor<T>& gp = g.grad_ref(ps[k]);
      const std::size_t c = gp.cols();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) gp.at(r, j) += gy[r * width + offsets[k] + j];
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor<T>& X = value(x);
  if (begin > end || end > X.cols())
    throw ConfigError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                      ") out of range for width " + std::to_string(X.cols()));
  const std::size_t n = X.rows(), w = end - begin;
  Tensor<T> Y({n, w});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < w; ++j) Y.at(r, j) = X.at(r, begin + j);
  Var y = push(std::move(Y), "slice_cols", needs(x));
  node(y).backward = [x, begin, n, w](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < w; ++j) gx.at(r, begin + j) += gy.at(r, j);
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::pad_cols(Var x, std::size_t width) {
  const Tensor<T>& X = value(x);
  if (width < X.cols())
    throw FramingError("cannot zero-pad width " + std::to_string(X.cols()) + " down to " +
                       std::to_string(width));
  const std::size_t n = X.rows(), w = X.cols();
  Tensor<T> Y({n, width});
  for (std::size_t r = 0; r < n; ++r)
    std::copy(X.row_span(r).begin(), X.row_span(r).end(), Y.data() + r * width);
  Var y = push(std::move(Y), "pad_cols", needs(x));
  node(y).backward = [x, n, w](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < w; ++j) gx.at(r, j) += gy.at(r, j);
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor<T>& X = value(x);
  const std::size_t c = X.cols();
  Tensor<T> Y({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= X.rows()) throw ConfigError("gather_rows index out of range");
    std::copy(X.row_span(rows[i]).begin(), X.row_span(rows[i]).end(), Y.data() + i * c);
  }
  Var y = push(std::move(Y), "gather_rows", needs(x));
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  node(y).backward = [x, idx, c](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx.at(idx[i], j) += gy.at(i, j);
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::scatter_rows(std::span<const Var> parts,
                                              std::span<const std::vector<std::size_t>> rows,
                                              std::size_t total_rows) {
  if (parts.size() != rows.size() || parts.empty())
    throw ConfigError("scatter_rows needs one row list per part");
  const std::size_t c = value(parts[0]).cols();
  Tensor<T> Y({total_rows, c});
  bool any_grad = false;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<T>& P = value(parts[p]);
    if (P.cols() != c || P.rows() != rows[p].size())
      throw ConfigError("scatter_rows part " + std::to_string(p) + " has shape " +
                        dims(P.rows(), P.cols()));
    for (std::size_t i = 0; i < rows[p].size(); ++i) {
      if (rows[p][i] >= total_rows) throw ConfigError("scatter_rows index out of range");
      std::copy(P.row_span(i).begin(), P.row_span(i).end(), Y.data() + rows[p][i] * c);
    }
    any_grad = any_grad || needs(parts[p]);
  }
  Var y = push(std::move(Y), "scatter_rows", any_grad);
  std::vector<Var> ps(parts.begin(), parts.end());
  std::vector<std::vector<std::size_t>> rs(rows.begin(), rows.end());
  node(y).backward = [ps, rs, c](Graph& g, const Tensor<T>& gy) {
    for (std::size_t p = 0; p < ps.size(); ++p) {
      if (!g.needs(ps[p])) continue;
      Tensor<T>& gp = g.grad_ref(ps[p]);
      for (std::size_t i = 0; i < rs[p].size(); ++i)
        for (std::size_t j = 0; j < c; ++j) gp.at(i, j) += gy.at(rs[p][i], j);
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b) {
  const Tensor<T>& A = value(a);
  const Tensor<T>& B = value(b);
  if (A.shape() != B.shape())
    throw ConfigError("add shape mismatch " + shape_string(A.shape()) + " vs " +
                      shape_string(B.shape()));
  Tensor<T> Y = A;
  simd::kernels<T>().axpy(Y.size(), T(1), B.data(), Y.data());
  Var y = push(std::move(Y), "add", needs(a) || needs(b));
  node(y).backward = [a, b](Graph& g, const Tensor<T>& gy) {
    const auto& k = simd::kernels<T>();
    if (g.needs(a)) k.axpy(gy.size(), T(1), gy.data(), g.grad_ref(a).data());
    if (g.needs(b)) k.axpy(gy.size(), T(1), gy.data(), g.grad_ref(b).data());
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::mul(Var a, Var b) {
  const Tensor<T>& A = value(a);
  const Tensor<T>& B = value(b);
  if (A.shape() != B.shape())
    throw ConfigError("mul shape mismatch " + shape_string(A.shape()) + " vs " +
                      shape_string(B.shape()));
  Tensor<T> Y(A.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = A[i] * B[i];
  Var y = push(std::move(Y), "mul", needs(a) || needs(b));
  node(y).backward = [a, b](Graph& g, const Tensor<T>& gy) {
    if (g.needs(a)) {
      const Tensor<T>& B = g.value(b);
      Tensor<T>& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * B[i];
    }
    if (g.needs(b)) {
      const Tensor<T>& A = g.value(a);
      Tensor<T>& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * A[i];
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::scale(Var x, T factor) {
  Tensor<T> Y = value(x);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= factor;
  Var y = push(std::move(Y), "scale", needs(x));
  node(y).backward = [x, factor](Graph& g, const Tensor<T>& gy) {
    if (g.needs(x)) simd::kernels<T>().axpy(gy.size(), factor, gy.data(), g.grad_ref(x).data());
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::weighted_sum(std::span<const Var> terms,
                                              std::span<const T> coeffs) {
  if (terms.empty() || terms.size() != coeffs.size())
    throw ConfigError("weighted_sum needs one coefficient per term");
  Tensor<T> Y(value(terms[0]).shape());
  bool any_grad = false;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const Tensor<T>& X = value(terms[k]);
    if (X.shape() != Y.shape()) throw ConfigError("weighted_sum shape mismatch");
    simd::kernels<T>().axpy(Y.size(), coeffs[k], X.data(), Y.data());
    any_grad = any_grad || needs(terms[k]);
  }
  Var y = push(std::move(Y), "weighted_sum", any_grad);
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<T> cs(coeffs.begin(), coeffs.end());
  node(y).backward = [ts, cs](Graph& g, const Tensor<T>& gy) {
    for (std::size_t k = 0; k < ts.size(); ++k)
      if (g.needs(ts[k]))
        simd::kernels<T>().axpy(gy.size(), cs[k], gy.data(), g.grad_ref(ts[k]).data());
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::sum(Var x) {
  const Tensor<T>& X = value(x);
  T total = T(0);
  for (std::size_t i = 0; i < X.size(); ++i) total += X[i];
  Var y = push(Tensor<T>({1, 1}, std::vector<T>{total}), "sum", needs(x));
  node(y).backward = [x](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[0];
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::mean(Var x) {
  const std::size_t n = value(x).size();
  if (n == 0) throw ConfigError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::power_normalize(Var x) {
  const Tensor<T>& X = value(x);
  if (X.cols() % 2 != 0)
    throw FramingError("symbol payload has odd width " + std::to_string(X.cols()));
  Tensor<T> Y = X;
  for (std::size_t i = 0; i < Y.size(); i += 2) {
    const T mag = std::hypot(Y[i], Y[i + 1]);
    if (mag > T(1)) {
      Y[i] /= mag;
      Y[i + 1] /= mag;
    }
  }
  Var y = push(std::move(Y), "power_normalize", needs(x));
  node(y).backward = [x](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& X = g.value(x);
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < X.size(); i += 2) {
      const T re = X[i], im = X[i + 1];
      const T mag = std::hypot(re, im);
      if (mag <= T(1)) {
        gx[i] += gy[i];
        gx[i + 1] += gy[i + 1];
      } else {
        // (I - u u^T) / |s| applied to the upstream gradient
        const T ur = re / mag, ui = im / mag;
        const T proj = ur * gy[i] + ui * gy[i + 1];
        gx[i] += (gy[i] - proj * ur) / mag;
        gx[i + 1] += (gy[i + 1] - proj * ui) / mag;
      }
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::rotvec_to_quat(Var x) {
  const Tensor<T>& X = value(x);
  if (X.cols() != 3) throw ConfigError("rotvec_to_quat expects rows of 3");
  const std::size_t n = X.rows();
  Tensor<T> Y({n, 4});
  for (std::size_t r = 0; r < n; ++r) {
    const T vx = X.at(r, 0), vy = X.at(r, 1), vz = X.at(r, 2);
    const T theta = std::sqrt(vx * vx + vy * vy + vz * vz);
    T f, gfac;
    half_angle_factors(theta, f, gfac);
    Y.at(r, 0) = std::cos(theta / 2);
    Y.at(r, 1) = f * vx;
    Y.at(r, 2) = f * vy;
    Y.at(r, 3) = f * vz;
  }
  Var y = push(std::move(Y), "rotvec_to_quat", needs(x));
  node(y).backward = [x, n](Graph& g, const Tensor<T>& gy) {
    if (!g.needs(x)) return;
    const Tensor<T>& X = g.value(x);
    Tensor<T>& gx = g.grad_ref(x);
    for (std::size_t r = 0; r < n; ++r) {
      const T v[3] = {X.at(r, 0), X.at(r, 1), X.at(r, 2)};
      const T theta = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      T f, gfac;
      half_angle_factors(theta, f, gfac);
      const T gw = gy.at(r, 0);
      const T gv[3] = {gy.at(r, 1), gy.at(r, 2), gy.at(r, 3)};
      const T v_dot_gv = v[0] * gv[0] + v[1] * gv[1] + v[2] * gv[2];
      for (int j = 0; j < 3; ++j)
        gx.at(r, j) += -gw * f / 2 * v[j] + f * gv[j] + gfac * v[j] * v_dot_gv;
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::app_distortion(Var position, Var quat_raw,
                                                const Tensor<T>& target_position,
                                                const Tensor<T>& target_quat, T alpha) {
  const Tensor<T>& P = value(position);
  const Tensor<T>& Q = value(quat_raw);
  const std::size_t n = P.rows();
  if (P.cols() != 3 || Q.cols() != 4 || Q.rows() != n || target_position.rows() != n ||
      target_position.cols() != 3 || target_quat.rows() != n || target_quat.cols() != 4)
    throw ConfigError("app_distortion shape mismatch");
  Tensor<T> Y({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    T dist2 = 0, qn2 = 0, dot = 0;
    for (int j = 0; j < 3; ++j) {
      const T d = target_position.at(r, j) - P.at(r, j);
      dist2 += d * d;
    }
    for (int j = 0; j < 4; ++j) {
      qn2 += Q.at(r, j) * Q.at(r, j);
      dot += target_quat.at(r, j) * Q.at(r, j);
    }
    const T qn = std::sqrt(qn2);
    if (!(qn > T(1e-12)))
      throw DegenerateInputError("estimated quaternion has near-zero norm at row " +
                                 std::to_string(r));
    Y.at(r, 0) = (T(1) - alpha) * std::sqrt(dist2) - alpha * std::abs(dot / qn);
  }
  Var y = push(std::move(Y), "app_distortion", needs(position) || needs(quat_raw));
  node(y).backward = [position, quat_raw, tp = target_position, tq = target_quat, alpha,
                      n](Graph& g, const Tensor<T>& gy) {
    const Tensor<T>& P = g.value(position);
    const Tensor<T>& Q = g.value(quat_raw);
    for (std::size_t r = 0; r < n; ++r) {
      const T go = gy.at(r, 0);
      if (g.needs(position)) {
        T d[3], dist2 = 0;
        for (int j = 0; j < 3; ++j) {
          d[j] = tp.at(r, j) - P.at(r, j);
          dist2 += d[j] * d[j];
        }
        const T dist = std::sqrt(dist2);
        if (dist > T(0)) {
          Tensor<T>& gp = g.grad_ref(position);
          for (int j = 0; j < 3; ++j) gp.at(r, j) -= go * (T(1) - alpha) * d[j] / dist;
        }
      }
      if (g.needs(quat_raw)) {
        T qn2 = 0;
        for (int j = 0; j < 4; ++j) qn2 += Q.at(r, j) * Q.at(r, j);
        const T qn = std::sqrt(qn2);
        T s = 0;
        for (int j = 0; j < 4; ++j) s += tq.at(r, j) * Q.at(r, j) / qn;
        const T sign = s > 0 ? T(1) : (s < 0 ? T(-1) : T(0));
        Tensor<T>& gq = g.grad_ref(quat_raw);
        for (int j = 0; j < 4; ++j) {
          const T u = Q.at(r, j) / qn;
          gq.at(r, j) += go * (-alpha * sign * (tq.at(r, j) - s * u) / qn);
        }
      }
    }
  };
  return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::kl_standard_normal(Var mu, Var sigma) {
  const Tensor<T>& M = value(mu);
  const Tensor<T>& S = value(sigma);
  if (M.shape() != S.shape()) throw ConfigError("kl_standard_normal shape mismatch");
  const std::size_t n = M.rows(), d = M.cols();
  Tensor<T> Y({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    T acc = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T m = M.at(r, j), s = S.at(r, j);
      acc += m * m + s * s - T(1) - T(2) * std::log(s);
    }
    Y.at(r, 0) = T(0.5) * acc;
  }
  Var y = push(std::move(Y), "kl_standard_normal", needs(mu) || needs(sigma));
  node(y).backward = [mu, sigma, n, d](Graph& g, const Tensor<T>& gy) {
    const Tensor<T>& M = g.value(mu);
    const Tensor<T>& S = g.value(sigma);
    for (std::size_t r = 0; r < n; ++r) {
      const T go = gy.at(r, 0);
      if (g.needs(mu)) {
        Tensor<T>& gm = g.grad_ref(mu);
        for (std::size_t j = 0; j < d; ++j) gm.at(r, j) += go * M.at(r, j);
      }
      if (g.needs(sigma)) {
        Tensor<T>& gs = g.grad_ref(sigma);
        for (std::size_t j = 0; j < d; ++j) {
          const T s = S.at(r, j);
          gs.at(r, j) += go * (s - T(1) / s);
        }
      }
    }
  };
  return y;
}

template <class T>
void Graph<T>::backward(Var loss) {
  const Tensor<T>& L = value(loss);
  if (L.size() != 1) throw ConfigError("backward target must be a scalar");
  if (!std::isfinite(L[0])) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      const Tensor<T>& v = n.ref ? *n.ref : n.value;
      if (!v.all_finite())
        throw NumericError("non-finite value first produced at node #" + std::to_string(i) +
                           " (" + n.op + ")");
    }
    throw NumericError("non-finite loss");
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  grad_ref(loss)[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty() || !n.requires_grad) continue;
    n.backward(*this, n.grad);
  }
}

template <class T>
void Graph<T>::accumulate_param_grads(ParamSet<T>& grads) const {
  const auto& k = simd::kernels<T>();
  for (const auto& [name, vars] : bound_) {
    auto& dst = grads.at(name);
    const Tensor<T>& gw = node(vars.weights).grad;
    const Tensor<T>& gb = node(vars.biases).grad;
    if (!gw.empty()) {
      if (gw.size() != dst.weights.size())
        throw ConfigError("gradient layout mismatch for layer '" + name + "'");
      k.axpy(gw.size(), T(1), gw.data(), dst.weights.data());
    }
    if (!gb.empty()) k.axpy(gb.size(), T(1), gb.data(), dst.biases.data());
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace semlab::nn
