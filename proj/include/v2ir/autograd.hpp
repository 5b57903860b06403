#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "v2ir/common.hpp"
#include "v2ir/tensor.hpp"

namespace v2ir {

// ---------------------------------------------------------------------------
// Tape. Ops build a DAG of Nodes; backward() walks it in reverse creation
// order. Gradients are overwritten (not accumulated) across backward calls:
// every tensor reachable from the loss is zeroed before propagation starts.
// ---------------------------------------------------------------------------

template <class T>
struct Node;

template <class T>
using Value = std::shared_ptr<Node<T>>;

template <class T>
struct Node {
  TensorPtr<T> value;
  std::vector<Value<T>> inputs;
  std::function<void(Node<T>&)> backprop;  // accumulates into inputs' grads
  bool requires_grad = false;
  std::uint64_t id = 0;

  static std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }
};

template <class T>
Value<T> make_node(TensorPtr<T> value, std::vector<Value<T>> inputs,
                   std::function<void(Node<T>&)> backprop) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->inputs = std::move(inputs);
  node->backprop = std::move(backprop);
  for (const auto& in : node->inputs)
    if (in->requires_grad) node->requires_grad = true;
  node->id = Node<T>::next_id();
  return node;
}

// Trainable leaf: grads land in the shared tensor, visible to the ParamStore.
template <class T>
Value<T> leaf(TensorPtr<T> t, bool requires_grad = true) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(t);
  node->requires_grad = requires_grad;
  node->id = Node<T>::next_id();
  return node;
}

template <class T>
Value<T> constant(Tensor<T> t) {
  return leaf(std::make_shared<Tensor<T>>(std::move(t)), false);
}

// Cuts the graph: same tensor, no history, no gradient.
template <class T>
Value<T> detach(const Value<T>& v) {
  return leaf(v->value, false);
}

template <class T>
T scalar_of(const Value<T>& v) {
  require(v->value->numel() == 1, "expected scalar value");
  return v->value->data[0];
}

template <class T>
void backward(const Value<T>& loss) {
  require(loss->value->numel() == 1, "backward: loss must be scalar");
  if (!std::isfinite(static_cast<double>(loss->value->data[0])))
    throw numeric_error("backward: loss is not finite");

  // Reachable set; reverse creation order is a valid topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.get()};
  seen.insert(loss.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs)
      if (seen.insert(in.get()).second) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  std::unordered_set<Tensor<T>*> zeroed;
  for (Node<T>* n : order)
    if (zeroed.insert(n->value.get()).second) n->value->zero_grad();

  loss->value->grad[0] = T(1);
  for (Node<T>* n : order)
    if (n->requires_grad && n->backprop) n->backprop(*n);
}

// ---------------------------------------------------------------------------
// Convolution kernels (shared by forward ops and their backward closures).
// ---------------------------------------------------------------------------

namespace detail {

struct IdxRange {
  int lo, hi;  // inclusive; empty when lo > hi
};

// Valid t in [0, t_extent) such that t*stride - pad + k lands in [0, limit).
inline IdxRange conv_range(int t_extent, int limit, int stride, int pad, int k) {
  int lo = (pad - k) <= 0 ? 0 : (pad - k + stride - 1) / stride;
  const int num = limit - 1 + pad - k;
  int hi = num < 0 ? -1 : num / stride;
  if (hi > t_extent - 1) hi = t_extent - 1;
  return {lo, hi};
}

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int convt_out_extent(int in, int k, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + k;
}

struct ConvDims {
  int N, C, H, W;   // input
  int O, KH, KW;    // filter
  int OH, OW;       // output
};

// y[n,o,oh,ow] = bias[o] + sum_{c,kh,kw} x[n,c,oh*s-p+kh,ow*s-p+kw] * w[o,c,kh,kw]
template <class T>
void conv2d_fwd(const ConvDims& d, const T* x, const T* w, const T* bias, int s, int p, T* y) {
  const std::size_t plane = static_cast<std::size_t>(d.OH) * d.OW;
  for (int n = 0; n < d.N; ++n) {
    for (int o = 0; o < d.O; ++o) {
      T* yp = y + (static_cast<std::size_t>(n) * d.O + o) * plane;
      std::fill(yp, yp + plane, bias ? bias[o] : T(0));
      for (int c = 0; c < d.C; ++c) {
        const T* xp = x + (static_cast<std::size_t>(n) * d.C + c) * d.H * d.W;
        const T* wp = w + (static_cast<std::size_t>(o) * d.C + c) * d.KH * d.KW;
        for (int kh = 0; kh < d.KH; ++kh) {
          const IdxRange rh = conv_range(d.OH, d.H, s, p, kh);
          for (int kw = 0; kw < d.KW; ++kw) {
            const T wv = wp[kh * d.KW + kw];
            const IdxRange rw = conv_range(d.OW, d.W, s, p, kw);
            for (int oh = rh.lo; oh <= rh.hi; ++oh) {
              const T* xrow = xp + static_cast<std::ptrdiff_t>(oh * s - p + kh) * d.W - p + kw;
              T* yrow = yp + static_cast<std::size_t>(oh) * d.OW;
              for (int ow = rw.lo; ow <= rw.hi; ++ow) yrow[ow] += wv * xrow[ow * s];
            }
          }
        }
      }
    }
  }
}

// Gradients of conv2d_fwd. Any of dx/dw/db may be null to skip that output.
template <class T>
void conv2d_bwd(const ConvDims& d, const T* x, const T* w, const T* gy, int s, int p, T* dx,
                T* dw, T* db) {
  const std::size_t plane = static_cast<std::size_t>(d.OH) * d.OW;
  for (int n = 0; n < d.N; ++n) {
    for (int o = 0; o < d.O; ++o) {
      const T* gp = gy + (static_cast<std::size_t>(n) * d.O + o) * plane;
      if (db) {
        T acc = T(0);
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
        db[o] += acc;
      }
      if (!dx && !dw) continue;
      for (int c = 0; c < d.C; ++c) {
        const std::size_t xbase = (static_cast<std::size_t>(n) * d.C + c) *
                                  static_cast<std::size_t>(d.H) * d.W;
        const T* xp = x + xbase;
        T* dxp = dx ? dx + xbase : nullptr;
        const T* wp = w + (static_cast<std::size_t>(o) * d.C + c) * d.KH * d.KW;
        T* dwp = dw ? dw + (static_cast<std::size_t>(o) * d.C + c) * d.KH * d.KW : nullptr;
        for (int kh = 0; kh < d.KH; ++kh) {
          const IdxRange rh = conv_range(d.OH, d.H, s, p, kh);
          for (int kw = 0; kw < d.KW; ++kw) {
            const IdxRange rw = conv_range(d.OW, d.W, s, p, kw);
            const T wv = wp[kh * d.KW + kw];
            T wacc = T(0);
            for (int oh = rh.lo; oh <= rh.hi; ++oh) {
              const std::ptrdiff_t xoff =
                  static_cast<std::ptrdiff_t>(oh * s - p + kh) * d.W - p + kw;
              const T* grow = gp + static_cast<std::size_t>(oh) * d.OW;
              if (dwp) {
                const T* xrow = xp + xoff;
                for (int ow = rw.lo; ow <= rw.hi; ++ow) wacc += xrow[ow * s] * grow[ow];
              }
              if (dxp) {
                T* dxrow = dxp + xoff;
                for (int ow = rw.lo; ow <= rw.hi; ++ow) dxrow[ow * s] += wv * grow[ow];
              }
            }
            if (dwp) dwp[kh * d.KW + kw] += wacc;
          }
        }
      }
    }
  }
}

struct ConvTDims {
  int N, CI, H, W;  // input
  int CO, KH, KW;   // filter [CI,CO,KH,KW]
  int OH, OW;       // output
};

// y[n,co,h*s-p+kh,w*s-p+kw] += x[n,ci,h,w] * wt[ci,co,kh,kw]; plus bias.
template <class T>
void convt2d_fwd(const ConvTDims& d, const T* x, const T* w, const T* bias, int s, int p, T* y) {
  const std::size_t plane = static_cast<std::size_t>(d.OH) * d.OW;
  for (int n = 0; n < d.N; ++n) {
    for (int co = 0; co < d.CO; ++co) {
      T* yp = y + (static_cast<std::size_t>(n) * d.CO + co) * plane;
      std::fill(yp, yp + plane, bias ? bias[co] : T(0));
      for (int ci = 0; ci < d.CI; ++ci) {
        const T* xp = x + (static_cast<std::size_t>(n) * d.CI + ci) * d.H * d.W;
        const T* wp = w + (static_cast<std::size_t>(ci) * d.CO + co) * d.KH * d.KW;
        for (int kh = 0; kh < d.KH; ++kh) {
          const IdxRange rh = conv_range(d.H, d.OH, s, p, kh);
          for (int kw = 0; kw < d.KW; ++kw) {
            const T wv = wp[kh * d.KW + kw];
            const IdxRange rw = conv_range(d.W, d.OW, s, p, kw);
            for (int h = rh.lo; h <= rh.hi; ++h) {
              const T* xrow = xp + static_cast<std::size_t>(h) * d.W;
              T* yrow = yp + static_cast<std::ptrdiff_t>(h * s - p + kh) * d.OW - p + kw;
              for (int iw = rw.lo; iw <= rw.hi; ++iw) yrow[iw * s] += wv * xrow[iw];
            }
          }
        }
      }
    }
  }
}

template <class T>
void convt2d_bwd(const ConvTDims& d, const T* x, const T* w, const T* gy, int s, int p, T* dx,
                 T* dw, T* db) {
  const std::size_t plane = static_cast<std::size_t>(d.OH) * d.OW;
  if (db) {
    for (int n = 0; n < d.N; ++n)
      for (int co = 0; co < d.CO; ++co) {
        const T* gp = gy + (static_cast<std::size_t>(n) * d.CO + co) * plane;
        T acc = T(0);
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
        db[co] += acc;
      }
  }
  if (!dx && !dw) return;
  for (int n = 0; n < d.N; ++n) {
    for (int ci = 0; ci < d.CI; ++ci) {
      const std::size_t xbase =
          (static_cast<std::size_t>(n) * d.CI + ci) * static_cast<std::size_t>(d.H) * d.W;
      const T* xp = x + xbase;
      T* dxp = dx ? dx + xbase : nullptr;
      for (int co = 0; co < d.CO; ++co) {
        const T* gp = gy + (static_cast<std::size_t>(n) * d.CO + co) * plane;
        const T* wp = w + (static_cast<std::size_t>(ci) * d.CO + co) * d.KH * d.KW;
        T* dwp = dw ? dw + (static_cast<std::size_t>(ci) * d.CO + co) * d.KH * d.KW : nullptr;
        for (int kh = 0; kh < d.KH; ++kh) {
          const IdxRange rh = conv_range(d.H, d.OH, s, p, kh);
          for (int kw = 0; kw < d.KW; ++kw) {
            const T wv = wp[kh * d.KW + kw];
            const IdxRange rw = conv_range(d.W, d.OW, s, p, kw);
            T wacc = T(0);
            for (int h = rh.lo; h <= rh.hi; ++h) {
              const T* grow = gp + static_cast<std::ptrdiff_t>(h * s - p + kh) * d.OW - p + kw;
              const T* xrow = xp + static_cast<std::size_t>(h) * d.W;
              if (dwp)
                for (int iw = rw.lo; iw <= rw.hi; ++iw) wacc += xrow[iw] * grow[iw * s];
              if (dxp) {
                T* dxrow = dxp + static_cast<std::size_t>(h) * d.W;
                for (int iw = rw.lo; iw <= rw.hi; ++iw) dxrow[iw] += wv * grow[iw * s];
              }
            }
            if (dwp) dwp[kh * d.KW + kw] += wacc;
          }
        }
      }
    }
  }
}

template <class T>
T* grad_or_null(Node<T>& n) {
  return n.requires_grad ? n.value->grad.data() : nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Layer ops
// ---------------------------------------------------------------------------

// Cross-correlation, weight layout OIHW, output H' = (H+2p-KH)/s + 1.
// Pass a null bias Value for the bias-free form.
template <class T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, int stride, int pad) {
  const Tensor<T>& xt = *x->value;
  const Tensor<T>& wt = *w->value;
  require(xt.ndim() == 4 && wt.ndim() == 4, "conv2d: x and w must be 4-d");
  require(wt.shape[1] == xt.shape[1],
          "conv2d: weight expects " + std::to_string(wt.shape[1]) + " input channels, got " +
              std::to_string(xt.shape[1]));
  require(stride >= 1 && pad >= 0, "conv2d: stride >= 1, pad >= 0");
  if (b) require(b->value->numel() == wt.shape[0], "conv2d: bias size must equal out channels");

  detail::ConvDims d{xt.shape[0], xt.shape[1], xt.shape[2], xt.shape[3],
                     wt.shape[0], wt.shape[2], wt.shape[3],
                     detail::conv_out_extent(xt.shape[2], wt.shape[2], stride, pad),
                     detail::conv_out_extent(xt.shape[3], wt.shape[3], stride, pad)};
  require(d.OH > 0 && d.OW > 0, "conv2d: non-positive output extent");

  auto out = make_tensor<T>(Shape{d.N, d.O, d.OH, d.OW});
  detail::conv2d_fwd(d, xt.data.data(), wt.data.data(), b ? b->value->data.data() : nullptr,
                     stride, pad, out->data.data());

  std::vector<Value<T>> inputs{x, w};
  if (b) inputs.push_back(b);
  return make_node<T>(out, std::move(inputs), [d, stride, pad](Node<T>& self) {
    auto& xi = *self.inputs[0];
    auto& wi = *self.inputs[1];
    detail::conv2d_bwd<T>(d, xi.value->data.data(), wi.value->data.data(),
                          self.value->grad.data(), stride, pad, detail::grad_or_null(xi),
                          detail::grad_or_null(wi),
                          self.inputs.size() > 2 ? detail::grad_or_null(*self.inputs[2])
                                                 : nullptr);
  });
}

// Transposed convolution, the linear adjoint of conv2d in its data argument.
// Weight layout [C_in, C_out, KH, KW]; H' = (H-1)*s - 2p + KH.
template <class T>
Value<T> conv_transpose2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, int stride,
                          int pad) {
  const Tensor<T>& xt = *x->value;
  const Tensor<T>& wt = *w->value;
  require(xt.ndim() == 4 && wt.ndim() == 4, "conv_transpose2d: x and w must be 4-d");
  require(wt.shape[0] == xt.shape[1],
          "conv_transpose2d: weight expects " + std::to_string(wt.shape[0]) +
              " input channels, got " + std::to_string(xt.shape[1]));
  require(stride >= 1 && pad >= 0, "conv_transpose2d: stride >= 1, pad >= 0");
  if (b)
    require(b->value->numel() == wt.shape[1],
            "conv_transpose2d: bias size must equal out channels");

  detail::ConvTDims d{xt.shape[0], xt.shape[1], xt.shape[2], xt.shape[3],
                      wt.shape[1], wt.shape[2], wt.shape[3],
                      detail::convt_out_extent(xt.shape[2], wt.shape[2], stride, pad),
                      detail::convt_out_extent(xt.shape[3], wt.shape[3], stride, pad)};
  require(d.OH > 0 && d.OW > 0, "conv_transpose2d: non-positive output extent");

  auto out = make_tensor<T>(Shape{d.N, d.CO, d.OH, d.OW});
  detail::convt2d_fwd(d, xt.data.data(), wt.data.data(), b ? b->value->data.data() : nullptr,
                      stride, pad, out->data.data());

  std::vector<Value<T>> inputs{x, w};
  if (b) inputs.push_back(b);
  return make_node<T>(out, std::move(inputs), [d, stride, pad](Node<T>& self) {
    auto& xi = *self.inputs[0];
    auto& wi = *self.inputs[1];
    detail::convt2d_bwd<T>(d, xi.value->data.data(), wi.value->data.data(),
                           self.value->grad.data(), stride, pad, detail::grad_or_null(xi),
                           detail::grad_or_null(wi),
                           self.inputs.size() > 2 ? detail::grad_or_null(*self.inputs[2])
                                                  : nullptr);
  });
}

// Per-sample, per-channel standardization over spatial positions, then an
// affine map by the per-channel gamma/beta.
template <class T>
Value<T> instance_norm(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta, T eps) {
  const Tensor<T>& xt = *x->value;
  require(xt.ndim() == 4, "instance_norm: x must be 4-d");
  require(eps > T(0), "instance_norm: eps must be > 0");
  const int N = xt.shape[0], C = xt.shape[1];
  const std::size_t m = static_cast<std::size_t>(xt.shape[2]) * xt.shape[3];
  require(gamma->value->numel() == C && beta->value->numel() == C,
          "instance_norm: gamma/beta must have one value per channel");

  auto out = make_tensor<T>(xt.shape);
  auto xhat = std::make_shared<std::vector<T>>(xt.data.size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(N) * C);

  const T* g = gamma->value->data.data();
  const T* be = beta->value->data.data();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * m;
      const T* xp = xt.data.data() + base;
      T mu = T(0);
      for (std::size_t i = 0; i < m; ++i) mu += xp[i];
      mu /= static_cast<T>(m);
      T var = T(0);
      for (std::size_t i = 0; i < m; ++i) {
        const T dvi = xp[i] - mu;
        var += dvi * dvi;
      }
      var /= static_cast<T>(m);
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(n) * C + c] = is;
      T* xh = xhat->data() + base;
      T* yp = out->data.data() + base;
      for (std::size_t i = 0; i < m; ++i) {
        xh[i] = (xp[i] - mu) * is;
        yp[i] = g[c] * xh[i] + be[c];
      }
    }
  }

  return make_node<T>(out, {x, gamma, beta}, [N, C, m, xhat, inv_std](Node<T>& self) {
    auto& xi = *self.inputs[0];
    auto& gi = *self.inputs[1];
    auto& bi = *self.inputs[2];
    const T* gy = self.value->grad.data();
    const T* g = gi.value->data.data();
    T* dx = detail::grad_or_null(xi);
    T* dg = detail::grad_or_null(gi);
    T* db = detail::grad_or_null(bi);
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * m;
        const T* gyp = gy + base;
        const T* xh = xhat->data() + base;
        T sum_gy = T(0), sum_gy_xh = T(0);
        for (std::size_t i = 0; i < m; ++i) {
          sum_gy += gyp[i];
          sum_gy_xh += gyp[i] * xh[i];
        }
        if (db) db[c] += sum_gy;
        if (dg) dg[c] += sum_gy_xh;
        if (dx) {
          const T is = (*inv_std)[static_cast<std::size_t>(n) * C + c];
          const T inv_m = T(1) / static_cast<T>(m);
          T* dxp = dx + base;
          for (std::size_t i = 0; i < m; ++i)
            dxp[i] += g[c] * is * (gyp[i] - inv_m * sum_gy - xh[i] * inv_m * sum_gy_xh);
        }
      }
    }
  });
}

enum class Act { relu, leaky_relu, tanh, sigmoid };

// Elementwise nonlinearity; alpha applies to leaky_relu only.
template <class T>
Value<T> activation(const Value<T>& x, Act kind, T alpha = T(0)) {
  if (kind == Act::leaky_relu)
    require(alpha >= T(0) && alpha < T(1), "activation: leaky_relu alpha must be in [0,1)");
  const Tensor<T>& xt = *x->value;
  auto out = make_tensor<T>(xt.shape);
  T* y = out->data.data();
  const T* xp = xt.data.data();
  const std::size_t n = xt.data.size();
  switch (kind) {
    case Act::relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = xp[i] > T(0) ? xp[i] : T(0);
      break;
    case Act::leaky_relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = xp[i] > T(0) ? xp[i] : alpha * xp[i];
      break;
    case Act::tanh:
      // Keep the documented open range (-1,1) even where std::tanh rounds
      // to the boundary.
      for (std::size_t i = 0; i < n; ++i) {
        T v = std::tanh(xp[i]);
        if (v >= T(1)) v = std::nextafter(T(1), T(0));
        if (v <= T(-1)) v = std::nextafter(T(-1), T(0));
        y[i] = v;
      }
      break;
    case Act::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        T v = T(1) / (T(1) + std::exp(-xp[i]));
        if (v >= T(1)) v = std::nextafter(T(1), T(0));
        if (v <= T(0)) v = std::nextafter(T(0), T(1));
        y[i] = v;
      }
      break;
  }
  return make_node<T>(out, {x}, [kind, alpha, n](Node<T>& self) {
    auto& xi = *self.inputs[0];
    T* dx = detail::grad_or_null(xi);
    if (!dx) return;
    const T* gy = self.value->grad.data();
    const T* xp = xi.value->data.data();
    const T* y = self.value->data.data();
    switch (kind) {
      case Act::relu:
        for (std::size_t i = 0; i < n; ++i) dx[i] += xp[i] > T(0) ? gy[i] : T(0);
        break;
      case Act::leaky_relu:
        for (std::size_t i = 0; i < n; ++i) dx[i] += xp[i] > T(0) ? gy[i] : alpha * gy[i];
        break;
      case Act::tanh:
        for (std::size_t i = 0; i < n; ++i) dx[i] += gy[i] * (T(1) - y[i] * y[i]);
        break;
      case Act::sigmoid:
        for (std::size_t i = 0; i < n; ++i) dx[i] += gy[i] * y[i] * (T(1) - y[i]);
        break;
    }
  });
}

template <class T>
Value<T> relu(const Value<T>& x) {
  return activation(x, Act::relu);
}
template <class T>
Value<T> leaky_relu(const Value<T>& x, T alpha) {
  return activation(x, Act::leaky_relu, alpha);
}
template <class T>
Value<T> tanh_act(const Value<T>& x) {
  return activation(x, Act::tanh);
}
template <class T>
Value<T> sigmoid_act(const Value<T>& x) {
  return activation(x, Act::sigmoid);
}

// Concatenation along the channel axis of NCHW tensors.
template <class T>
Value<T> concat_channels(const Value<T>& a, const Value<T>& b) {
  const Tensor<T>& at = *a->value;
  const Tensor<T>& bt = *b->value;
  require(at.ndim() == 4 && bt.ndim() == 4, "concat_channels: inputs must be 4-d");
  require(at.shape[0] == bt.shape[0] && at.shape[2] == bt.shape[2] && at.shape[3] == bt.shape[3],
          "concat_channels: N/H/W must match");
  const int N = at.shape[0], Ca = at.shape[1], Cb = bt.shape[1];
  const std::size_t plane = static_cast<std::size_t>(at.shape[2]) * at.shape[3];
  auto out = make_tensor<T>(Shape{N, Ca + Cb, at.shape[2], at.shape[3]});
  for (int n = 0; n < N; ++n) {
    std::copy_n(at.data.data() + static_cast<std::size_t>(n) * Ca * plane, Ca * plane,
                out->data.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane);
    std::copy_n(bt.data.data() + static_cast<std::size_t>(n) * Cb * plane, Cb * plane,
                out->data.data() + (static_cast<std::size_t>(n) * (Ca + Cb) + Ca) * plane);
  }
  return make_node<T>(out, {a, b}, [N, Ca, Cb, plane](Node<T>& self) {
    const T* gy = self.value->grad.data();
    T* da = detail::grad_or_null(*self.inputs[0]);
    T* db = detail::grad_or_null(*self.inputs[1]);
    for (int n = 0; n < N; ++n) {
      const T* gp = gy + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
      if (da) {
        T* dap = da + static_cast<std::size_t>(n) * Ca * plane;
        for (std::size_t i = 0; i < Ca * plane; ++i) dap[i] += gp[i];
      }
      if (db) {
        T* dbp = db + static_cast<std::size_t>(n) * Cb * plane;
        const T* gb = gp + Ca * plane;
        for (std::size_t i = 0; i < Cb * plane; ++i) dbp[i] += gb[i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

template <class T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  require(same_shape(*a->value, *b->value), "add: shape mismatch");
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i)
    out->data[i] = a->value->data[i] + b->value->data[i];
  return make_node<T>(out, {a, b}, [](Node<T>& self) {
    const T* gy = self.value->grad.data();
    const std::size_t n = self.value->data.size();
    for (int k = 0; k < 2; ++k)
      if (T* d = detail::grad_or_null(*self.inputs[k]))
        for (std::size_t i = 0; i < n; ++i) d[i] += gy[i];
  });
}

template <class T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
  require(same_shape(*a->value, *b->value), "sub: shape mismatch");
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i)
    out->data[i] = a->value->data[i] - b->value->data[i];
  return make_node<T>(out, {a, b}, [](Node<T>& self) {
    const T* gy = self.value->grad.data();
    const std::size_t n = self.value->data.size();
    if (T* da = detail::grad_or_null(*self.inputs[0]))
      for (std::size_t i = 0; i < n; ++i) da[i] += gy[i];
    if (T* db = detail::grad_or_null(*self.inputs[1]))
      for (std::size_t i = 0; i < n; ++i) db[i] -= gy[i];
  });
}

template <class T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
  require(same_shape(*a->value, *b->value), "mul: shape mismatch");
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i)
    out->data[i] = a->value->data[i] * b->value->data[i];
  return make_node<T>(out, {a, b}, [](Node<T>& self) {
    const T* gy = self.value->grad.data();
    const T* av = self.inputs[0]->value->data.data();
    const T* bv = self.inputs[1]->value->data.data();
    const std::size_t n = self.value->data.size();
    if (T* da = detail::grad_or_null(*self.inputs[0]))
      for (std::size_t i = 0; i < n; ++i) da[i] += gy[i] * bv[i];
    if (T* db = detail::grad_or_null(*self.inputs[1]))
      for (std::size_t i = 0; i < n; ++i) db[i] += gy[i] * av[i];
  });
}

template <class T>
Value<T> scale(const Value<T>& a, T c) {
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * a->value->data[i];
  return make_node<T>(out, {a}, [c](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T* gy = self.value->grad.data();
      for (std::size_t i = 0; i < self.value->data.size(); ++i) da[i] += c * gy[i];
    }
  });
}

// c - a, elementwise (used for 1 - D(...)).
template <class T>
Value<T> rsub_const(T c, const Value<T>& a) {
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = c - a->value->data[i];
  return make_node<T>(out, {a}, [](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T* gy = self.value->grad.data();
      for (std::size_t i = 0; i < self.value->data.size(); ++i) da[i] -= gy[i];
    }
  });
}

template <class T>
Value<T> absolute(const Value<T>& a) {
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::abs(a->value->data[i]);
  return make_node<T>(out, {a}, [](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T* gy = self.value->grad.data();
      const T* av = self.inputs[0]->value->data.data();
      for (std::size_t i = 0; i < self.value->data.size(); ++i) {
        if (av[i] > T(0))
          da[i] += gy[i];
        else if (av[i] < T(0))
          da[i] -= gy[i];
      }
    }
  });
}

// Clamp into [lo, hi]; gradient passes where the input is within bounds.
template <class T>
Value<T> clamp(const Value<T>& a, T lo, T hi) {
  require(lo <= hi, "clamp: lo must be <= hi");
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i)
    out->data[i] = std::min(hi, std::max(lo, a->value->data[i]));
  return make_node<T>(out, {a}, [lo, hi](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T* gy = self.value->grad.data();
      const T* av = self.inputs[0]->value->data.data();
      for (std::size_t i = 0; i < self.value->data.size(); ++i)
        if (av[i] >= lo && av[i] <= hi) da[i] += gy[i];
    }
  });
}

// Natural log; inputs must be positive (losses clamp beforehand).
template <class T>
Value<T> log_nat(const Value<T>& a) {
  auto out = make_tensor<T>(a->value->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    require(a->value->data[i] > T(0), "log_nat: input must be positive");
    out->data[i] = std::log(a->value->data[i]);
  }
  return make_node<T>(out, {a}, [](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T* gy = self.value->grad.data();
      const T* av = self.inputs[0]->value->data.data();
      for (std::size_t i = 0; i < self.value->data.size(); ++i) da[i] += gy[i] / av[i];
    }
  });
}

template <class T>
Value<T> sum_all(const Value<T>& a) {
  T acc = T(0);
  for (T v : a->value->data) acc += v;
  auto out = make_tensor<T>(Shape{1}, std::vector<T>{acc});
  return make_node<T>(out, {a}, [](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T g = self.value->grad[0];
      for (std::size_t i = 0; i < self.inputs[0]->value->data.size(); ++i) da[i] += g;
    }
  });
}

template <class T>
Value<T> mean_all(const Value<T>& a) {
  const T inv_n = T(1) / static_cast<T>(a->value->numel());
  T acc = T(0);
  for (T v : a->value->data) acc += v;
  auto out = make_tensor<T>(Shape{1}, std::vector<T>{acc * inv_n});
  return make_node<T>(out, {a}, [inv_n](Node<T>& self) {
    if (T* da = detail::grad_or_null(*self.inputs[0])) {
      const T g = self.value->grad[0] * inv_n;
      for (std::size_t i = 0; i < self.inputs[0]->value->data.size(); ++i) da[i] += g;
    }
  });
}

}  // namespace v2ir
