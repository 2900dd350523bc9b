// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor-level reverse-mode autodiff. A Tape records coarse ops (conv,
// norm, attention, ...) as they execute; backward() replays them in reverse,
// accumulating gradients for any tracked leaf: network parameters or the
// input image itself. Templated on the scalar so the denoiser can run in
// float while gradient-check tests instantiate double.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ptychodiff/errors.hpp"

namespace ptycho::ad {

template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, T(0)) {}

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }
  T* chan(int ci) { return v.data() + size_t(ci) * plane(); }
  const T* chan(int ci) const { return v.data() + size_t(ci) * plane(); }
  T& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
  const T& at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  std::string shape_str() const {
    return "[" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
  }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Row-softmax attention weights A (n x n, n = h*w tokens) from q, k.
/// Exposed for invariant tests; attention() reuses it.
template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k) {
  const int n = q.plane(), d = q.c;
  const T scale = T(1) / std::sqrt(T(d));
  std::vector<T> A(size_t(n) * n);
  for (int i = 0; i < n; ++i) {
    T* row = A.data() + size_t(i) * n;
    T best = -std::numeric_limits<T>::max();
    for (int j = 0; j < n; ++j) {
      T s = T(0);
      for (int c = 0; c < d; ++c) s += q.v[size_t(c) * n + i] * k.v[size_t(c) * n + j];
      row[j] = s * scale;
      best = std::max(best, row[j]);
    }
    T denom = T(0);
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - best);
      denom += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= denom;
  }
  return A;
}

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is wanted (the image input).
  Var input(Tensor<T> value) { return push_leaf(std::move(value), true, nullptr); }

  /// Leaf with no gradient (targets, time embeddings).
  Var constant(Tensor<T> value) { return push_leaf(std::move(value), false, nullptr); }

  /// Parameter leaf; backward accumulates into *grad_sink.
  Var param(const Tensor<T>& value, Tensor<T>* grad_sink) {
    return push_leaf(value, true, grad_sink);
  }

  const Tensor<T>& val(Var v) const { return vals_[size_t(v.id)]; }
  const Tensor<T>& grad(Var v) const { return grads_[size_t(v.id)]; }
  size_t num_nodes() const { return vals_.size(); }

  Var conv3x3(Var x, Var w, Var b);
  Var conv1x1(Var x, Var w, Var b);
  Var linear(Var x, Var w, Var b);
  Var silu(Var x);
  Var channel_norm(Var x, Var gain, Var bias);
  Var scale_shift(Var x, Var s, Var b);
  Var avg_pool2(Var x);
  Var upsample_nearest2(Var x);
  Var add(Var a, Var b);
  Var lincomb(T alpha, Var a, T beta, Var b);
  Var concat(Var a, Var b);
  Var slice_c(Var x, int from, int count);
  Var attention(Var q, Var k, Var v);
  Var mse_loss(Var pred, Tensor<T> target);

  /// Reverse pass from `out` with gradient `seed` (same shape). Parameter
  /// gradients are accumulated into their sinks; other grads stay readable
  /// through grad() until the next backward().
  void backward(Var out, const Tensor<T>& seed);

 private:
  Var push_leaf(Tensor<T> value, bool tracked, Tensor<T>* sink) {
    vals_.push_back(std::move(value));
    tracked_.push_back(tracked);
    sinks_.push_back(sink);
    backs_.emplace_back();
    return Var{int(vals_.size()) - 1};
  }

  Var push_op(Tensor<T> value, bool tracked, std::function<void(Tape&)> back) {
    vals_.push_back(std::move(value));
    tracked_.push_back(tracked);
    sinks_.push_back(nullptr);
    backs_.push_back(tracked ? std::move(back) : std::function<void(Tape&)>());
    return Var{int(vals_.size()) - 1};
  }

  int next_id() const { return int(vals_.size()); }
  bool tracked(Var v) const { return tracked_[size_t(v.id)]; }
  Tensor<T>& g(Var v) { return grads_[size_t(v.id)]; }

  std::vector<Tensor<T>> vals_;
  std::vector<Tensor<T>> grads_;
  std::vector<bool> tracked_;
  std::vector<Tensor<T>*> sinks_;
  std::vector<std::function<void(Tape&)>> backs_;
};

// ---------------------------------------------------------------------------

namespace detail {

// dst(chan o of an HxW tensor) += 3x3 conv of src with kernel wk9;
// flip replays the kernel transposed for the input-gradient pass.
template <typename T>
void conv3x3_accum(const T* src, const T* wk9, T* dst, int H, int W, bool flip) {
  for (int ky = -1; ky <= 1; ++ky) {
    for (int kx = -1; kx <= 1; ++kx) {
      T wv = flip ? wk9[(1 - ky) * 3 + (1 - kx)] : wk9[(ky + 1) * 3 + (kx + 1)];
      if (wv == T(0)) continue;
      int y0 = ky < 0 ? 1 : 0, y1 = ky > 0 ? H - 1 : H;
      for (int yy = y0; yy < y1; ++yy) {
        const T* srow = src + size_t(yy + ky) * W;
        T* drow = dst + size_t(yy) * W;
        int x0 = kx < 0 ? 1 : 0, x1 = kx > 0 ? W - 1 : W;
        for (int xx = x0; xx < x1; ++xx) drow[xx] += wv * srow[xx + kx];
      }
    }
  }
}

// dw[ky,kx] += sum over valid pixels of gy(y,x) * x(y+ky-1, x+kx-1)
template <typename T>
void conv3x3_wgrad(const T* x, const T* gy, T* dw9, int H, int W) {
  for (int ky = -1; ky <= 1; ++ky) {
    for (int kx = -1; kx <= 1; ++kx) {
      T acc = T(0);
      int y0 = ky < 0 ? 1 : 0, y1 = ky > 0 ? H - 1 : H;
      for (int yy = y0; yy < y1; ++yy) {
        const T* xrow = x + size_t(yy + ky) * W;
        const T* grow = gy + size_t(yy) * W;
        int x0 = kx < 0 ? 1 : 0, x1 = kx > 0 ? W - 1 : W;
        for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * xrow[xx + kx];
      }
      dw9[(ky + 1) * 3 + (kx + 1)] += acc;
    }
  }
}

}  // namespace detail

template <typename T>
Var Tape<T>::conv3x3(Var xv, Var wv, Var bv) {
  const Tensor<T>& x = val(xv);
  const Tensor<T>& w = val(wv);
  const Tensor<T>& b = val(bv);
  if (w.h != x.c || w.w != 9 || b.c != w.c || b.h != 1 || b.w != 1)
    throw DimensionError("conv3x3 shape mismatch: x " + x.shape_str() + " w " + w.shape_str());
  const int H = x.h, W = x.w, cin = x.c, cout = w.c;

  Tensor<T> y(cout, H, W);
  for (int o = 0; o < cout; ++o) {
    T* dst = y.chan(o);
    T bias = b.v[size_t(o)];
    for (int i = 0; i < H * W; ++i) dst[i] = bias;
    for (int ci = 0; ci < cin; ++ci)
      detail::conv3x3_accum(x.chan(ci), w.v.data() + (size_t(o) * cin + ci) * 9, dst, H, W,
                            false);
  }

  const int out = next_id();
  bool tr = tracked(xv) || tracked(wv) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    const Tensor<T>& ww = t.val(wv);
    if (t.tracked(xv)) {
      Tensor<T>& gx = t.g(xv);
      for (int ci = 0; ci < cin; ++ci)
        for (int o = 0; o < cout; ++o)
          detail::conv3x3_accum(gy.chan(o), ww.v.data() + (size_t(o) * cin + ci) * 9,
                                gx.chan(ci), H, W, true);
    }
    if (t.tracked(wv)) {
      Tensor<T>& gw = t.g(wv);
      for (int o = 0; o < cout; ++o)
        for (int ci = 0; ci < cin; ++ci)
          detail::conv3x3_wgrad(xx.chan(ci), gy.chan(o),
                                gw.v.data() + (size_t(o) * cin + ci) * 9, H, W);
    }
    if (t.tracked(bv)) {
      Tensor<T>& gb = t.g(bv);
      for (int o = 0; o < cout; ++o) {
        T acc = T(0);
        const T* grow = gy.chan(o);
        for (int i = 0; i < H * W; ++i) acc += grow[i];
        gb.v[size_t(o)] += acc;
      }
    }
  });
}

template <typename T>
Var Tape<T>::conv1x1(Var xv, Var wv, Var bv) {
  const Tensor<T>& x = val(xv);
  const Tensor<T>& w = val(wv);  // [cout, cin, 1]
  const Tensor<T>& b = val(bv);
  if (w.h != x.c || w.w != 1 || b.c != w.c)
    throw DimensionError("conv1x1 shape mismatch: x " + x.shape_str() + " w " + w.shape_str());
  const int n = x.plane(), cin = x.c, cout = w.c;

  Tensor<T> y(cout, x.h, x.w);
  for (int o = 0; o < cout; ++o) {
    T* dst = y.chan(o);
    T bias = b.v[size_t(o)];
    for (int i = 0; i < n; ++i) dst[i] = bias;
    for (int ci = 0; ci < cin; ++ci) {
      T wv_ = w.v[size_t(o) * cin + ci];
      const T* src = x.chan(ci);
      for (int i = 0; i < n; ++i) dst[i] += wv_ * src[i];
    }
  }

  const int out = next_id();
  bool tr = tracked(xv) || tracked(wv) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    const Tensor<T>& ww = t.val(wv);
    if (t.tracked(xv)) {
      Tensor<T>& gx = t.g(xv);
      for (int ci = 0; ci < cin; ++ci) {
        T* dst = gx.chan(ci);
        for (int o = 0; o < cout; ++o) {
          T wv_ = ww.v[size_t(o) * cin + ci];
          const T* src = gy.chan(o);
          for (int i = 0; i < n; ++i) dst[i] += wv_ * src[i];
        }
      }
    }
    if (t.tracked(wv)) {
      Tensor<T>& gw = t.g(wv);
      for (int o = 0; o < cout; ++o)
        for (int ci = 0; ci < cin; ++ci) {
          T acc = T(0);
          const T* gr = gy.chan(o);
          const T* xr = xx.chan(ci);
          for (int i = 0; i < n; ++i) acc += gr[i] * xr[i];
          gw.v[size_t(o) * cin + ci] += acc;
        }
    }
    if (t.tracked(bv)) {
      Tensor<T>& gb = t.g(bv);
      for (int o = 0; o < cout; ++o) {
        T acc = T(0);
        const T* gr = gy.chan(o);
        for (int i = 0; i < n; ++i) acc += gr[i];
        gb.v[size_t(o)] += acc;
      }
    }
  });
}

template <typename T>
Var Tape<T>::linear(Var xv, Var wv, Var bv) {
  const Tensor<T>& x = val(xv);  // [din, 1, 1]
  const Tensor<T>& w = val(wv);  // [dout, din, 1]
  const Tensor<T>& b = val(bv);
  if (x.h != 1 || x.w != 1 || w.h != x.c || b.c != w.c)
    throw DimensionError("linear shape mismatch: x " + x.shape_str() + " w " + w.shape_str());
  const int din = x.c, dout = w.c;

  Tensor<T> y(dout, 1, 1);
  for (int o = 0; o < dout; ++o) {
    T acc = b.v[size_t(o)];
    const T* row = w.v.data() + size_t(o) * din;
    for (int i = 0; i < din; ++i) acc += row[i] * x.v[size_t(i)];
    y.v[size_t(o)] = acc;
  }

  const int out = next_id();
  bool tr = tracked(xv) || tracked(wv) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    const Tensor<T>& ww = t.val(wv);
    if (t.tracked(xv)) {
      Tensor<T>& gx = t.g(xv);
      for (int i = 0; i < din; ++i) {
        T acc = T(0);
        for (int o = 0; o < dout; ++o) acc += ww.v[size_t(o) * din + i] * gy.v[size_t(o)];
        gx.v[size_t(i)] += acc;
      }
    }
    if (t.tracked(wv)) {
      Tensor<T>& gw = t.g(wv);
      for (int o = 0; o < dout; ++o)
        for (int i = 0; i < din; ++i)
          gw.v[size_t(o) * din + i] += gy.v[size_t(o)] * xx.v[size_t(i)];
    }
    if (t.tracked(bv)) {
      Tensor<T>& gb = t.g(bv);
      for (int o = 0; o < dout; ++o) gb.v[size_t(o)] += gy.v[size_t(o)];
    }
  });
}

template <typename T>
Var Tape<T>::silu(Var xv) {
  const Tensor<T>& x = val(xv);
  Tensor<T> y(x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) {
    T s = T(1) / (T(1) + std::exp(-x.v[i]));
    y.v[i] = x.v[i] * s;
  }
  const int out = next_id();
  return push_op(std::move(y), tracked(xv), [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    Tensor<T>& gx = t.g(xv);
    for (size_t i = 0; i < xx.size(); ++i) {
      T s = T(1) / (T(1) + std::exp(-xx.v[i]));
      gx.v[i] += gy.v[i] * s * (T(1) + xx.v[i] * (T(1) - s));
    }
  });
}

template <typename T>
Var Tape<T>::channel_norm(Var xv, Var gv, Var bv) {
  const Tensor<T>& x = val(xv);
  const Tensor<T>& gain = val(gv);
  const Tensor<T>& bias = val(bv);
  if (gain.c != x.c || bias.c != x.c)
    throw DimensionError("channel_norm gain/bias mismatch for x " + x.shape_str());
  const int n = x.plane(), C = x.c;
  const T eps = T(1e-5);

  Tensor<T> y(x.c, x.h, x.w);
  std::vector<T> mean(C), istd(C);
  for (int c = 0; c < C; ++c) {
    const T* src = x.chan(c);
    T m = T(0);
    for (int i = 0; i < n; ++i) m += src[i];
    m /= T(n);
    T var = T(0);
    for (int i = 0; i < n; ++i) var += (src[i] - m) * (src[i] - m);
    var /= T(n);
    mean[size_t(c)] = m;
    istd[size_t(c)] = T(1) / std::sqrt(var + eps);
    T* dst = y.chan(c);
    T gc = gain.v[size_t(c)], bc = bias.v[size_t(c)];
    for (int i = 0; i < n; ++i) dst[i] = gc * (src[i] - m) * istd[size_t(c)] + bc;
  }

  const int out = next_id();
  bool tr = tracked(xv) || tracked(gv) || tracked(bv);
  return push_op(std::move(y), tr, [=, mean = std::move(mean), istd = std::move(istd)](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    const Tensor<T>& gg = t.val(gv);
    for (int c = 0; c < C; ++c) {
      const T* src = xx.chan(c);
      const T* gyr = gy.chan(c);
      T m = mean[size_t(c)], is = istd[size_t(c)];
      T gc = gg.v[size_t(c)];
      T sum_gh = T(0), sum_ghx = T(0), sum_gy = T(0);
      for (int i = 0; i < n; ++i) {
        T xhat = (src[i] - m) * is;
        T gh = gyr[i] * gc;  // grad w.r.t. xhat
        sum_gh += gh;
        sum_ghx += gh * xhat;
        sum_gy += gyr[i];
      }
      if (t.tracked(xv)) {
        T* gx = t.g(xv).chan(c);
        T inv_n = T(1) / T(n);
        for (int i = 0; i < n; ++i) {
          T xhat = (src[i] - m) * is;
          T gh = gyr[i] * gc;
          gx[i] += is * (gh - inv_n * sum_gh - xhat * inv_n * sum_ghx);
        }
      }
      if (t.tracked(gv)) {
        T acc = T(0);
        for (int i = 0; i < n; ++i) acc += gyr[i] * (src[i] - m) * is;
        t.g(gv).v[size_t(c)] += acc;
      }
      if (t.tracked(bv)) t.g(bv).v[size_t(c)] += sum_gy;
    }
  });
}

template <typename T>
Var Tape<T>::scale_shift(Var xv, Var sv, Var bv) {
  const Tensor<T>& x = val(xv);
  const Tensor<T>& s = val(sv);  // [C,1,1]
  const Tensor<T>& b = val(bv);
  if (s.c != x.c || b.c != x.c)
    throw DimensionError("scale_shift per-channel shapes must match x " + x.shape_str());
  const int n = x.plane(), C = x.c;

  Tensor<T> y(x.c, x.h, x.w);
  for (int c = 0; c < C; ++c) {
    const T* src = x.chan(c);
    T* dst = y.chan(c);
    T sc = T(1) + s.v[size_t(c)], bc = b.v[size_t(c)];
    for (int i = 0; i < n; ++i) dst[i] = sc * src[i] + bc;
  }

  const int out = next_id();
  bool tr = tracked(xv) || tracked(sv) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& xx = t.val(xv);
    const Tensor<T>& ss = t.val(sv);
    for (int c = 0; c < C; ++c) {
      const T* gyr = gy.chan(c);
      if (t.tracked(xv)) {
        T* gx = t.g(xv).chan(c);
        T sc = T(1) + ss.v[size_t(c)];
        for (int i = 0; i < n; ++i) gx[i] += sc * gyr[i];
      }
      if (t.tracked(sv)) {
        const T* xr = xx.chan(c);
        T acc = T(0);
        for (int i = 0; i < n; ++i) acc += gyr[i] * xr[i];
        t.g(sv).v[size_t(c)] += acc;
      }
      if (t.tracked(bv)) {
        T acc = T(0);
        for (int i = 0; i < n; ++i) acc += gyr[i];
        t.g(bv).v[size_t(c)] += acc;
      }
    }
  });
}

template <typename T>
Var Tape<T>::avg_pool2(Var xv) {
  const Tensor<T>& x = val(xv);
  if (x.h % 2 || x.w % 2) throw DimensionError("avg_pool2 needs even dims, got " + x.shape_str());
  const int C = x.c, H2 = x.h / 2, W2 = x.w / 2, W = x.w;

  Tensor<T> y(C, H2, W2);
  for (int c = 0; c < C; ++c) {
    const T* src = x.chan(c);
    T* dst = y.chan(c);
    for (int yy = 0; yy < H2; ++yy)
      for (int xx = 0; xx < W2; ++xx)
        dst[yy * W2 + xx] = T(0.25) * (src[(2 * yy) * W + 2 * xx] + src[(2 * yy) * W + 2 * xx + 1] +
                                       src[(2 * yy + 1) * W + 2 * xx] +
                                       src[(2 * yy + 1) * W + 2 * xx + 1]);
  }

  const int out = next_id();
  return push_op(std::move(y), tracked(xv), [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    Tensor<T>& gx = t.g(xv);
    for (int c = 0; c < C; ++c) {
      const T* gr = gy.chan(c);
      T* gd = gx.chan(c);
      for (int yy = 0; yy < H2; ++yy)
        for (int xx = 0; xx < W2; ++xx) {
          T v = T(0.25) * gr[yy * W2 + xx];
          gd[(2 * yy) * W + 2 * xx] += v;
          gd[(2 * yy) * W + 2 * xx + 1] += v;
          gd[(2 * yy + 1) * W + 2 * xx] += v;
          gd[(2 * yy + 1) * W + 2 * xx + 1] += v;
        }
    }
  });
}

template <typename T>
Var Tape<T>::upsample_nearest2(Var xv) {
  const Tensor<T>& x = val(xv);
  const int C = x.c, H = x.h, W = x.w;

  Tensor<T> y(C, 2 * H, 2 * W);
  for (int c = 0; c < C; ++c) {
    const T* src = x.chan(c);
    T* dst = y.chan(c);
    for (int yy = 0; yy < H; ++yy)
      for (int xx = 0; xx < W; ++xx) {
        T v = src[yy * W + xx];
        dst[(2 * yy) * 2 * W + 2 * xx] = v;
        dst[(2 * yy) * 2 * W + 2 * xx + 1] = v;
        dst[(2 * yy + 1) * 2 * W + 2 * xx] = v;
        dst[(2 * yy + 1) * 2 * W + 2 * xx + 1] = v;
      }
  }

  const int out = next_id();
  return push_op(std::move(y), tracked(xv), [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    Tensor<T>& gx = t.g(xv);
    for (int c = 0; c < C; ++c) {
      const T* gr = gy.chan(c);
      T* gd = gx.chan(c);
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx)
          gd[yy * W + xx] += gr[(2 * yy) * 2 * W + 2 * xx] + gr[(2 * yy) * 2 * W + 2 * xx + 1] +
                             gr[(2 * yy + 1) * 2 * W + 2 * xx] +
                             gr[(2 * yy + 1) * 2 * W + 2 * xx + 1];
    }
  });
}

template <typename T>
Var Tape<T>::add(Var av, Var bv) {
  return lincomb(T(1), av, T(1), bv);
}

template <typename T>
Var Tape<T>::lincomb(T alpha, Var av, T beta, Var bv) {
  const Tensor<T>& a = val(av);
  const Tensor<T>& b = val(bv);
  if (!a.same_shape(b))
    throw DimensionError("lincomb shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> y(a.c, a.h, a.w);
  for (size_t i = 0; i < a.size(); ++i) y.v[i] = alpha * a.v[i] + beta * b.v[i];

  const int out = next_id();
  bool tr = tracked(av) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    if (t.tracked(av)) {
      Tensor<T>& ga = t.g(av);
      for (size_t i = 0; i < gy.size(); ++i) ga.v[i] += alpha * gy.v[i];
    }
    if (t.tracked(bv)) {
      Tensor<T>& gb = t.g(bv);
      for (size_t i = 0; i < gy.size(); ++i) gb.v[i] += beta * gy.v[i];
    }
  });
}

template <typename T>
Var Tape<T>::concat(Var av, Var bv) {
  const Tensor<T>& a = val(av);
  const Tensor<T>& b = val(bv);
  if (a.h != b.h || a.w != b.w)
    throw DimensionError("concat spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());

  const int out = next_id();
  const size_t na = a.size();
  bool tr = tracked(av) || tracked(bv);
  return push_op(std::move(y), tr, [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    if (t.tracked(av)) {
      Tensor<T>& ga = t.g(av);
      for (size_t i = 0; i < na; ++i) ga.v[i] += gy.v[i];
    }
    if (t.tracked(bv)) {
      Tensor<T>& gb = t.g(bv);
      for (size_t i = 0; i < gb.size(); ++i) gb.v[i] += gy.v[na + i];
    }
  });
}

template <typename T>
Var Tape<T>::slice_c(Var xv, int from, int count) {
  const Tensor<T>& x = val(xv);
  if (from < 0 || from + count > x.c) throw IndexError("slice_c outside channel range");
  Tensor<T> y(count, x.h, x.w);
  const size_t plane = size_t(x.plane());
  std::copy_n(x.v.begin() + size_t(from) * plane, size_t(count) * plane, y.v.begin());

  const int out = next_id();
  return push_op(std::move(y), tracked(xv), [=](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    Tensor<T>& gx = t.g(xv);
    for (size_t i = 0; i < gy.size(); ++i) gx.v[size_t(from) * plane + i] += gy.v[i];
  });
}

template <typename T>
Var Tape<T>::attention(Var qv, Var kv, Var vv) {
  const Tensor<T>& q = val(qv);
  const Tensor<T>& k = val(kv);
  const Tensor<T>& v = val(vv);
  if (!q.same_shape(k) || !q.same_shape(v))
    throw DimensionError("attention expects matching q/k/v shapes");
  const int n = q.plane(), d = q.c;

  std::vector<T> A = attention_weights(q, k);
  Tensor<T> y(q.c, q.h, q.w);
  for (int c = 0; c < d; ++c) {
    const T* vr = v.chan(c);
    T* dst = y.chan(c);
    for (int i = 0; i < n; ++i) {
      const T* row = A.data() + size_t(i) * n;
      T acc = T(0);
      for (int j = 0; j < n; ++j) acc += row[j] * vr[j];
      dst[i] = acc;
    }
  }

  const int out = next_id();
  bool tr = tracked(qv) || tracked(kv) || tracked(vv);
  return push_op(std::move(y), tr, [=, A = std::move(A)](Tape& t) {
    const Tensor<T>& gy = t.grads_[size_t(out)];
    const Tensor<T>& qq = t.val(qv);
    const Tensor<T>& kk = t.val(kv);
    const Tensor<T>& vvv = t.val(vv);
    const T scale = T(1) / std::sqrt(T(d));

    if (t.tracked(vv)) {
      Tensor<T>& gV = t.g(vv);
      for (int c = 0; c < d; ++c) {
        const T* gr = gy.chan(c);
        T* gvr = gV.chan(c);
        for (int j = 0; j < n; ++j) {
          T acc = T(0);
          for (int i = 0; i < n; ++i) acc += gr[i] * A[size_t(i) * n + j];
          gvr[j] += acc;
        }
      }
    }
    if (t.tracked(qv) || t.tracked(kv)) {
      // dS = A .* (dA - rowsum(A .* dA)), dA[i][j] = sum_c gy[c,i] v[c,j]
      std::vector<T> dS(size_t(n) * n);
      for (int i = 0; i < n; ++i) {
        T* dsrow = dS.data() + size_t(i) * n;
        const T* arow = A.data() + size_t(i) * n;
        T dot = T(0);
        for (int j = 0; j < n; ++j) {
          T da = T(0);
          for (int c = 0; c < d; ++c)
            da += gy.v[size_t(c) * n + i] * vvv.v[size_t(c) * n + j];
          dsrow[j] = da;
          dot += arow[j] * da;
        }
        for (int j = 0; j < n; ++j) dsrow[j] = arow[j] * (dsrow[j] - dot);
      }
      if (t.tracked(qv)) {
        Tensor<T>& gQ = t.g(qv);
        for (int c = 0; c < d; ++c) {
          const T* kr = kk.chan(c);
          T* gq = gQ.chan(c);
          for (int i = 0; i < n; ++i) {
            const T* dsrow = dS.data() + size_t(i) * n;
            T acc = T(0);
            for (int j = 0; j < n; ++j) acc += dsrow[j] * kr[j];
            gq[i] += scale * acc;
          }
        }
      }
      if (t.tracked(kv)) {
        Tensor<T>& gK = t.g(kv);
        for (int c = 0; c < d; ++c) {
          const T* qr = qq.chan(c);
          T* gk = gK.chan(c);
          for (int j = 0; j < n; ++j) {
            T acc = T(0);
            for (int i = 0; i < n; ++i) acc += dS[size_t(i) * n + j] * qr[i];
            gk[j] += scale * acc;
          }
        }
      }
    }
  });
}

template <typename T>
Var Tape<T>::mse_loss(Var pv, Tensor<T> target) {
  const Tensor<T>& p = val(pv);
  if (!p.same_shape(target))
    throw DimensionError("mse_loss shape mismatch " + p.shape_str() + " vs " +
                         target.shape_str());
  const T inv_n = T(1) / T(p.size());
  T acc = T(0);
  for (size_t i = 0; i < p.size(); ++i) {
    T dlt = p.v[i] - target.v[i];
    acc += dlt * dlt;
  }
  Tensor<T> y(1, 1, 1);
  y.v[0] = acc * inv_n;  // mean per element

  const int out = next_id();
  return push_op(std::move(y), tracked(pv), [=, target = std::move(target)](Tape& t) {
    const T seed = t.grads_[size_t(out)].v[0];
    const Tensor<T>& pp = t.val(pv);
    Tensor<T>& gp = t.g(pv);
    const T c = T(2) * inv_n * seed;
    for (size_t i = 0; i < pp.size(); ++i) gp.v[i] += c * (pp.v[i] - target.v[i]);
  });
}

template <typename T>
void Tape<T>::backward(Var out, const Tensor<T>& seed) {
  if (!out.valid() || size_t(out.id) >= vals_.size())
    throw IndexError("backward on a variable not on this tape");
  if (!vals_[size_t(out.id)].same_shape(seed))
    throw DimensionError("backward seed shape mismatch");
  grads_.assign(vals_.size(), Tensor<T>());
  for (size_t i = 0; i < vals_.size(); ++i)
    if (tracked_[i]) grads_[i] = Tensor<T>(vals_[i].c, vals_[i].h, vals_[i].w);
  if (!tracked_[size_t(out.id)])
    throw NumericError("backward from an untracked variable");
  grads_[size_t(out.id)] = seed;
  for (int id = out.id; id >= 0; --id)
    if (backs_[size_t(id)]) backs_[size_t(id)](*this);
  for (size_t i = 0; i < vals_.size(); ++i)
    if (sinks_[i]) {
      if (!sinks_[i]->same_shape(grads_[i])) *sinks_[i] = Tensor<T>(vals_[i].c, vals_[i].h, vals_[i].w);
      for (size_t j = 0; j < grads_[i].size(); ++j) sinks_[i]->v[j] += grads_[i].v[j];
    }
}

}  // namespace ptycho::ad
