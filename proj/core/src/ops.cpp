// Copyright 2026 The rala Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rala/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rala {

Lengths full_lengths(std::int64_t batch, std::int64_t time) {
  return Lengths(static_cast<std::size_t>(batch), time);
}

Lengths resolve_lengths(const Lengths& lengths, const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("expected [batch, time, ...], got " + shape_str(shape));
  if (lengths.empty()) return full_lengths(shape[0], shape[1]);
  if (static_cast<std::int64_t>(lengths.size()) != shape[0]) {
    throw ShapeError("lengths has " + std::to_string(lengths.size()) + " entries for batch " +
                     std::to_string(shape[0]));
  }
  for (auto l : lengths) {
    if (l < 1 || l > shape[1]) {
      throw ShapeError("sequence length " + std::to_string(l) + " outside [1, " +
                       std::to_string(shape[1]) + "]");
    }
  }
  return lengths;
}

namespace {

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

int norm_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("axis out of range");
  return axis;
}

// Splits a shape into (outer, axis extent, inner) around `axis`.
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
  r.extent = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& x, F f, D dfdx_from_x_y) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  const T* xp = xv.ptr();
  T* op = out.ptr();
  const std::int64_t n = xv.numel();
  for (std::int64_t i = 0; i < n; ++i) op[i] = f(xp[i]);
  return make_result<T>(std::move(out), {x}, [x, dfdx_from_x_y](Node<T>& self) {
    const auto& g = self.grad;
    Tensor<T> gx(g.shape());
    const T* xp = x.value().ptr();
    const T* yp = self.value.ptr();
    const T* gp = g.ptr();
    T* dp = gx.ptr();
    const std::int64_t n = g.numel();
    for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * dfdx_from_x_y(xp[i], yp[i]);
    x.node()->accumulate(gx);
  });
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
T softplus_scalar(T v) {
  // log(1 + e^v) = max(v, 0) + log1p(e^-|v|)
  return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
}

}  // namespace

// ---------------------------------------------------------------------------
// gemm kernels

namespace {

// Register-blocked R x W tile of C = A * B over the full k extent. A element
// (r, p) lives at a[r * a_row + p * a_col]. Sums run in increasing p, the
// same order as a plain triple loop.
template <typename T, int R, int W>
inline void gemm_tile(std::int64_t k, const T* a, std::int64_t a_row, std::int64_t a_col, const T* b,
                      std::int64_t ldb, T* c, std::int64_t ldc, std::int64_t w, bool accumulate) {
  T acc[R][W];
  for (int r = 0; r < R; ++r) {
    for (int x = 0; x < W; ++x) acc[r][x] = (accumulate && x < w) ? c[r * ldc + x] : T(0);
  }
  if (w == W) {
    for (std::int64_t p = 0; p < k; ++p) {
      const T* brow = b + p * ldb;
      for (int r = 0; r < R; ++r) {
        const T av = a[r * a_row + p * a_col];
        for (int x = 0; x < W; ++x) acc[r][x] += av * brow[x];
      }
    }
  } else {
    for (std::int64_t p = 0; p < k; ++p) {
      const T* brow = b + p * ldb;
      for (int r = 0; r < R; ++r) {
        const T av = a[r * a_row + p * a_col];
        for (std::int64_t x = 0; x < w; ++x) acc[r][x] += av * brow[x];
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    for (std::int64_t x = 0; x < w; ++x) c[r * ldc + x] = acc[r][x];
  }
}

template <typename T>
void gemm_strided(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, std::int64_t a_row,
                  std::int64_t a_col, const T* b, T* c, bool accumulate) {
  constexpr int kW = 32;
  std::int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::int64_t j = 0; j < n; j += kW) {
      gemm_tile<T, 4, kW>(k, a + i * a_row, a_row, a_col, b + j, n, c + i * n + j, n,
                          std::min<std::int64_t>(kW, n - j), accumulate);
    }
  }
  for (; i < m; ++i) {
    for (std::int64_t j = 0; j < n; j += kW) {
      gemm_tile<T, 1, kW>(k, a + i * a_row, a_row, a_col, b + j, n, c + i * n + j, n,
                          std::min<std::int64_t>(kW, n - j), accumulate);
    }
  }
}

}  // namespace

template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
          bool accumulate) {
  gemm_strided(m, n, k, a, k, 1, b, c, accumulate);
}

template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  gemm_strided(m, n, k, a, 1, m, b, c, accumulate);
}

template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  std::vector<T> bt(static_cast<std::size_t>(k * n));
  for (std::int64_t j = 0; j < n; ++j) {
    for (std::int64_t p = 0; p < k; ++p) bt[static_cast<std::size_t>(p * n + j)] = b[j * k + p];
  }
  gemm(m, n, k, a, bt.data(), c, accumulate);
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  const T* ap = a.value().ptr();
  const T* bp = b.value().ptr();
  T* op = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    a.node()->accumulate(self.grad);
    b.node()->accumulate(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  const T* ap = a.value().ptr();
  const T* bp = b.value().ptr();
  T* op = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] - bp[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    a.node()->accumulate(self.grad);
    if (b.requires_grad()) {
      Tensor<T> g = self.grad;
      for (auto& v : g.data()) v = -v;
      b.node()->accumulate(g);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  const T* ap = a.value().ptr();
  const T* bp = b.value().ptr();
  T* op = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] * bp[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    const std::int64_t n = self.grad.numel();
    const T* gp = self.grad.ptr();
    if (a.requires_grad()) {
      Tensor<T> ga(self.grad.shape());
      const T* bp = b.value().ptr();
      for (std::int64_t i = 0; i < n; ++i) ga[i] = gp[i] * bp[i];
      a.node()->accumulate(ga);
    }
    if (b.requires_grad()) {
      Tensor<T> gb(self.grad.shape());
      const T* ap = a.value().ptr();
      for (std::int64_t i = 0; i < n; ++i) gb[i] = gp[i] * ap[i];
      b.node()->accumulate(gb);
    }
  });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return unary(x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return unary(x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return unary(x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  for (T v : x.value().data()) {
    if (!(v > T(0))) throw DomainError("log of non-positive value");
  }
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary(x, [](T v) { return sigmoid_scalar(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> silu(const Var<T>& x) {
  return unary(
      x, [](T v) { return v * sigmoid_scalar(v); },
      [](T v, T) {
        const T s = sigmoid_scalar(v);
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  return unary(x, [](T v) { return softplus_scalar(v); },
               [](T v, T) { return sigmoid_scalar(v); });
}

template <typename T>
Var<T> recip(const Var<T>& x) {
  for (T v : x.value().data()) {
    if (v == T(0)) throw DomainError("recip(0)");
  }
  return unary(x, [](T v) { return T(1) / v; }, [](T, T y) { return -y * y; });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return unary(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// contractions

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || as.size() != bs.size() ||
      !std::equal(as.begin(), as.end() - 2, bs.begin()) || as[as.size() - 1] != bs[bs.size() - 2]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::int64_t m = as[as.size() - 2], k = as.back(), n = bs.back();
  std::int64_t batch = 1;
  for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
  Shape os = as;
  os.back() = n;
  Tensor<T> out(os);
  for (std::int64_t q = 0; q < batch; ++q) {
    gemm(m, n, k, a.value().ptr() + q * m * k, b.value().ptr() + q * k * n, out.ptr() + q * m * n,
         false);
  }
  return make_result<T>(std::move(out), {a, b}, [a, b, m, n, k, batch](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (a.requires_grad()) {
      Tensor<T> ga(a.shape());
      for (std::int64_t q = 0; q < batch; ++q) {
        gemm_nt(m, k, n, g + q * m * n, b.value().ptr() + q * k * n, ga.ptr() + q * m * k, false);
      }
      a.node()->accumulate(ga);
    }
    if (b.requires_grad()) {
      Tensor<T> gb(b.shape());
      for (std::int64_t q = 0; q < batch; ++q) {
        gemm_tn(k, n, m, a.value().ptr() + q * m * k, g + q * m * n, gb.ptr() + q * k * n, false);
      }
      b.node()->accumulate(gb);
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.empty() || ws.size() != 2 || xs.back() != ws[0]) {
    throw ShapeError("linear: incompatible shapes " + shape_str(xs) + " and " + shape_str(ws));
  }
  const std::int64_t k = ws[0], n = ws[1];
  const std::int64_t rows = x.numel() / k;
  Shape os = xs;
  os.back() = n;
  Tensor<T> out(os);
  gemm(rows, n, k, x.value().ptr(), w.value().ptr(), out.ptr(), false);
  return make_result<T>(std::move(out), {x, w}, [x, w, rows, n, k](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (x.requires_grad()) {
      Tensor<T>& gx = x.node()->grad_buffer();
      gemm_nt(rows, k, n, g, w.value().ptr(), gx.ptr(), true);
    }
    if (w.requires_grad()) {
      Tensor<T>& gw = w.node()->grad_buffer();
      gemm_tn(k, n, rows, x.value().ptr(), g, gw.ptr(), true);
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  if (bias.shape() != Shape{w.shape().size() == 2 ? w.shape()[1] : -1}) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) + " for weight " +
                     shape_str(w.shape()));
  }
  Var<T> y = linear(x, w);
  const std::int64_t n = bias.numel();
  const std::int64_t rows = y.numel() / n;
  Tensor<T> out = y.value();
  T* op = out.ptr();
  const T* bp = bias.value().ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t j = 0; j < n; ++j) op[r * n + j] += bp[j];
  }
  return make_result<T>(std::move(out), {y, bias}, [y, bias, rows, n](Node<T>& self) {
    y.node()->accumulate(self.grad);
    if (bias.requires_grad()) {
      Tensor<T>& gb = bias.node()->grad_buffer();
      const T* g = self.grad.ptr();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
Var<T> broadcast_to(const Var<T>& x, const Shape& shape) {
  const Shape& xs = x.shape();
  if (xs.size() > shape.size() || !std::equal(xs.begin(), xs.end(), shape.end() - xs.size())) {
    throw ShapeError("broadcast_to: " + shape_str(xs) + " is not a suffix of " + shape_str(shape));
  }
  const std::int64_t inner = x.numel();
  const std::int64_t reps = shape_numel(shape) / inner;
  Tensor<T> out(shape);
  for (std::int64_t r = 0; r < reps; ++r) {
    std::copy(x.value().ptr(), x.value().ptr() + inner, out.ptr() + r * inner);
  }
  return make_result<T>(std::move(out), {x}, [x, inner, reps](Node<T>& self) {
    Tensor<T> gx(x.shape());
    const T* g = self.grad.ptr();
    for (std::int64_t r = 0; r < reps; ++r) {
      for (std::int64_t i = 0; i < inner; ++i) gx[i] += g[r * inner + i];
    }
    x.node()->accumulate(gx);
  });
}

template <typename T>
Var<T> repeat_lastdim(const Var<T>& x, std::int64_t r) {
  if (r < 1) throw ShapeError("repeat_lastdim: r < 1");
  Shape os = x.shape();
  if (os.empty()) throw ShapeError("repeat_lastdim on scalar");
  os.back() *= r;
  const std::int64_t n = x.numel();
  Tensor<T> out(os);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < r; ++j) out[i * r + j] = x.value()[i];
  }
  return make_result<T>(std::move(out), {x}, [x, n, r](Node<T>& self) {
    Tensor<T> gx(x.shape());
    for (std::int64_t i = 0; i < n; ++i) {
      T s = 0;
      for (std::int64_t j = 0; j < r; ++j) s += self.grad[i * r + j];
      gx[i] = s;
    }
    x.node()->accumulate(gx);
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().data()) s += v;
  return make_result<T>(Tensor<T>::scalar(s), {x}, [x](Node<T>& self) {
    x.node()->accumulate(Tensor<T>(x.shape(), self.grad.item()));
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  Tensor<T> out = x.value().reshaped(shape);
  return make_result<T>(std::move(out), {x}, [x](Node<T>& self) {
    x.node()->accumulate(self.grad.reshaped(x.shape()));
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, std::int64_t begin, std::int64_t end) {
  axis = norm_axis(axis, static_cast<int>(x.shape().size()));
  const AxisSplit sp = split_at(x.shape(), axis);
  if (begin < 0 || end > sp.extent || begin >= end) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for axis of extent " + std::to_string(sp.extent));
  }
  Shape os = x.shape();
  os[static_cast<std::size_t>(axis)] = end - begin;
  const std::int64_t w = end - begin;
  Tensor<T> out(os);
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    const T* src = x.value().ptr() + (o * sp.extent + begin) * sp.inner;
    std::copy(src, src + w * sp.inner, out.ptr() + o * w * sp.inner);
  }
  return make_result<T>(std::move(out), {x}, [x, sp, begin, w](Node<T>& self) {
    Tensor<T>& gx = x.node()->grad_buffer();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      T* dst = gx.ptr() + (o * sp.extent + begin) * sp.inner;
      const T* src = self.grad.ptr() + o * w * sp.inner;
      for (std::int64_t i = 0; i < w * sp.inner; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat of empty list");
  axis = norm_axis(axis, static_cast<int>(xs[0].shape().size()));
  Shape os = xs[0].shape();
  std::int64_t total = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (s.size() != os.size()) throw ShapeError("concat: rank mismatch");
    total += s[static_cast<std::size_t>(axis)];
    s[static_cast<std::size_t>(axis)] = os[static_cast<std::size_t>(axis)];
    if (s != os) {
      throw ShapeError("concat: shape mismatch " + shape_str(x.shape()) + " vs " +
                       shape_str(xs[0].shape()));
    }
  }
  os[static_cast<std::size_t>(axis)] = total;
  const AxisSplit sp = split_at(os, axis);
  Tensor<T> out(os);
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const std::int64_t e = x.shape()[static_cast<std::size_t>(axis)];
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      const T* src = x.value().ptr() + o * e * sp.inner;
      std::copy(src, src + e * sp.inner, out.ptr() + (o * total + off) * sp.inner);
    }
    off += e;
  }
  return make_result<T>(std::move(out), xs, [xs, offsets, sp, total, axis](Node<T>& self) {
    for (std::size_t q = 0; q < xs.size(); ++q) {
      if (!xs[q].requires_grad()) continue;
      const std::int64_t e = xs[q].shape()[static_cast<std::size_t>(axis)];
      Tensor<T> g(xs[q].shape());
      for (std::int64_t o = 0; o < sp.outer; ++o) {
        const T* src = self.grad.ptr() + (o * total + offsets[q]) * sp.inner;
        std::copy(src, src + e * sp.inner, g.ptr() + o * e * sp.inner);
      }
      xs[q].node()->accumulate(g);
    }
  });
}

template <typename T>
Var<T> unpack(const Var<T>& packed, std::int64_t offset, const Shape& shape) {
  const std::int64_t n = shape_numel(shape);
  if (offset < 0 || offset + n > packed.numel()) throw ShapeError("unpack window out of range");
  std::vector<T> vals(packed.value().ptr() + offset, packed.value().ptr() + offset + n);
  return make_result<T>(Tensor<T>(shape, std::move(vals)), {packed},
                        [packed, offset, n](Node<T>& self) {
                          Tensor<T>& g = packed.node()->grad_buffer();
                          for (std::int64_t i = 0; i < n; ++i) g[offset + i] += self.grad[i];
                        });
}

// ---------------------------------------------------------------------------
// time-axis ops

namespace {

template <typename T>
Tensor<T> reverse_valid(const Tensor<T>& x, const Lengths& lens) {
  const std::int64_t b = x.dim(0), t = x.dim(1), inner = x.numel() / (b * t);
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t len = lens[static_cast<std::size_t>(i)];
    for (std::int64_t s = 0; s < t; ++s) {
      const std::int64_t src = s < len ? len - 1 - s : s;
      std::copy(x.ptr() + (i * t + src) * inner, x.ptr() + (i * t + src + 1) * inner,
                out.ptr() + (i * t + s) * inner);
    }
  }
  return out;
}

}  // namespace

template <typename T>
Var<T> reverse_time(const Var<T>& x, const Lengths& lengths) {
  const Lengths lens = resolve_lengths(lengths, x.shape());
  return make_result<T>(reverse_valid(x.value(), lens), {x}, [x, lens](Node<T>& self) {
    x.node()->accumulate(reverse_valid(self.grad, lens));
  });
}

template <typename T>
Var<T> time_shift(const Var<T>& x, const Var<T>& tail) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw ShapeError("time_shift expects [batch, time, ...]");
  Shape ts = xs;
  ts.erase(ts.begin() + 1);
  require_same(tail.shape(), ts, "time_shift tail");
  const std::int64_t b = xs[0], t = xs[1], inner = x.numel() / (b * t);
  Tensor<T> out(xs);
  for (std::int64_t i = 0; i < b; ++i) {
    std::copy(tail.value().ptr() + i * inner, tail.value().ptr() + (i + 1) * inner,
              out.ptr() + i * t * inner);
    std::copy(x.value().ptr() + i * t * inner, x.value().ptr() + (i * t + t - 1) * inner,
              out.ptr() + (i * t + 1) * inner);
  }
  return make_result<T>(std::move(out), {x, tail}, [x, tail, b, t, inner](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (x.requires_grad()) {
      Tensor<T> gx(x.shape());
      for (std::int64_t i = 0; i < b; ++i) {
        std::copy(g + (i * t + 1) * inner, g + (i * t + t) * inner, gx.ptr() + i * t * inner);
      }
      x.node()->accumulate(gx);
    }
    if (tail.requires_grad()) {
      Tensor<T> gt(tail.shape());
      for (std::int64_t i = 0; i < b; ++i) {
        std::copy(g + i * t * inner, g + (i * t + 1) * inner, gt.ptr() + i * inner);
      }
      tail.node()->accumulate(gt);
    }
  });
}

template <typename T>
Var<T> take_frames(const Var<T>& x, const Lengths& starts, std::int64_t count) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw ShapeError("take_frames expects [batch, time, ...]");
  const std::int64_t b = xs[0], t = xs[1], inner = x.numel() / (b * t);
  if (static_cast<std::int64_t>(starts.size()) != b || count < 0) {
    throw ShapeError("take_frames: need one start per sequence");
  }
  for (auto s : starts) {
    if (s < 0 || s + count > t) throw ShapeError("take_frames: window outside time axis");
  }
  Shape os = xs;
  os[1] = count;
  Tensor<T> out(os);
  for (std::int64_t i = 0; i < b; ++i) {
    const T* src = x.value().ptr() + (i * t + starts[static_cast<std::size_t>(i)]) * inner;
    std::copy(src, src + count * inner, out.ptr() + i * count * inner);
  }
  return make_result<T>(std::move(out), {x}, [x, starts, b, t, inner, count](Node<T>& self) {
    Tensor<T> gx(x.shape());
    for (std::int64_t i = 0; i < b; ++i) {
      const T* g = self.grad.ptr() + i * count * inner;
      T* dst = gx.ptr() + (i * t + starts[static_cast<std::size_t>(i)]) * inner;
      for (std::int64_t j = 0; j < count * inner; ++j) dst[j] += g[j];
    }
    x.node()->accumulate(gx);
  });
}

template <typename T>
Var<T> mask_time(const Var<T>& x, const Lengths& lengths) {
  const Lengths lens = resolve_lengths(lengths, x.shape());
  const std::int64_t b = x.dim(0), t = x.dim(1), inner = x.numel() / (b * t);
  bool all_full = true;
  for (auto l : lens) all_full = all_full && l == t;
  if (all_full) return x;
  auto apply = [lens, b, t, inner](const Tensor<T>& in) {
    Tensor<T> out = in;
    for (std::int64_t i = 0; i < b; ++i) {
      const std::int64_t len = lens[static_cast<std::size_t>(i)];
      std::fill(out.ptr() + (i * t + len) * inner, out.ptr() + (i * t + t) * inner, T(0));
    }
    return out;
  };
  return make_result<T>(apply(x.value()), {x},
                        [x, apply](Node<T>& self) { x.node()->accumulate(apply(self.grad)); });
}

// ---------------------------------------------------------------------------
// softmax family

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != x.numel()) {
    throw ShapeError("softmax mask has " + std::to_string(mask.size()) + " entries for " +
                     shape_str(x.shape()));
  }
  if (x.shape().empty()) throw ShapeError("softmax on scalar");
  const std::int64_t n = x.shape().back();
  const std::int64_t rows = x.numel() / n;
  Tensor<T> out(x.shape());
  const T* xp = x.value().ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xp + r * n;
    T* orow = out.ptr() + r * n;
    const std::uint8_t* mrow = mask.empty() ? nullptr : mask.data() + r * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::int64_t j = 0; j < n; ++j) {
      if (!mrow || mrow[j]) mx = std::max(mx, row[j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      throw DomainError("softmax: row " + std::to_string(r) + " is fully masked");
    }
    T s = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      const T e = (!mrow || mrow[j]) ? std::exp(row[j] - mx) : T(0);
      orow[j] = e;
      s += e;
    }
    for (std::int64_t j = 0; j < n; ++j) orow[j] /= s;
  }
  return make_result<T>(std::move(out), {x}, [x, n, rows](Node<T>& self) {
    Tensor<T> gx(x.shape());
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (std::int64_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::int64_t j = 0; j < n; ++j) dot += y[r * n + j] * g[r * n + j];
      for (std::int64_t j = 0; j < n; ++j) gx[r * n + j] = y[r * n + j] * (g[r * n + j] - dot);
    }
    x.node()->accumulate(gx);
  });
}

template <typename T>
Var<T> log_softmax_lastdim(const Var<T>& x) {
  if (x.shape().empty()) throw ShapeError("log_softmax on scalar");
  const std::int64_t n = x.shape().back();
  const std::int64_t rows = x.numel() / n;
  Tensor<T> out(x.shape());
  const T* xp = x.value().ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xp + r * n;
    T mx = *std::max_element(row, row + n);
    T s = 0;
    for (std::int64_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const T lse = mx + std::log(s);
    for (std::int64_t j = 0; j < n; ++j) out[r * n + j] = row[j] - lse;
  }
  return make_result<T>(std::move(out), {x}, [x, n, rows](Node<T>& self) {
    Tensor<T> gx(x.shape());
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (std::int64_t r = 0; r < rows; ++r) {
      T gs = 0;
      for (std::int64_t j = 0; j < n; ++j) gs += g[r * n + j];
      for (std::int64_t j = 0; j < n; ++j) {
        gx[r * n + j] = g[r * n + j] - std::exp(y[r * n + j]) * gs;
      }
    }
    x.node()->accumulate(gx);
  });
}

// ---------------------------------------------------------------------------
// normalisation

namespace {

// Shared kernel: normalises rows of width `w` with optional mean removal.
// Stores xhat and 1/std per row for the backward pass.
template <typename T>
void norm_rows(const T* x, T* xhat, T* inv_std, std::int64_t rows, std::int64_t w, T eps,
               bool center) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * w;
    T mu = 0;
    if (center) {
      for (std::int64_t j = 0; j < w; ++j) mu += xr[j];
      mu /= static_cast<T>(w);
    }
    T var = 0;
    for (std::int64_t j = 0; j < w; ++j) {
      const T d = xr[j] - mu;
      var += d * d;
    }
    var /= static_cast<T>(w);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::int64_t j = 0; j < w; ++j) xhat[r * w + j] = (xr[j] - mu) * is;
  }
}

template <typename T>
Var<T> grouped_norm(const Var<T>& x, std::int64_t groups, const Var<T>& gain, const Var<T>* bias,
                    T eps, bool center) {
  if (x.shape().empty()) throw ShapeError("norm on scalar");
  const std::int64_t c = x.shape().back();
  if (groups < 1 || c % groups != 0) {
    throw ShapeError("norm: " + std::to_string(c) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  require_same(gain.shape(), Shape{c}, "norm gain");
  if (bias) require_same(bias->shape(), Shape{c}, "norm bias");
  const std::int64_t w = c / groups;
  const std::int64_t rows = x.numel() / w;
  auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(x.numel()));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  norm_rows(x.value().ptr(), xhat->data(), inv_std->data(), rows, w, eps, center);
  Tensor<T> out(x.shape());
  const T* gp = gain.value().ptr();
  const T* bp = bias ? bias->value().ptr() : nullptr;
  const std::int64_t frames = x.numel() / c;
  for (std::int64_t f = 0; f < frames; ++f) {
    for (std::int64_t j = 0; j < c; ++j) {
      const std::int64_t i = f * c + j;
      out[i] = (*xhat)[static_cast<std::size_t>(i)] * gp[j] + (bp ? bp[j] : T(0));
    }
  }
  Var<T> b = bias ? *bias : Var<T>();
  std::vector<Var<T>> inputs{x, gain};
  if (bias) inputs.push_back(*bias);
  return make_result<T>(
      std::move(out), inputs, [x, gain, b, xhat, inv_std, c, w, rows, frames, center](Node<T>& self) {
        const T* g = self.grad.ptr();
        const T* gp = gain.value().ptr();
        if (gain.requires_grad()) {
          Tensor<T>& gg = gain.node()->grad_buffer();
          for (std::int64_t f = 0; f < frames; ++f) {
            for (std::int64_t j = 0; j < c; ++j) {
              gg[j] += g[f * c + j] * (*xhat)[static_cast<std::size_t>(f * c + j)];
            }
          }
        }
        if (b.defined() && b.requires_grad()) {
          Tensor<T>& gb = b.node()->grad_buffer();
          for (std::int64_t f = 0; f < frames; ++f) {
            for (std::int64_t j = 0; j < c; ++j) gb[j] += g[f * c + j];
          }
        }
        if (x.requires_grad()) {
          Tensor<T> gx(x.shape());
          std::vector<T> dxh(static_cast<std::size_t>(w));
          for (std::int64_t r = 0; r < rows; ++r) {
            const std::int64_t base = r * w;
            const std::int64_t ch0 = base % c;
            T m1 = 0, m2 = 0;
            for (std::int64_t j = 0; j < w; ++j) {
              const T d = g[base + j] * gp[ch0 + j];
              dxh[static_cast<std::size_t>(j)] = d;
              m1 += d;
              m2 += d * (*xhat)[static_cast<std::size_t>(base + j)];
            }
            m1 /= static_cast<T>(w);
            m2 /= static_cast<T>(w);
            const T is = (*inv_std)[static_cast<std::size_t>(r)];
            for (std::int64_t j = 0; j < w; ++j) {
              const T xh = (*xhat)[static_cast<std::size_t>(base + j)];
              gx[base + j] = is * (dxh[static_cast<std::size_t>(j)] - (center ? m1 : T(0)) - xh * m2);
            }
          }
          x.node()->accumulate(gx);
        }
      });
}

}  // namespace

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  return grouped_norm(x, 1, gain, &bias, eps, true);
}

template <typename T>
Var<T> rms_norm(const Var<T>& x, const Var<T>& gain, T eps) {
  return grouped_norm<T>(x, 1, gain, nullptr, eps, false);
}

template <typename T>
Var<T> group_norm(const Var<T>& x, std::int64_t groups, const Var<T>& gain, const Var<T>& bias,
                  T eps) {
  return grouped_norm(x, groups, gain, &bias, eps, true);
}

template <typename T>
Var<T> glu_lastdim(const Var<T>& x) {
  if (x.shape().empty() || x.shape().back() % 2 != 0) {
    throw ShapeError("glu: last dim must be even, got " + shape_str(x.shape()));
  }
  const std::int64_t c2 = x.shape().back(), c = c2 / 2, rows = x.numel() / c2;
  Shape os = x.shape();
  os.back() = c;
  Tensor<T> out(os);
  const T* xp = x.value().ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t j = 0; j < c; ++j) {
      out[r * c + j] = xp[r * c2 + j] * sigmoid_scalar(xp[r * c2 + c + j]);
    }
  }
  return make_result<T>(std::move(out), {x}, [x, c, c2, rows](Node<T>& self) {
    Tensor<T> gx(x.shape());
    const T* xp = x.value().ptr();
    const T* g = self.grad.ptr();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t j = 0; j < c; ++j) {
        const T a = xp[r * c2 + j];
        const T s = sigmoid_scalar(xp[r * c2 + c + j]);
        gx[r * c2 + j] = g[r * c + j] * s;
        gx[r * c2 + c + j] = g[r * c + j] * a * s * (T(1) - s);
      }
    }
    x.node()->accumulate(gx);
  });
}

template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride,
                        std::int64_t pad_left, std::int64_t pad_right) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("depthwise_conv1d expects [batch, time, channels]");
  const std::int64_t b = xs[0], t = xs[1], c = xs[2];
  if (w.shape().size() != 2 || w.shape()[0] != c) {
    throw ShapeError("depthwise_conv1d: weight " + shape_str(w.shape()) + " for " +
                     std::to_string(c) + " channels");
  }
  if (bias.defined()) require_same(bias.shape(), Shape{c}, "depthwise_conv1d bias");
  const std::int64_t kw = w.shape()[1];
  if (stride < 1 || pad_left < 0 || pad_right < 0) throw ShapeError("depthwise_conv1d: bad geometry");
  const std::int64_t span = t + pad_left + pad_right - kw;
  if (span < 0) throw ShapeError("depthwise_conv1d: input shorter than kernel");
  const std::int64_t to = span / stride + 1;
  Tensor<T> out(Shape{b, to, c});
  const T* xp = x.value().ptr();
  const T* wp = w.value().ptr();
  for (std::int64_t i = 0; i < b; ++i) {
    for (std::int64_t o = 0; o < to; ++o) {
      T* orow = out.ptr() + (i * to + o) * c;
      if (bias.defined()) std::copy(bias.value().ptr(), bias.value().ptr() + c, orow);
      for (std::int64_t j = 0; j < kw; ++j) {
        const std::int64_t s = o * stride - pad_left + j;
        if (s < 0 || s >= t) continue;
        const T* xrow = xp + (i * t + s) * c;
        for (std::int64_t ch = 0; ch < c; ++ch) orow[ch] += wp[ch * kw + j] * xrow[ch];
      }
    }
  }
  std::vector<Var<T>> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out), inputs,
                        [x, w, bias, b, t, c, kw, to, stride, pad_left](Node<T>& self) {
    const T* g = self.grad.ptr();
    const T* xp = x.value().ptr();
    const T* wp = w.value().ptr();
    Tensor<T> gx(x.shape());
    Tensor<T> gw(w.shape());
    for (std::int64_t i = 0; i < b; ++i) {
      for (std::int64_t o = 0; o < to; ++o) {
        const T* grow = g + (i * to + o) * c;
        for (std::int64_t j = 0; j < kw; ++j) {
          const std::int64_t s = o * stride - pad_left + j;
          if (s < 0 || s >= t) continue;
          const T* xrow = xp + (i * t + s) * c;
          T* gxrow = gx.ptr() + (i * t + s) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            gxrow[ch] += wp[ch * kw + j] * grow[ch];
            gw[ch * kw + j] += xrow[ch] * grow[ch];
          }
        }
      }
    }
    x.node()->accumulate(gx);
    w.node()->accumulate(gw);
    if (bias.defined() && bias.requires_grad()) {
      Tensor<T> gb(bias.shape());
      for (std::int64_t r = 0; r < b * to; ++r) {
        for (std::int64_t ch = 0; ch < c; ++ch) gb[ch] += g[r * c + ch];
      }
      bias.node()->accumulate(gb);
    }
  });
}

// ---------------------------------------------------------------------------

#define RALA_INSTANTIATE_OPS(T)                                                              \
  template void gemm<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*, bool); \
  template void gemm_tn<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*,    \
                           bool);                                                             \
  template void gemm_nt<T>(std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T*,    \
                           bool);                                                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                          \
  template Var<T> neg(const Var<T>&);                                                         \
  template Var<T> scale(const Var<T>&, T);                                                    \
  template Var<T> add_scalar(const Var<T>&, T);                                               \
  template Var<T> exp(const Var<T>&);                                                         \
  template Var<T> log(const Var<T>&);                                                         \
  template Var<T> tanh(const Var<T>&);                                                        \
  template Var<T> sigmoid(const Var<T>&);                                                     \
  template Var<T> silu(const Var<T>&);                                                        \
  template Var<T> softplus(const Var<T>&);                                                    \
  template Var<T> recip(const Var<T>&);                                                       \
  template Var<T> clamp(const Var<T>&, T, T);                                                 \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                       \
  template Var<T> linear(const Var<T>&, const Var<T>&);                                       \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> broadcast_to(const Var<T>&, const Shape&);                                  \
  template Var<T> repeat_lastdim(const Var<T>&, std::int64_t);                                \
  template Var<T> sum(const Var<T>&);                                                         \
  template Var<T> mean(const Var<T>&);                                                        \
  template Var<T> reshape(const Var<T>&, const Shape&);                                       \
  template Var<T> slice(const Var<T>&, int, std::int64_t, std::int64_t);                      \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                    \
  template Var<T> unpack(const Var<T>&, std::int64_t, const Shape&);                          \
  template Var<T> reverse_time(const Var<T>&, const Lengths&);                                \
  template Var<T> time_shift(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mask_time(const Var<T>&, const Lengths&);                                   \
  template Var<T> take_frames(const Var<T>&, const Lengths&, std::int64_t);                  \
  template Var<T> softmax_lastdim(const Var<T>&, std::span<const std::uint8_t>);              \
  template Var<T> log_softmax_lastdim(const Var<T>&);                                         \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                 \
  template Var<T> rms_norm(const Var<T>&, const Var<T>&, T);                                  \
  template Var<T> group_norm(const Var<T>&, std::int64_t, const Var<T>&, const Var<T>&, T);   \
  template Var<T> glu_lastdim(const Var<T>&);                                                 \
  template Var<T> depthwise_conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::int64_t, \
                                   std::int64_t, std::int64_t);

RALA_INSTANTIATE_OPS(float)
RALA_INSTANTIATE_OPS(double)

}  // namespace rala
