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

#include "rala/rwkv.hpp"

#include <cmath>

#include "rala/wkv_kernel.hpp"

namespace rala {

template <typename T>
RwkvParams<T> RwkvParams<T>::init(std::int64_t d_model, std::int64_t n_heads,
                                  std::int64_t decay_rank, Rng& rng) {
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw ShapeError("RWKV: d_model " + std::to_string(d_model) + " not divisible by " +
                     std::to_string(n_heads) + " heads");
  }
  if (decay_rank < 1) throw Error("RWKV: decay rank must be >= 1");
  RwkvParams p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.decay_rank = decay_rank;
  p.mu = Var<T>::parameter(uniform_tensor<T>(Shape{5, d_model}, T(0.2), T(0.8), rng));
  p.w_r = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_k = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_v = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_g = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_o = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  // decay speeds spread across each head, slow (w near 1) to fast
  Tensor<T> base(Shape{d_model});
  const std::int64_t hd = d_model / n_heads;
  for (std::int64_t c = 0; c < d_model; ++c) {
    const double frac = hd > 1 ? static_cast<double>(c % hd) / static_cast<double>(hd - 1) : 0.5;
    base[c] = static_cast<T>(-6.0 + 5.0 * std::pow(frac, 0.7));
  }
  p.w_base = Var<T>::parameter(std::move(base));
  p.a_w = Var<T>::parameter(glorot<T>(d_model, decay_rank, rng, 0.1));
  p.b_w = Var<T>::parameter(normal_tensor<T>(Shape{decay_rank, d_model}, T(0.01), rng));
  p.u = Var<T>::parameter(uniform_tensor<T>(Shape{d_model}, T(0), T(0.5), rng));
  p.gn_gain = Var<T>::parameter(ones<T>(Shape{d_model}));
  p.gn_bias = Var<T>::parameter(zeros<T>(Shape{d_model}));
  return p;
}

template <typename T>
void RwkvParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + "mu", mu});
  out.push_back({prefix + "w_r", w_r});
  out.push_back({prefix + "w_k", w_k});
  out.push_back({prefix + "w_v", w_v});
  out.push_back({prefix + "w_g", w_g});
  out.push_back({prefix + "w_o", w_o});
  out.push_back({prefix + "w_base", w_base});
  out.push_back({prefix + "a_w", a_w});
  out.push_back({prefix + "b_w", b_w});
  out.push_back({prefix + "u", u});
  out.push_back({prefix + "gn_gain", gn_gain});
  out.push_back({prefix + "gn_bias", gn_bias});
}

template <typename T>
RecurrentState<T> RwkvParams<T>::zero_state(std::int64_t batch) const {
  const std::int64_t hd = head_dim();
  return {Var<T>(zeros<T>(Shape{batch, n_heads, hd, hd})), Var<T>(zeros<T>(Shape{batch, d_model}))};
}

namespace {

template <typename T>
void check_rwkv_input(const RwkvParams<T>& p, const Var<T>& x, const RecurrentState<T>& s0) {
  if (x.shape().size() != 3 || x.dim(2) != p.d_model) {
    throw ShapeError("RWKV input " + shape_str(x.shape()) + " does not match d_model " +
                     std::to_string(p.d_model));
  }
  const std::int64_t b = x.dim(0), hd = p.head_dim();
  if (!s0.matrix.defined() || s0.matrix.shape() != Shape{b, p.n_heads, hd, hd} ||
      !s0.tail.defined() || s0.tail.shape() != Shape{b, p.d_model}) {
    throw ShapeError("RWKV state does not match batch " + std::to_string(b) + " and params");
  }
  for (T v : x.value().data()) {
    if (!std::isfinite(v)) throw DomainError("RWKV: non-finite input");
  }
}

template <typename T>
struct Mixed {
  Var<T> r, k, v, w, g;
};

template <typename T>
Mixed<T> token_shift_mix(const RwkvParams<T>& p, const Var<T>& x, const Var<T>& tail) {
  const Shape& s = x.shape();
  Var<T> mu = clamp(p.mu, T(0), T(1));
  Var<T> delta = sub(time_shift(x, tail), x);
  auto mix = [&](std::int64_t row) {
    Var<T> m = reshape(slice(mu, 0, row, row + 1), Shape{p.d_model});
    return add(x, mul(broadcast_to(m, s), delta));
  };
  return {mix(0), mix(1), mix(2), mix(3), mix(4)};
}

template <typename T>
Var<T> log_decay(const RwkvParams<T>& p, const Var<T>& xw) {
  Var<T> d = add(broadcast_to(p.w_base, xw.shape()), linear(tanh(linear(xw, p.a_w)), p.b_w));
  return neg(exp(d));
}

}  // namespace

template <typename T>
RecurrentOutput<T> rwkv_forward(const RwkvParams<T>& p, const Var<T>& x,
                                const RecurrentState<T>& s0, std::int64_t chunk,
                                const Lengths& lengths) {
  check_rwkv_input(p, x, s0);
  const Lengths lens = resolve_lengths(lengths, x.shape());
  const Mixed<T> m = token_shift_mix(p, x, s0.tail);
  Var<T> r = linear(m.r, p.w_r);
  Var<T> k = linear(m.k, p.w_k);
  Var<T> v = linear(m.v, p.w_v);
  Var<T> g = silu(linear(m.g, p.w_g));
  Var<T> lw = log_decay(p, m.w);
  ScanResult<T> scan = wkv_scan(r, k, v, lw, p.u, s0.matrix, p.n_heads, chunk, lens);
  Var<T> y = group_norm(scan.y, p.n_heads, p.gn_gain, p.gn_bias);
  Var<T> out = mask_time(linear(mul(g, y), p.w_o), lens);
  Lengths last(lens.size());
  for (std::size_t i = 0; i < lens.size(); ++i) last[i] = lens[i] - 1;
  Var<T> tail = reshape(take_frames(x, last, 1), Shape{x.dim(0), p.d_model});
  return {out, {scan.state, tail}};
}

template <typename T>
Tensor<T> rwkv_decay(const RwkvParams<T>& p, const Var<T>& x, const RecurrentState<T>& s0) {
  check_rwkv_input(p, x, s0);
  NoGradGuard guard;
  const Mixed<T> m = token_shift_mix(p, x, s0.tail);
  return exp(log_decay(p, m.w)).value();
}

template struct RwkvParams<float>;
template struct RwkvParams<double>;
template RecurrentOutput<float> rwkv_forward(const RwkvParams<float>&, const Var<float>&,
                                             const RecurrentState<float>&, std::int64_t,
                                             const Lengths&);
template RecurrentOutput<double> rwkv_forward(const RwkvParams<double>&, const Var<double>&,
                                              const RecurrentState<double>&, std::int64_t,
                                              const Lengths&);
template Tensor<float> rwkv_decay(const RwkvParams<float>&, const Var<float>&,
                                  const RecurrentState<float>&);
template Tensor<double> rwkv_decay(const RwkvParams<double>&, const Var<double>&,
                                   const RecurrentState<double>&);

}  // namespace rala
