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

#include "rala/mamba2.hpp"

#include <cmath>

#include "rala/ssd_kernel.hpp"

namespace rala {

template <typename T>
Mamba2Params<T> Mamba2Params<T>::init(std::int64_t d_model, std::int64_t n_heads,
                                      std::int64_t head_dim, std::int64_t state_dim, Rng& rng) {
  if (d_model < 1 || n_heads < 1 || head_dim < 1 || state_dim < 1) {
    throw Error("Mamba2: dimensions must be >= 1");
  }
  Mamba2Params p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.head_dim = head_dim;
  p.state_dim = state_dim;
  const std::int64_t di = p.inner(), cc = p.conv_channels();
  p.w_in = Var<T>::parameter(glorot<T>(d_model, 2 * di + 2 * state_dim + n_heads, rng));
  const T cb = static_cast<T>(1.0 / std::sqrt(static_cast<double>(kConvWidth)));
  p.conv_w = Var<T>::parameter(uniform_tensor<T>(Shape{cc, kConvWidth}, -cb, cb, rng));
  p.conv_b = Var<T>::parameter(zeros<T>(Shape{cc}));
  // step sizes log-uniform in [1e-3, 1e-1], stored through inverse softplus
  Tensor<T> dtb(Shape{n_heads}), alog(Shape{n_heads});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::int64_t h = 0; h < n_heads; ++h) {
    const double dt = std::exp(std::log(1e-3) + u01(rng) * (std::log(1e-1) - std::log(1e-3)));
    dtb[h] = static_cast<T>(dt + std::log(-std::expm1(-dt)));
    alog[h] = static_cast<T>(std::log(1.0 + 15.0 * u01(rng)));
  }
  p.dt_bias = Var<T>::parameter(std::move(dtb));
  p.a_log = Var<T>::parameter(std::move(alog));
  p.d_skip = Var<T>::parameter(ones<T>(Shape{n_heads}));
  p.norm_gain = Var<T>::parameter(ones<T>(Shape{di}));
  p.w_o = Var<T>::parameter(glorot<T>(di, d_model, rng));
  return p;
}

template <typename T>
void Mamba2Params<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + "w_in", w_in});
  out.push_back({prefix + "conv_w", conv_w});
  out.push_back({prefix + "conv_b", conv_b});
  out.push_back({prefix + "dt_bias", dt_bias});
  out.push_back({prefix + "a_log", a_log});
  out.push_back({prefix + "d_skip", d_skip});
  out.push_back({prefix + "norm_gain", norm_gain});
  out.push_back({prefix + "w_o", w_o});
}

template <typename T>
RecurrentState<T> Mamba2Params<T>::zero_state(std::int64_t batch) const {
  return {Var<T>(zeros<T>(Shape{batch, n_heads, state_dim, head_dim})),
          Var<T>(zeros<T>(Shape{batch, kConvWidth - 1, conv_channels()}))};
}

namespace {

template <typename T>
void check_mamba_input(const Mamba2Params<T>& p, const Var<T>& x, const RecurrentState<T>& s0) {
  if (x.shape().size() != 3 || x.dim(2) != p.d_model) {
    throw ShapeError("Mamba2 input " + shape_str(x.shape()) + " does not match d_model " +
                     std::to_string(p.d_model));
  }
  const std::int64_t b = x.dim(0);
  if (!s0.matrix.defined() || s0.matrix.shape() != Shape{b, p.n_heads, p.state_dim, p.head_dim} ||
      !s0.tail.defined() ||
      s0.tail.shape() != Shape{b, Mamba2Params<T>::kConvWidth - 1, p.conv_channels()}) {
    throw ShapeError("Mamba2 state does not match batch " + std::to_string(b) + " and params");
  }
  for (T v : x.value().data()) {
    if (!std::isfinite(v)) throw DomainError("Mamba2: non-finite input");
  }
}

template <typename T>
struct Projected {
  Var<T> z, ext, xc, b, c, delta;
};

template <typename T>
Projected<T> project(const Mamba2Params<T>& p, const Var<T>& x, const Var<T>& tail) {
  const std::int64_t di = p.inner(), cc = p.conv_channels(), n = p.state_dim;
  Projected<T> o;
  Var<T> proj = linear(x, p.w_in);
  o.z = slice(proj, 2, 0, di);
  Var<T> xbc = slice(proj, 2, di, di + cc);
  Var<T> dtp = slice(proj, 2, di + cc, di + cc + p.n_heads);
  o.ext = concat<T>({tail, xbc}, 1);
  Var<T> conv = silu(depthwise_conv1d(o.ext, p.conv_w, p.conv_b, 1, 0, 0));
  o.xc = slice(conv, 2, 0, di);
  o.b = slice(conv, 2, di, di + n);
  o.c = slice(conv, 2, di + n, cc);
  o.delta = softplus(add(dtp, broadcast_to(p.dt_bias, dtp.shape())));
  return o;
}

}  // namespace

template <typename T>
RecurrentOutput<T> mamba2_forward(const Mamba2Params<T>& p, const Var<T>& x,
                                  const RecurrentState<T>& s0, std::int64_t chunk,
                                  const Lengths& lengths) {
  check_mamba_input(p, x, s0);
  const Lengths lens = resolve_lengths(lengths, x.shape());
  const Projected<T> pr = project(p, x, s0.tail);
  ScanResult<T> scan = ssd_scan(pr.xc, pr.delta, p.a_log, pr.b, pr.c, s0.matrix, chunk, lens);
  Var<T> skip = broadcast_to(repeat_lastdim(p.d_skip, p.head_dim), pr.xc.shape());
  Var<T> y = add(scan.y, mul(skip, pr.xc));
  Var<T> out = mask_time(linear(mul(rms_norm(y, p.norm_gain), silu(pr.z)), p.w_o), lens);
  Var<T> tail = take_frames(pr.ext, lens, Mamba2Params<T>::kConvWidth - 1);
  return {out, {scan.state, tail}};
}

template <typename T>
Tensor<T> mamba2_decay(const Mamba2Params<T>& p, const Var<T>& x, const RecurrentState<T>& s0) {
  check_mamba_input(p, x, s0);
  NoGradGuard guard;
  const Projected<T> pr = project(p, x, s0.tail);
  Tensor<T> a = pr.delta.value();
  const std::int64_t h = p.n_heads;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    a[i] = static_cast<T>(std::exp(-static_cast<double>(a[i]) *
                                   std::exp(static_cast<double>(p.a_log.value()[i % h]))));
  }
  return a;
}

template struct Mamba2Params<float>;
template struct Mamba2Params<double>;
template RecurrentOutput<float> mamba2_forward(const Mamba2Params<float>&, const Var<float>&,
                                               const RecurrentState<float>&, std::int64_t,
                                               const Lengths&);
template RecurrentOutput<double> mamba2_forward(const Mamba2Params<double>&, const Var<double>&,
                                                const RecurrentState<double>&, std::int64_t,
                                                const Lengths&);
template Tensor<float> mamba2_decay(const Mamba2Params<float>&, const Var<float>&,
                                    const RecurrentState<float>&);
template Tensor<double> mamba2_decay(const Mamba2Params<double>&, const Var<double>&,
                                     const RecurrentState<double>&);

}  // namespace rala
