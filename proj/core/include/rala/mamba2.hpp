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

#pragma once

#include <cstdint>
#include <string>

#include "rala/random.hpp"
#include "rala/recurrent.hpp"

namespace rala {

// Mamba-2 style block: input projection to (z, x, B, C, dt), causal depthwise
// conv + silu over (x, B, C), scalar-decay scan per head, gated RMS norm and
// output projection.
template <typename T>
struct Mamba2Params {
  static constexpr std::int64_t kConvWidth = 4;
  std::int64_t d_model = 0;
  std::int64_t n_heads = 0;
  std::int64_t head_dim = 0;
  std::int64_t state_dim = 16;
  Var<T> w_in;     // [d_model, 2*inner + 2*state_dim + n_heads]
  Var<T> conv_w;   // [inner + 2*state_dim, kConvWidth]
  Var<T> conv_b;   // [inner + 2*state_dim]
  Var<T> dt_bias;  // [n_heads]
  Var<T> a_log;    // [n_heads]
  Var<T> d_skip;   // [n_heads]
  Var<T> norm_gain;  // [inner]
  Var<T> w_o;      // [inner, d_model]

  std::int64_t inner() const { return n_heads * head_dim; }
  std::int64_t conv_channels() const { return inner() + 2 * state_dim; }
  static Mamba2Params init(std::int64_t d_model, std::int64_t n_heads, std::int64_t head_dim,
                           std::int64_t state_dim, Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
  RecurrentState<T> zero_state(std::int64_t batch) const;
};

template <typename T>
RecurrentOutput<T> mamba2_forward(const Mamba2Params<T>& p, const Var<T>& x,
                                  const RecurrentState<T>& s0, std::int64_t chunk,
                                  const Lengths& lengths = {});

template <typename T>
RecurrentOutput<T> mamba2_forward_seq(const Mamba2Params<T>& p, const Var<T>& x,
                                      const RecurrentState<T>& s0, const Lengths& lengths = {}) {
  return mamba2_forward(p, x, s0, 0, lengths);
}

template <typename T>
RecurrentOutput<T> mamba2_forward_chunked(const Mamba2Params<T>& p, const Var<T>& x,
                                          const RecurrentState<T>& s0, std::int64_t chunk,
                                          const Lengths& lengths = {}) {
  if (chunk < 1) throw Error("mamba2_forward_chunked: chunk must be >= 1");
  return mamba2_forward(p, x, s0, chunk, lengths);
}

// Realised per-head decay a_t, [batch, time, heads].
template <typename T>
Tensor<T> mamba2_decay(const Mamba2Params<T>& p, const Var<T>& x, const RecurrentState<T>& s0);

}  // namespace rala
