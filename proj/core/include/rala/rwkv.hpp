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

// Time-mixing block of an RWKV-6 style layer (no channel mixing). Token-shift
// mixing coefficients are static per channel.
template <typename T>
struct RwkvParams {
  std::int64_t d_model = 0;
  std::int64_t n_heads = 0;
  std::int64_t decay_rank = 8;
  Var<T> mu;  // [5, d_model], rows r, k, v, w, g; clamped to [0, 1] on use
  Var<T> w_r, w_k, w_v, w_g, w_o;  // [d_model, d_model]
  Var<T> w_base;                   // [d_model]
  Var<T> a_w;                      // [d_model, decay_rank]
  Var<T> b_w;                      // [decay_rank, d_model]
  Var<T> u;                        // [d_model]
  Var<T> gn_gain, gn_bias;         // [d_model]

  std::int64_t head_dim() const { return d_model / n_heads; }
  static RwkvParams init(std::int64_t d_model, std::int64_t n_heads, std::int64_t decay_rank,
                         Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
  RecurrentState<T> zero_state(std::int64_t batch) const;
};

// chunk == 0 runs the frame-by-frame recurrence.
template <typename T>
RecurrentOutput<T> rwkv_forward(const RwkvParams<T>& p, const Var<T>& x,
                                const RecurrentState<T>& s0, std::int64_t chunk,
                                const Lengths& lengths = {});

template <typename T>
RecurrentOutput<T> rwkv_forward_seq(const RwkvParams<T>& p, const Var<T>& x,
                                    const RecurrentState<T>& s0, const Lengths& lengths = {}) {
  return rwkv_forward(p, x, s0, 0, lengths);
}

template <typename T>
RecurrentOutput<T> rwkv_forward_chunked(const RwkvParams<T>& p, const Var<T>& x,
                                        const RecurrentState<T>& s0, std::int64_t chunk,
                                        const Lengths& lengths = {}) {
  if (chunk < 1) throw Error("rwkv_forward_chunked: chunk must be >= 1");
  return rwkv_forward(p, x, s0, chunk, lengths);
}

// Realised per-channel decay exp(-exp(d_t)) for inspection, [batch, time, d].
template <typename T>
Tensor<T> rwkv_decay(const RwkvParams<T>& p, const Var<T>& x, const RecurrentState<T>& s0);

}  // namespace rala
