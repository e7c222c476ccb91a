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

#include "rala/ops.hpp"

namespace rala {

// Which (query, key) pairs a fused attention call may score. The first
// `n_global` frames of the sequence are global tokens: they see every valid
// frame and every frame sees them. Regular frames see the window
// [i - left, i + right] (negative = unbounded), further cut by `causal`.
struct AttentionPattern {
  std::int64_t n_global = 0;
  std::int64_t left = -1;
  std::int64_t right = -1;
  bool causal = false;
  // Relative offsets are clipped to [-max_offset, max_offset] for the bias.
  std::int64_t max_offset = 64;
};

// Scaled dot-product attention with an additive clipped relative bias,
// computed row by row (no t x t buffer). q, k, v are [batch, n_global + t, d]
// with heads in contiguous channel blocks; rel_bias is
// [n_heads, 2 * max_offset + 1]. `lengths` counts regular frames only.
// Outputs for padded rows are zero.
template <typename T>
Var<T> attention_core(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Var<T>& rel_bias,
                      std::int64_t n_heads, const AttentionPattern& pattern,
                      const Lengths& lengths = {});

// Dense attention probabilities [batch, n_heads, t_ext, t_ext] for
// inspection in tests. Disallowed entries are exactly zero.
template <typename T>
Tensor<T> attention_probs(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& rel_bias,
                          std::int64_t n_heads, const AttentionPattern& pattern,
                          const Lengths& lengths = {});

}  // namespace rala
