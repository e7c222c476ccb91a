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

#include "rala/attention_kernel.hpp"
#include "rala/random.hpp"

namespace rala {

enum class AttentionKind { kMha, kLcaGt, kRwkv, kMamba2 };

std::string to_string(AttentionKind kind);
// Accepts mha, lca, lca_gt, rwkv, mamba2.
AttentionKind parse_attention_kind(const std::string& name);
inline bool is_recurrent(AttentionKind k) {
  return k == AttentionKind::kRwkv || k == AttentionKind::kMamba2;
}

// Full-context multi-head attention parameters. Projections are
// [d_model, d_model] without biases; rel_bias holds one scalar per head per
// clipped signed offset in [-max_offset, max_offset].
template <typename T>
struct MhaParams {
  std::int64_t d_model = 0;
  std::int64_t n_heads = 0;
  std::int64_t max_offset = 64;
  Var<T> w_q, w_k, w_v, w_o;
  Var<T> rel_bias;

  static MhaParams init(std::int64_t d_model, std::int64_t n_heads, std::int64_t max_offset,
                        Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Limited-context attention with global tokens. Windows clip at sequence
// boundaries; n_global == 0 is plain sliding-window attention.
template <typename T>
struct LcaConfig {
  std::int64_t left_window = 128;
  std::int64_t right_window = 128;
  std::int64_t n_global = 1;
  Var<T> global_embed;  // [n_global, d_model]; undefined when n_global == 0

  static LcaConfig init(std::int64_t left, std::int64_t right, std::int64_t n_global,
                        std::int64_t d_model, Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
Var<T> mha_forward(const MhaParams<T>& p, const Var<T>& x, bool causal, const Lengths& lengths = {});

// Global tokens are prepended as virtual frames, attend to every frame, and
// are dropped from the returned sequence.
template <typename T>
Var<T> lca_gt_forward(const MhaParams<T>& p, const LcaConfig<T>& c, const Var<T>& x,
                      const Lengths& lengths = {});

struct FlopsConfig {
  std::int64_t d_model = 64;
  std::int64_t n_heads = 4;
  std::int64_t left_window = 128;
  std::int64_t right_window = 128;
  std::int64_t n_global = 1;
  std::int64_t state_dim = 16;
};

// Multiply-accumulate count of the score/value part of one attention call
// over t frames (projections excluded).
std::int64_t attention_flops(AttentionKind kind, std::int64_t t, const FlopsConfig& cfg);

}  // namespace rala
