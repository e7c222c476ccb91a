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
#include <vector>

#include "rala/direction.hpp"
#include "rala/mha.hpp"

namespace rala {

// CTC blank label. Real labels are 1..vocab_size.
inline constexpr int kBlank = 0;

struct EncoderConfig {
  std::int64_t n_layers = 4;
  std::int64_t d_model = 64;
  std::int64_t n_heads = 4;
  std::int64_t d_ff = 128;
  std::int64_t conv_kernel = 15;
  std::int64_t d_in = 16;
  std::int64_t vocab_size = 32;
  std::int64_t subsample_factor = 4;  // only 4 is supported
  AttentionKind attention_kind = AttentionKind::kRwkv;
  bool bidirectional = true;
  bool causal_conv = false;
  // attention-specific knobs
  std::int64_t max_offset = 64;
  std::int64_t lca_left = 128;
  std::int64_t lca_right = 128;
  std::int64_t lca_n_global = 1;
  std::int64_t decay_rank = 8;
  std::int64_t mamba_head_dim = 16;
  std::int64_t mamba_state_dim = 16;
  std::int64_t scan_chunk = 0;  // 0: sequential recurrence

  void validate() const;
  std::int64_t output_length(std::int64_t frames) const;
  // Schedule used when none is given: all Bi, or all L2R for a
  // unidirectional recurrent model.
  LayerSchedule default_schedule() const;
};

template <typename T>
struct FeedForwardParams {
  Var<T> ln_gain, ln_bias, w1, b1, w2, b2;
};

template <typename T>
struct ConvModuleParams {
  Var<T> ln_gain, ln_bias;
  Var<T> pw1_w, pw1_b;  // [d, 2d]
  Var<T> dw_w, dw_b;    // [d, kernel]
  Var<T> norm_gain, norm_bias;
  Var<T> pw2_w, pw2_b;  // [d, d]
};

// The attention sublayer; which members are populated depends on kind.
template <typename T>
struct AttentionSublayer {
  AttentionKind kind = AttentionKind::kRwkv;
  MhaParams<T> mha;  // kMha and kLcaGt
  LcaConfig<T> lca;  // kLcaGt
  DirectionalLayer<T> dir;  // kRwkv and kMamba2
};

template <typename T>
struct ConformerBlockParams {
  FeedForwardParams<T> ff1;
  Var<T> attn_ln_gain, attn_ln_bias;
  AttentionSublayer<T> attn;
  ConvModuleParams<T> conv;
  FeedForwardParams<T> ff2;
  Var<T> out_ln_gain, out_ln_bias;

  static ConformerBlockParams init(const EncoderConfig& cfg, Rng& rng);
  // Attention parameters are named "<prefix>attn.*".
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct SubsampleParams {
  Var<T> dw1_w, dw1_b, pw1_w, pw1_b;  // d_in -> d_model
  Var<T> dw2_w, dw2_b, pw2_w, pw2_b;  // d_model -> d_model
};

template <typename T>
struct EncoderParams {
  EncoderConfig cfg;
  SubsampleParams<T> subsample;
  std::vector<ConformerBlockParams<T>> blocks;
  Var<T> ctc_w, ctc_b;  // [d_model, vocab+1], [vocab+1]

  static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);
  ParamList<T> params() const;
};

bool is_attention_param(const std::string& name);

template <typename T>
struct EncoderOutput {
  Var<T> hidden;  // [b, t', d_model]
  Lengths lengths;
};

// Two stride-2 depthwise-separable convs (kernel 3, left pad 1): t' = t / 4.
template <typename T>
EncoderOutput<T> subsample_forward(const SubsampleParams<T>& p, const Var<T>& x,
                                   const Lengths& lengths);

template <typename T>
Var<T> conformer_block_forward(const ConformerBlockParams<T>& p, const EncoderConfig& cfg,
                               const Var<T>& x, const Lengths& lengths, Direction mode);

// Runs the blocks with each attention sublayer in its scheduled mode.
template <typename T>
Var<T> scheduled_forward(const std::vector<ConformerBlockParams<T>>& blocks,
                         const EncoderConfig& cfg, const Var<T>& x, const Lengths& lengths,
                         const LayerSchedule& schedule);

template <typename T>
EncoderOutput<T> encoder_forward(const EncoderParams<T>& p, const Var<T>& features,
                                 const Lengths& lengths, const LayerSchedule& schedule);

// Log-probabilities over blank + vocab, [b, t', vocab+1].
template <typename T>
Var<T> ctc_logits(const EncoderParams<T>& p, const Var<T>& hidden);

// Per-frame argmax, collapse repeats, drop blanks.
template <typename T>
std::vector<std::vector<int>> ctc_greedy_decode(const Tensor<T>& log_probs,
                                                const Lengths& lengths = {});

}  // namespace rala
