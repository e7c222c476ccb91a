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

#include "rala/encoder.hpp"

#include <cmath>

namespace rala {

void EncoderConfig::validate() const {
  auto positive = [](std::int64_t v, const char* name) {
    if (v < 1) throw Error(std::string("encoder config: ") + name + " must be >= 1");
  };
  positive(n_layers, "n_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(conv_kernel, "conv_kernel");
  positive(d_in, "d_in");
  positive(vocab_size, "vocab_size");
  if (subsample_factor != 4) throw Error("encoder config: subsample_factor must be 4");
  if (d_model % n_heads != 0) throw Error("encoder config: d_model not divisible by n_heads");
  if (!causal_conv && conv_kernel % 2 == 0) {
    throw Error("encoder config: symmetric conv needs an odd kernel");
  }
  if (attention_kind == AttentionKind::kMamba2 && d_model % mamba_head_dim != 0) {
    throw Error("encoder config: d_model not divisible by mamba_head_dim");
  }
  if (scan_chunk < 0) throw Error("encoder config: scan_chunk must be >= 0");
}

std::int64_t EncoderConfig::output_length(std::int64_t frames) const { return frames / 4; }

LayerSchedule EncoderConfig::default_schedule() const {
  const auto n = static_cast<std::size_t>(n_layers);
  if (is_recurrent(attention_kind) && !bidirectional) return LayerSchedule::all(n, Direction::kL2R);
  return LayerSchedule::all(n, Direction::kBi);
}

namespace {

template <typename T>
Var<T> param(Tensor<T> t) {
  return Var<T>::parameter(std::move(t));
}

template <typename T>
FeedForwardParams<T> init_ff(std::int64_t d, std::int64_t d_ff, Rng& rng) {
  return {param(ones<T>({d})),         param(zeros<T>({d})),
          param(glorot<T>(d, d_ff, rng)), param(zeros<T>({d_ff})),
          param(glorot<T>(d_ff, d, rng)), param(zeros<T>({d}))};
}

template <typename T>
void collect_ff(const FeedForwardParams<T>& f, ParamList<T>& out, const std::string& prefix) {
  out.push_back({prefix + "ln_gain", f.ln_gain});
  out.push_back({prefix + "ln_bias", f.ln_bias});
  out.push_back({prefix + "w1", f.w1});
  out.push_back({prefix + "b1", f.b1});
  out.push_back({prefix + "w2", f.w2});
  out.push_back({prefix + "b2", f.b2});
}

template <typename T>
Var<T> dw_init(std::int64_t channels, std::int64_t width, Rng& rng) {
  const T b = static_cast<T>(1.0 / std::sqrt(static_cast<double>(width)));
  return param(uniform_tensor<T>({channels, width}, -b, b, rng));
}

template <typename T>
Var<T> feed_forward(const FeedForwardParams<T>& f, const Var<T>& x) {
  Var<T> h = layer_norm(x, f.ln_gain, f.ln_bias);
  return linear(silu(linear(h, f.w1, f.b1)), f.w2, f.b2);
}

template <typename T>
Var<T> attention(const AttentionSublayer<T>& a, const EncoderConfig& cfg, const Var<T>& x,
                 const Lengths& lengths, Direction mode) {
  switch (a.kind) {
    case AttentionKind::kMha:
    case AttentionKind::kLcaGt:
      if (mode != Direction::kBi) {
        throw Error("schedule mode " + to_string(mode) + " is not available for " +
                    to_string(a.kind) + " attention (full context only)");
      }
      return a.kind == AttentionKind::kMha ? mha_forward(a.mha, x, false, lengths)
                                           : lca_gt_forward(a.mha, a.lca, x, lengths);
    case AttentionKind::kRwkv:
    case AttentionKind::kMamba2:
      return bidir_forward(a.dir, x, mode, lengths, cfg.scan_chunk);
  }
  throw Error("bad attention kind");
}

template <typename T>
Var<T> conv_module(const ConvModuleParams<T>& c, const EncoderConfig& cfg, const Var<T>& x,
                   const Lengths& lengths) {
  Var<T> h = layer_norm(x, c.ln_gain, c.ln_bias);
  h = mask_time(glu_lastdim(linear(h, c.pw1_w, c.pw1_b)), lengths);
  const std::int64_t k = cfg.conv_kernel;
  const std::int64_t left = cfg.causal_conv ? k - 1 : (k - 1) / 2;
  const std::int64_t right = cfg.causal_conv ? 0 : (k - 1) / 2;
  h = depthwise_conv1d(h, c.dw_w, c.dw_b, 1, left, right);
  h = silu(layer_norm(h, c.norm_gain, c.norm_bias));
  return linear(h, c.pw2_w, c.pw2_b);
}

}  // namespace

template <typename T>
ConformerBlockParams<T> ConformerBlockParams<T>::init(const EncoderConfig& cfg, Rng& rng) {
  const std::int64_t d = cfg.d_model;
  ConformerBlockParams b;
  b.ff1 = init_ff<T>(d, cfg.d_ff, rng);
  b.attn_ln_gain = param(ones<T>({d}));
  b.attn_ln_bias = param(zeros<T>({d}));
  b.attn.kind = cfg.attention_kind;
  switch (cfg.attention_kind) {
    case AttentionKind::kMha:
      b.attn.mha = MhaParams<T>::init(d, cfg.n_heads, cfg.max_offset, rng);
      break;
    case AttentionKind::kLcaGt:
      b.attn.mha = MhaParams<T>::init(d, cfg.n_heads, cfg.max_offset, rng);
      b.attn.lca = LcaConfig<T>::init(cfg.lca_left, cfg.lca_right, cfg.lca_n_global, d, rng);
      break;
    case AttentionKind::kRwkv:
    case AttentionKind::kMamba2: {
      typename RecurrentParams<T>::Dims dims;
      dims.d_model = d;
      dims.n_heads = cfg.n_heads;
      dims.decay_rank = cfg.decay_rank;
      dims.mamba_head_dim = cfg.mamba_head_dim;
      dims.mamba_state_dim = cfg.mamba_state_dim;
      b.attn.dir = DirectionalLayer<T>::init(cfg.attention_kind, dims, cfg.bidirectional, rng);
      break;
    }
  }
  ConvModuleParams<T>& c = b.conv;
  c.ln_gain = param(ones<T>({d}));
  c.ln_bias = param(zeros<T>({d}));
  c.pw1_w = param(glorot<T>(d, 2 * d, rng));
  c.pw1_b = param(zeros<T>({2 * d}));
  c.dw_w = dw_init<T>(d, cfg.conv_kernel, rng);
  c.dw_b = param(zeros<T>({d}));
  c.norm_gain = param(ones<T>({d}));
  c.norm_bias = param(zeros<T>({d}));
  c.pw2_w = param(glorot<T>(d, d, rng));
  c.pw2_b = param(zeros<T>({d}));
  b.ff2 = init_ff<T>(d, cfg.d_ff, rng);
  b.out_ln_gain = param(ones<T>({d}));
  b.out_ln_bias = param(zeros<T>({d}));
  return b;
}

template <typename T>
void ConformerBlockParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  collect_ff(ff1, out, prefix + "ff1.");
  out.push_back({prefix + "attn_norm.gain", attn_ln_gain});
  out.push_back({prefix + "attn_norm.bias", attn_ln_bias});
  switch (attn.kind) {
    case AttentionKind::kMha:
      attn.mha.collect(out, prefix + "attn.");
      break;
    case AttentionKind::kLcaGt:
      attn.mha.collect(out, prefix + "attn.");
      attn.lca.collect(out, prefix + "attn.");
      break;
    case AttentionKind::kRwkv:
    case AttentionKind::kMamba2:
      attn.dir.collect(out, prefix + "attn.");
      break;
  }
  const std::string cp = prefix + "conv.";
  out.push_back({cp + "ln_gain", conv.ln_gain});
  out.push_back({cp + "ln_bias", conv.ln_bias});
  out.push_back({cp + "pw1_w", conv.pw1_w});
  out.push_back({cp + "pw1_b", conv.pw1_b});
  out.push_back({cp + "dw_w", conv.dw_w});
  out.push_back({cp + "dw_b", conv.dw_b});
  out.push_back({cp + "norm_gain", conv.norm_gain});
  out.push_back({cp + "norm_bias", conv.norm_bias});
  out.push_back({cp + "pw2_w", conv.pw2_w});
  out.push_back({cp + "pw2_b", conv.pw2_b});
  collect_ff(ff2, out, prefix + "ff2.");
  out.push_back({prefix + "out_norm.gain", out_ln_gain});
  out.push_back({prefix + "out_norm.bias", out_ln_bias});
}

template <typename T>
EncoderParams<T> EncoderParams<T>::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  EncoderParams p;
  p.cfg = cfg;
  const std::int64_t d = cfg.d_model, di = cfg.d_in;
  SubsampleParams<T>& s = p.subsample;
  s.dw1_w = dw_init<T>(di, 3, rng);
  s.dw1_b = param(zeros<T>({di}));
  s.pw1_w = param(glorot<T>(di, d, rng));
  s.pw1_b = param(zeros<T>({d}));
  s.dw2_w = dw_init<T>(d, 3, rng);
  s.dw2_b = param(zeros<T>({d}));
  s.pw2_w = param(glorot<T>(d, d, rng));
  s.pw2_b = param(zeros<T>({d}));
  for (std::int64_t i = 0; i < cfg.n_layers; ++i) {
    p.blocks.push_back(ConformerBlockParams<T>::init(cfg, rng));
  }
  p.ctc_w = param(glorot<T>(d, cfg.vocab_size + 1, rng));
  p.ctc_b = param(zeros<T>({cfg.vocab_size + 1}));
  return p;
}

template <typename T>
ParamList<T> EncoderParams<T>::params() const {
  ParamList<T> out;
  out.push_back({"subsample.dw1_w", subsample.dw1_w});
  out.push_back({"subsample.dw1_b", subsample.dw1_b});
  out.push_back({"subsample.pw1_w", subsample.pw1_w});
  out.push_back({"subsample.pw1_b", subsample.pw1_b});
  out.push_back({"subsample.dw2_w", subsample.dw2_w});
  out.push_back({"subsample.dw2_b", subsample.dw2_b});
  out.push_back({"subsample.pw2_w", subsample.pw2_w});
  out.push_back({"subsample.pw2_b", subsample.pw2_b});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(out, "blocks." + std::to_string(i) + ".");
  }
  out.push_back({"ctc.w", ctc_w});
  out.push_back({"ctc.b", ctc_b});
  return out;
}

bool is_attention_param(const std::string& name) {
  return name.find(".attn.") != std::string::npos;
}

template <typename T>
EncoderOutput<T> subsample_forward(const SubsampleParams<T>& p, const Var<T>& x,
                                   const Lengths& lengths) {
  if (x.shape().size() != 3) throw ShapeError("features must be [batch, time, d_in]");
  if (x.dim(1) < 4) {
    throw Error("input of " + std::to_string(x.dim(1)) + " frames is shorter than the subsample factor 4");
  }
  Lengths lens = resolve_lengths(lengths, x.shape());
  for (auto& l : lens) {
    if (l < 4) throw Error("sequence of " + std::to_string(l) + " frames is shorter than the subsample factor 4");
    l /= 2;
  }
  Var<T> h = depthwise_conv1d(x, p.dw1_w, p.dw1_b, 2, 1, 0);
  h = mask_time(silu(linear(h, p.pw1_w, p.pw1_b)), lens);
  for (auto& l : lens) l /= 2;
  h = depthwise_conv1d(h, p.dw2_w, p.dw2_b, 2, 1, 0);
  h = mask_time(silu(linear(h, p.pw2_w, p.pw2_b)), lens);
  return {h, lens};
}

template <typename T>
Var<T> conformer_block_forward(const ConformerBlockParams<T>& p, const EncoderConfig& cfg,
                               const Var<T>& x, const Lengths& lengths, Direction mode) {
  Var<T> h = add(x, scale(feed_forward(p.ff1, x), T(0.5)));
  h = add(h, attention(p.attn, cfg, layer_norm(h, p.attn_ln_gain, p.attn_ln_bias), lengths, mode));
  h = add(h, conv_module(p.conv, cfg, h, lengths));
  h = add(h, scale(feed_forward(p.ff2, h), T(0.5)));
  return mask_time(layer_norm(h, p.out_ln_gain, p.out_ln_bias), lengths);
}

template <typename T>
Var<T> scheduled_forward(const std::vector<ConformerBlockParams<T>>& blocks,
                         const EncoderConfig& cfg, const Var<T>& x, const Lengths& lengths,
                         const LayerSchedule& schedule) {
  if (schedule.size() != blocks.size()) {
    throw Error("schedule has " + std::to_string(schedule.size()) + " layers, model has " +
                std::to_string(blocks.size()));
  }
  Var<T> h = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    h = conformer_block_forward(blocks[i], cfg, h, lengths, schedule.modes[i]);
  }
  return h;
}

template <typename T>
EncoderOutput<T> encoder_forward(const EncoderParams<T>& p, const Var<T>& features,
                                 const Lengths& lengths, const LayerSchedule& schedule) {
  if (features.shape().size() != 3 || features.dim(2) != p.cfg.d_in) {
    throw ShapeError("features " + shape_str(features.shape()) + " do not match d_in " +
                     std::to_string(p.cfg.d_in));
  }
  EncoderOutput<T> sub = subsample_forward(p.subsample, features, lengths);
  sub.hidden = scheduled_forward(p.blocks, p.cfg, sub.hidden, sub.lengths, schedule);
  return sub;
}

template <typename T>
Var<T> ctc_logits(const EncoderParams<T>& p, const Var<T>& hidden) {
  return log_softmax_lastdim(linear(hidden, p.ctc_w, p.ctc_b));
}

template <typename T>
std::vector<std::vector<int>> ctc_greedy_decode(const Tensor<T>& log_probs, const Lengths& lengths) {
  if (log_probs.rank() != 3) throw ShapeError("ctc_greedy_decode expects [batch, time, classes]");
  const std::int64_t b = log_probs.dim(0), t = log_probs.dim(1), v = log_probs.dim(2);
  const Lengths lens = resolve_lengths(lengths, log_probs.shape());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    int prev = kBlank;
    for (std::int64_t s = 0; s < lens[static_cast<std::size_t>(i)]; ++s) {
      const T* row = log_probs.ptr() + (i * t + s) * v;
      int best = 0;
      for (std::int64_t c = 1; c < v; ++c) {
        if (row[c] > row[best]) best = static_cast<int>(c);
      }
      if (best != kBlank && best != prev) out[static_cast<std::size_t>(i)].push_back(best);
      prev = best;
    }
  }
  return out;
}

#define RALA_INSTANTIATE_ENCODER(T)                                                             \
  template struct ConformerBlockParams<T>;                                                      \
  template struct EncoderParams<T>;                                                             \
  template EncoderOutput<T> subsample_forward(const SubsampleParams<T>&, const Var<T>&,         \
                                              const Lengths&);                                  \
  template Var<T> conformer_block_forward(const ConformerBlockParams<T>&, const EncoderConfig&, \
                                          const Var<T>&, const Lengths&, Direction);            \
  template Var<T> scheduled_forward(const std::vector<ConformerBlockParams<T>>&,                \
                                    const EncoderConfig&, const Var<T>&, const Lengths&,        \
                                    const LayerSchedule&);                                      \
  template EncoderOutput<T> encoder_forward(const EncoderParams<T>&, const Var<T>&,             \
                                            const Lengths&, const LayerSchedule&);              \
  template Var<T> ctc_logits(const EncoderParams<T>&, const Var<T>&);                           \
  template std::vector<std::vector<int>> ctc_greedy_decode(const Tensor<T>&, const Lengths&);

RALA_INSTANTIATE_ENCODER(float)
RALA_INSTANTIATE_ENCODER(double)

}  // namespace rala
