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

#include "rala/mha.hpp"

#include <algorithm>

namespace rala {

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kMha: return "mha";
    case AttentionKind::kLcaGt: return "lca";
    case AttentionKind::kRwkv: return "rwkv";
    case AttentionKind::kMamba2: return "mamba2";
  }
  return "?";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "mha") return AttentionKind::kMha;
  if (name == "lca" || name == "lca_gt") return AttentionKind::kLcaGt;
  if (name == "rwkv") return AttentionKind::kRwkv;
  if (name == "mamba2" || name == "mamba") return AttentionKind::kMamba2;
  throw Error("unknown attention kind '" + name + "'");
}

template <typename T>
MhaParams<T> MhaParams<T>::init(std::int64_t d_model, std::int64_t n_heads,
                                std::int64_t max_offset, Rng& rng) {
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw ShapeError("MHA: d_model " + std::to_string(d_model) + " not divisible by " +
                     std::to_string(n_heads) + " heads");
  }
  MhaParams p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.max_offset = max_offset;
  p.w_q = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_k = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_v = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.w_o = Var<T>::parameter(glorot<T>(d_model, d_model, rng));
  p.rel_bias = Var<T>::parameter(Tensor<T>(Shape{n_heads, 2 * max_offset + 1}));
  return p;
}

template <typename T>
void MhaParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + "w_q", w_q});
  out.push_back({prefix + "w_k", w_k});
  out.push_back({prefix + "w_v", w_v});
  out.push_back({prefix + "w_o", w_o});
  out.push_back({prefix + "rel_bias", rel_bias});
}

template <typename T>
LcaConfig<T> LcaConfig<T>::init(std::int64_t left, std::int64_t right, std::int64_t n_global,
                                std::int64_t d_model, Rng& rng) {
  if (left < 0 || right < 0 || n_global < 0) throw Error("LCA: windows and n_global must be >= 0");
  LcaConfig c;
  c.left_window = left;
  c.right_window = right;
  c.n_global = n_global;
  if (n_global > 0) {
    c.global_embed = Var<T>::parameter(normal_tensor<T>(Shape{n_global, d_model}, T(0.5), rng));
  }
  return c;
}

template <typename T>
void LcaConfig<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  if (n_global > 0) out.push_back({prefix + "global_embed", global_embed});
}

namespace {

template <typename T>
void check_input(const MhaParams<T>& p, const Var<T>& x) {
  if (x.shape().size() != 3 || x.shape()[2] != p.d_model) {
    throw ShapeError("attention input " + shape_str(x.shape()) + " does not match d_model " +
                     std::to_string(p.d_model));
  }
}

}  // namespace

template <typename T>
Var<T> mha_forward(const MhaParams<T>& p, const Var<T>& x, bool causal, const Lengths& lengths) {
  check_input(p, x);
  AttentionPattern pat;
  pat.causal = causal;
  pat.max_offset = p.max_offset;
  Var<T> q = linear(x, p.w_q);
  Var<T> k = linear(x, p.w_k);
  Var<T> v = linear(x, p.w_v);
  Var<T> y = attention_core(q, k, v, p.rel_bias, p.n_heads, pat, lengths);
  return linear(y, p.w_o);
}

template <typename T>
Var<T> lca_gt_forward(const MhaParams<T>& p, const LcaConfig<T>& c, const Var<T>& x,
                      const Lengths& lengths) {
  check_input(p, x);
  AttentionPattern pat;
  pat.n_global = c.n_global;
  pat.left = c.left_window;
  pat.right = c.right_window;
  pat.max_offset = p.max_offset;
  const std::int64_t b = x.dim(0), t = x.dim(1);
  Var<T> ext = x;
  if (c.n_global > 0) {
    Var<T> g = broadcast_to(c.global_embed, Shape{b, c.n_global, p.d_model});
    ext = concat<T>({g, x}, 1);
  }
  Var<T> q = linear(ext, p.w_q);
  Var<T> k = linear(ext, p.w_k);
  Var<T> v = linear(ext, p.w_v);
  Var<T> y = attention_core(q, k, v, p.rel_bias, p.n_heads, pat, lengths);
  if (c.n_global > 0) y = slice(y, 1, c.n_global, c.n_global + t);
  return linear(y, p.w_o);
}

std::int64_t attention_flops(AttentionKind kind, std::int64_t t, const FlopsConfig& cfg) {
  if (t < 1) throw Error("attention_flops: t must be >= 1");
  const std::int64_t d = cfg.d_model;
  const std::int64_t hd = d / cfg.n_heads;
  switch (kind) {
    case AttentionKind::kMha:
      return 2 * t * t * d;
    case AttentionKind::kLcaGt: {
      const std::int64_t g = cfg.n_global;
      std::int64_t pairs = g * (g + t);  // global rows
      for (std::int64_t i = 0; i < t; ++i) {
        const std::int64_t lo = std::max<std::int64_t>(0, i - cfg.left_window);
        const std::int64_t hi = std::min<std::int64_t>(t - 1, i + cfg.right_window);
        pairs += g + (hi - lo + 1);
      }
      return 2 * pairs * d;
    }
    case AttentionKind::kRwkv:
      // readout S^T r, bonus term, and state update per head
      return t * cfg.n_heads * (2 * hd * hd + 2 * hd);
    case AttentionKind::kMamba2:
      return t * cfg.n_heads * (2 * cfg.state_dim * hd) + t * cfg.state_dim;
  }
  return 0;
}

template struct MhaParams<float>;
template struct MhaParams<double>;
template struct LcaConfig<float>;
template struct LcaConfig<double>;
template Var<float> mha_forward(const MhaParams<float>&, const Var<float>&, bool, const Lengths&);
template Var<double> mha_forward(const MhaParams<double>&, const Var<double>&, bool,
                                 const Lengths&);
template Var<float> lca_gt_forward(const MhaParams<float>&, const LcaConfig<float>&,
                                   const Var<float>&, const Lengths&);
template Var<double> lca_gt_forward(const MhaParams<double>&, const LcaConfig<double>&,
                                    const Var<double>&, const Lengths&);

}  // namespace rala
