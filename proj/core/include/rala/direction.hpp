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
#include <optional>
#include <string>
#include <vector>

#include "rala/mamba2.hpp"
#include "rala/mha.hpp"
#include "rala/rwkv.hpp"

namespace rala {

enum class Direction { kL2R, kR2L, kBi };

std::string to_string(Direction d);

// Parameters of one recurrent time-mixing layer of either kind.
template <typename T>
struct RecurrentParams {
  AttentionKind kind = AttentionKind::kRwkv;
  RwkvParams<T> rwkv;
  Mamba2Params<T> mamba;

  struct Dims {
    std::int64_t d_model = 64;
    std::int64_t n_heads = 4;
    std::int64_t decay_rank = 8;
    std::int64_t mamba_head_dim = 16;
    std::int64_t mamba_state_dim = 16;
  };
  static RecurrentParams init(AttentionKind kind, const Dims& dims, Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
  // Output of the layer from a zero state; chunk == 0 is the sequential path.
  Var<T> forward(const Var<T>& x, std::int64_t chunk, const Lengths& lengths) const;
};

template <typename T>
struct DirectionalLayer {
  RecurrentParams<T> fwd;
  std::optional<RecurrentParams<T>> bwd;

  AttentionKind kind() const { return fwd.kind; }
  bool bidirectional() const { return bwd.has_value(); }
  static DirectionalLayer init(AttentionKind kind, const typename RecurrentParams<T>::Dims& dims,
                               bool bidirectional, Rng& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// L2R: fwd(x). R2L: rev(bwd(rev(x))). Bi: the average of both. Reversal
// flips only each sequence's valid region.
template <typename T>
Var<T> bidir_forward(const DirectionalLayer<T>& l, const Var<T>& x, Direction mode,
                     const Lengths& lengths = {}, std::int64_t chunk = 0);

enum class DirDropVariant { kOff, kR2L, kBoth };

std::string to_string(DirDropVariant v);
DirDropVariant parse_dirdrop_variant(const std::string& name);  // off, r2l, both

struct DirDropPolicy {
  DirDropVariant variant = DirDropVariant::kOff;
  double p = 0.2;
};

struct LayerSchedule {
  std::vector<Direction> modes;

  std::size_t size() const { return modes.size(); }
  bool operator==(const LayerSchedule&) const = default;

  static LayerSchedule all(std::size_t n, Direction d);
  // Even layers L2R, odd layers R2L.
  static LayerSchedule alternating(std::size_t n);
  // Forces the first / last k layers of `base` to Bi (k clipped to the depth).
  static LayerSchedule first_bi(LayerSchedule base, std::size_t k);
  static LayerSchedule last_bi(LayerSchedule base, std::size_t k);

  // l2r | r2l | bi | alt | first_bi:K | last_bi:K, optionally suffixed with
  // :l2r or :alt to pick the base of first_bi / last_bi (default l2r).
  static LayerSchedule parse(const std::string& spec, std::size_t n_layers);
  std::string to_string() const;  // one letter per layer: F, R, B
};

// Per layer: Bi with probability 1-p, otherwise the surviving direction
// (L2R for variant R2L, a fair coin for Both). Variant Off gives all Bi.
LayerSchedule dirdrop_sample(const DirDropPolicy& policy, std::size_t n_layers, Rng& rng);

}  // namespace rala
