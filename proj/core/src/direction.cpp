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

#include "rala/direction.hpp"

#include <algorithm>
#include <charconv>

namespace rala {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::kL2R: return "l2r";
    case Direction::kR2L: return "r2l";
    case Direction::kBi: return "bi";
  }
  return "?";
}

template <typename T>
RecurrentParams<T> RecurrentParams<T>::init(AttentionKind kind, const Dims& dims, Rng& rng) {
  RecurrentParams p;
  p.kind = kind;
  if (kind == AttentionKind::kRwkv) {
    p.rwkv = RwkvParams<T>::init(dims.d_model, dims.n_heads, dims.decay_rank, rng);
  } else if (kind == AttentionKind::kMamba2) {
    const std::int64_t heads = dims.d_model / dims.mamba_head_dim;
    if (heads < 1 || heads * dims.mamba_head_dim != dims.d_model) {
      throw ShapeError("Mamba2: d_model " + std::to_string(dims.d_model) +
                       " not divisible by head_dim " + std::to_string(dims.mamba_head_dim));
    }
    p.mamba = Mamba2Params<T>::init(dims.d_model, heads, dims.mamba_head_dim,
                                    dims.mamba_state_dim, rng);
  } else {
    throw Error("recurrent layer requested for non-recurrent kind " + to_string(kind));
  }
  return p;
}

template <typename T>
void RecurrentParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  if (kind == AttentionKind::kRwkv) {
    rwkv.collect(out, prefix);
  } else {
    mamba.collect(out, prefix);
  }
}

template <typename T>
Var<T> RecurrentParams<T>::forward(const Var<T>& x, std::int64_t chunk,
                                   const Lengths& lengths) const {
  const std::int64_t b = x.dim(0);
  if (kind == AttentionKind::kRwkv) {
    return rwkv_forward(rwkv, x, rwkv.zero_state(b), chunk, lengths).y;
  }
  return mamba2_forward(mamba, x, mamba.zero_state(b), chunk, lengths).y;
}

template <typename T>
DirectionalLayer<T> DirectionalLayer<T>::init(AttentionKind kind,
                                              const typename RecurrentParams<T>::Dims& dims,
                                              bool bidirectional, Rng& rng) {
  DirectionalLayer l;
  l.fwd = RecurrentParams<T>::init(kind, dims, rng);
  if (bidirectional) l.bwd = RecurrentParams<T>::init(kind, dims, rng);
  return l;
}

template <typename T>
void DirectionalLayer<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  fwd.collect(out, prefix + "fwd.");
  if (bwd) bwd->collect(out, prefix + "bwd.");
}

template <typename T>
Var<T> bidir_forward(const DirectionalLayer<T>& l, const Var<T>& x, Direction mode,
                     const Lengths& lengths, std::int64_t chunk) {
  if (mode != Direction::kL2R && !l.bidirectional()) {
    throw Error("direction " + to_string(mode) + " requested on a unidirectional layer");
  }
  const Lengths lens = resolve_lengths(lengths, x.shape());
  auto backward_pass = [&] {
    return reverse_time(l.bwd->forward(reverse_time(x, lens), chunk, lens), lens);
  };
  switch (mode) {
    case Direction::kL2R:
      return l.fwd.forward(x, chunk, lens);
    case Direction::kR2L:
      return backward_pass();
    case Direction::kBi:
      return scale(add(l.fwd.forward(x, chunk, lens), backward_pass()), T(0.5));
  }
  throw Error("bad direction");
}

std::string to_string(DirDropVariant v) {
  switch (v) {
    case DirDropVariant::kOff: return "off";
    case DirDropVariant::kR2L: return "r2l";
    case DirDropVariant::kBoth: return "both";
  }
  return "?";
}

DirDropVariant parse_dirdrop_variant(const std::string& name) {
  if (name == "off" || name == "none") return DirDropVariant::kOff;
  if (name == "r2l") return DirDropVariant::kR2L;
  if (name == "both") return DirDropVariant::kBoth;
  throw Error("unknown dirdrop variant '" + name + "' (expected off, r2l, both)");
}

LayerSchedule LayerSchedule::all(std::size_t n, Direction d) {
  return LayerSchedule{std::vector<Direction>(n, d)};
}

LayerSchedule LayerSchedule::alternating(std::size_t n) {
  LayerSchedule s;
  for (std::size_t i = 0; i < n; ++i) s.modes.push_back(i % 2 == 0 ? Direction::kL2R : Direction::kR2L);
  return s;
}

LayerSchedule LayerSchedule::first_bi(LayerSchedule base, std::size_t k) {
  k = std::min(k, base.size());
  for (std::size_t i = 0; i < k; ++i) base.modes[i] = Direction::kBi;
  return base;
}

LayerSchedule LayerSchedule::last_bi(LayerSchedule base, std::size_t k) {
  k = std::min(k, base.size());
  for (std::size_t i = base.size() - k; i < base.size(); ++i) base.modes[i] = Direction::kBi;
  return base;
}

LayerSchedule LayerSchedule::parse(const std::string& spec, std::size_t n_layers) {
  if (spec == "l2r") return all(n_layers, Direction::kL2R);
  if (spec == "r2l") return all(n_layers, Direction::kR2L);
  if (spec == "bi") return all(n_layers, Direction::kBi);
  if (spec == "alt") return alternating(n_layers);
  const bool first = spec.rfind("first_bi:", 0) == 0;
  const bool last = spec.rfind("last_bi:", 0) == 0;
  if (first || last) {
    std::string rest = spec.substr(first ? 9 : 8);
    std::string base_name = "l2r";
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      base_name = rest.substr(colon + 1);
      rest = rest.substr(0, colon);
    }
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec != std::errc() || ptr != rest.data() + rest.size() || rest.empty()) {
      throw Error("bad layer count in schedule '" + spec + "'");
    }
    LayerSchedule base;
    if (base_name == "l2r") {
      base = all(n_layers, Direction::kL2R);
    } else if (base_name == "alt") {
      base = alternating(n_layers);
    } else {
      throw Error("schedule base must be l2r or alt, got '" + base_name + "'");
    }
    return first ? first_bi(std::move(base), k) : last_bi(std::move(base), k);
  }
  throw Error("unknown schedule '" + spec + "' (expected l2r, r2l, bi, alt, first_bi:K, last_bi:K)");
}

std::string LayerSchedule::to_string() const {
  std::string s;
  for (Direction d : modes) s += d == Direction::kL2R ? 'F' : d == Direction::kR2L ? 'R' : 'B';
  return s;
}

namespace {

double unit_draw(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

LayerSchedule dirdrop_sample(const DirDropPolicy& policy, std::size_t n_layers, Rng& rng) {
  if (!(policy.p >= 0.0 && policy.p <= 1.0)) throw Error("dirdrop p must be in [0, 1]");
  LayerSchedule s = LayerSchedule::all(n_layers, Direction::kBi);
  if (policy.variant == DirDropVariant::kOff) return s;
  for (auto& m : s.modes) {
    if (unit_draw(rng) >= policy.p) continue;
    if (policy.variant == DirDropVariant::kR2L) {
      m = Direction::kL2R;
    } else {
      m = (rng() >> 63) == 0 ? Direction::kL2R : Direction::kR2L;
    }
  }
  return s;
}

template struct RecurrentParams<float>;
template struct RecurrentParams<double>;
template struct DirectionalLayer<float>;
template struct DirectionalLayer<double>;
template Var<float> bidir_forward(const DirectionalLayer<float>&, const Var<float>&, Direction,
                                  const Lengths&, std::int64_t);
template Var<double> bidir_forward(const DirectionalLayer<double>&, const Var<double>&, Direction,
                                   const Lengths&, std::int64_t);

}  // namespace rala
