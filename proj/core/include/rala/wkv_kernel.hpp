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

template <typename T>
struct ScanResult {
  Var<T> y;
  Var<T> state;
};

// RWKV-6 style linear recurrence per head (channel vectors of size hd):
//   y_t = (S_{t-1} + diag(u) k_t v_t^T)^T r_t
//   S_t = diag(exp(log_w_t)) S_{t-1} + k_t v_t^T
// r, k, v, log_w: [batch, time, d]; u: [d]; s0: [batch, heads, hd, hd] with
// S[i][j] indexed (key channel, value channel). chunk == 0 runs the
// frame-by-frame recurrence; chunk >= 1 runs the chunkwise form (intra-chunk
// decay-weighted scores plus inter-chunk state carry). Both paths share one
// backward. Frames past a sequence's length produce zeros and leave the
// state untouched. Internal accumulation is in double precision.
template <typename T>
ScanResult<T> wkv_scan(const Var<T>& r, const Var<T>& k, const Var<T>& v, const Var<T>& log_w,
                       const Var<T>& u, const Var<T>& s0, std::int64_t n_heads,
                       std::int64_t chunk = 0, const Lengths& lengths = {});

}  // namespace rala
