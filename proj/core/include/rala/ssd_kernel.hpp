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

#include "rala/wkv_kernel.hpp"

namespace rala {

// Scalar-decay state-space scan, one decay per head, B/C shared by all heads:
//   a_t = exp(-delta_t * exp(a_log)),  H_t = a_t H_{t-1} + B_t (delta_t x_t)^T,
//   y_t = H_t^T C_t.
// x: [batch, time, heads*hd]; delta: [batch, time, heads] (positive);
// a_log: [heads]; b, c: [batch, time, n]; h0: [batch, heads, n, hd].
// chunk == 0 is the frame-by-frame recurrence, chunk >= 1 the chunkwise form.
// Frames past a sequence's length give zeros and leave the state untouched.
template <typename T>
ScanResult<T> ssd_scan(const Var<T>& x, const Var<T>& delta, const Var<T>& a_log, const Var<T>& b,
                       const Var<T>& c, const Var<T>& h0, std::int64_t chunk = 0,
                       const Lengths& lengths = {});

}  // namespace rala
