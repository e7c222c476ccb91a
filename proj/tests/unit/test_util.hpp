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
#include "rala/random.hpp"

namespace rala::testing {

template <typename T>
Var<T> rand_var(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false) {
  return Var<T>(normal_tensor<T>(std::move(shape), static_cast<T>(scale), rng), requires_grad);
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// Frames [begin, end) of a [batch, time, ...] tensor.
template <typename T>
Tensor<T> frames(const Tensor<T>& x, std::int64_t begin, std::int64_t end) {
  NoGradGuard g;
  return slice(Var<T>(x), 1, begin, end).value();
}

}  // namespace rala::testing
