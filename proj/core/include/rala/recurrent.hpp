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

#include "rala/ops.hpp"

namespace rala {

// Carried state of one recurrent layer for a batch.
//   RWKV:    matrix [batch, heads, hd, hd], tail [batch, d_model] (last input frame)
//   Mamba-2: matrix [batch, heads, N, hd],  tail [batch, width-1, conv channels]
template <typename T>
struct RecurrentState {
  Var<T> matrix;
  Var<T> tail;
};

template <typename T>
struct RecurrentOutput {
  Var<T> y;
  RecurrentState<T> state;
};

}  // namespace rala
