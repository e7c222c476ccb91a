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
#include <vector>

#include "rala/ops.hpp"

namespace rala {

// Fewest frames that can emit `labels` under CTC: one per label plus one
// blank between each pair of equal neighbours.
std::int64_t ctc_min_frames(const std::vector<int>& labels);

// Negative log marginal likelihood summed over the batch, by the forward
// algorithm in log space. log_probs: [batch, time, classes] with blank at 0;
// labels hold ids in [1, classes). Throws DomainError when a sequence is too
// short for its labels.
template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const std::vector<std::vector<int>>& labels,
                const Lengths& input_lengths = {});

}  // namespace rala
