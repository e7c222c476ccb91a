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

#include "rala/checkpoint.hpp"
#include "rala/config.hpp"

namespace rala {

// Initializes a model from cfg (or loads cfg.init_from) and trains it on the
// configured regime. The returned step count continues from the loaded
// checkpoint.
Checkpoint train_from_config(const RunConfig& cfg, const StepCallback& on_step = {});

// Mean utterance length of a regime in frames, over the first `sample`
// training items, rounded down to a multiple of the subsample factor.
std::int64_t training_length(const TaskSpec& task, Regime regime, std::int64_t sample = 500);

// Held-out utterances of a regime (stream 1; training uses stream 0).
Dataset test_split(const TaskSpec& task, Regime regime, std::int64_t n);

}  // namespace rala
