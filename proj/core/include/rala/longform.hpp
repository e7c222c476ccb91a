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
#include <utility>
#include <vector>

#include "rala/encoder.hpp"
#include "rala/synthdata.hpp"
#include "rala/wer.hpp"

namespace rala {

struct DecodeJob {
  std::int64_t chunk_size = 0;  // frames; 0 decodes each utterance whole
  std::int64_t batch_size = 4;  // chunks per forward pass
  LayerSchedule schedule;       // empty: the model's default
};

struct LongformResult {
  ErrorReport report;                            // summed over utterances
  std::vector<ErrorReport> per_utterance;
  std::vector<std::vector<int>> hyps;            // joined, per utterance
  std::vector<std::vector<std::vector<int>>> chunk_outputs;  // [utt][chunk]
};

// [begin, end) frame ranges of fixed-size chunks, remainder last.
std::vector<std::pair<std::int64_t, std::int64_t>> chunk_bounds(std::int64_t frames,
                                                                std::int64_t chunk_size);

// Greedy CTC decode of independent segments ([frames, d_in] row-major each),
// batch_size at a time. Segments shorter than the subsampling factor emit
// nothing.
std::vector<std::vector<int>> decode_segments(const EncoderParams<float>& model,
                                              const std::vector<std::vector<float>>& segments,
                                              const LayerSchedule& schedule,
                                              std::int64_t batch_size);

// Splits each utterance into non-overlapping chunks, decodes every chunk
// with no context from its neighbours, joins the outputs in order and scores
// them against the utterance labels.
LongformResult longform_decode(const EncoderParams<float>& model, const Dataset& data,
                               const DecodeJob& job);

}  // namespace rala
