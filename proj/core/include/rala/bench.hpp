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
#include <functional>
#include <string>
#include <vector>

#include "rala/encoder.hpp"

namespace rala {

inline constexpr double kFramesPerSecond = 100.0;

// Minutes of audio represented by a frame count at 100 frames per second.
inline double audio_minutes(std::int64_t frames) {
  return static_cast<double>(frames) / (kFramesPerSecond * 60.0);
}

// One timed forward pass over a pre-built [batch, time, d_in] input.
using EncodeFn = std::function<void(const Tensor<float>& features, const Lengths& lengths)>;

struct BenchConfig {
  std::vector<std::int64_t> chunk_sizes{2000, 9000, 20000, 40000};
  std::int64_t batch_size = 4;
  std::int64_t warmup_queries = 2;
  std::int64_t repeats = 3;
  std::int64_t total_frames = 0;  // long input length; 0: batch_size x largest chunk
  std::int64_t d_in = 16;
  double max_pass_seconds = 0;    // a slower pass marks the cell failed; 0: no limit
  std::int64_t threads = 1;       // > 1 splits each batch across threads
  std::uint64_t seed = 1;
};

struct BenchCell {
  std::int64_t chunk_size = 0;
  bool failed = false;
  std::string failure;
  std::int64_t frames = 0;  // per pass
  double audio_minutes = 0;
  std::vector<double> wall_seconds;  // one per repeat
  double min_seconds = 0, median_seconds = 0, max_seconds = 0;
  double mps = 0;  // audio_minutes / median_seconds
};

struct BenchReport {
  std::string model;
  std::int64_t threads = 1;
  std::vector<BenchCell> cells;
  double exponent = 0, exponent_stderr = 0;  // NaN when not fittable
};

// For each chunk size: split the long input into chunks, group them
// batch_size at a time, run warmup_queries untimed forwards, then time
// `repeats` full passes. Input generation happens before any timing.
// Allocation failure or exceeding max_pass_seconds marks the cell failed.
BenchReport bench_throughput(const BenchConfig& cfg, const EncodeFn& encode,
                             const std::string& model_name = "");

struct ExponentFit {
  double slope = 0;
  double stderr_ = 0;
  double intercept = 0;
};

// Least-squares slope of log(seconds) against log(length). Needs at least 3
// distinct lengths spanning a factor of 4 or more.
ExponentFit fit_complexity_exponent(const std::vector<std::pair<std::int64_t, double>>& timings);

// Encoder-only forward (no gradients) of a model under a schedule.
EncodeFn encoder_encode_fn(const EncoderParams<float>& model, const LayerSchedule& schedule);

// Times a single attention sublayer on [batch, t, d_model] input directly,
// for scaling fits that should not be diluted by the rest of the encoder.
struct AttentionBench {
  AttentionKind kind = AttentionKind::kMha;
  bool bidirectional = false;
  EncoderConfig cfg;  // widths and windows
};
EncodeFn attention_encode_fn(const AttentionBench& spec, std::uint64_t seed = 1);

// Times encode on one input of each length (batch 1, warmups excluded);
// returns (length, median seconds) pairs.
std::vector<std::pair<std::int64_t, double>> time_lengths(const EncodeFn& encode, std::int64_t d_in,
                                                          const std::vector<std::int64_t>& lengths,
                                                          std::int64_t warmup, std::int64_t repeats,
                                                          std::uint64_t seed = 1);

// CSV with columns model,chunk_size,frames,audio_minutes,min_s,median_s,max_s,mps;
// failed cells print "-" for timing columns.
std::string bench_csv(const std::vector<BenchReport>& reports);

}  // namespace rala
