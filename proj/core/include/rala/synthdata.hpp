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
#include <string>
#include <vector>

#include "rala/random.hpp"

namespace rala {

// Token inventory of the synthetic task:
//   [0, vocab)                       content symbols, each emits one label
//   filler                           silent; separates repeated labels
//   key_j       (j < n_key_ids)      silent marker, followed by a content VALUE
//   look_back_j / look_ahead_j       queries: label is the VALUE after the
//                                    nearest key_j before / after the query
// A content symbol's label is table[symbol][class of previous token].
struct TaskSpec {
  std::int64_t vocab_size = 16;
  std::int64_t d_in = 16;
  std::int64_t frames_per_token = 4;
  std::int64_t key_value_pairs = 3;
  std::int64_t n_key_ids = 4;
  std::int64_t prev_classes = 3;
  double noise_std = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  std::int64_t n_tokens() const { return vocab_size + 1 + 3 * n_key_ids; }
  std::int64_t filler() const { return vocab_size; }
  std::int64_t key(std::int64_t j) const { return vocab_size + 1 + j; }
  std::int64_t look_back(std::int64_t j) const { return vocab_size + 1 + n_key_ids + j; }
  std::int64_t look_ahead(std::int64_t j) const { return vocab_size + 1 + 2 * n_key_ids + j; }
};

// Fixed quantities derived from the task seed: token embeddings and the
// local label table.
struct TaskTables {
  std::vector<float> embed;   // [n_tokens, frames_per_token, d_in]
  std::vector<int> label_of;  // [vocab, prev_classes + 1] -> label in [1, vocab]

  static TaskTables make(const TaskSpec& spec);
  int local_label(const TaskSpec& spec, std::int64_t symbol, std::int64_t prev_token) const;
  std::int64_t prev_class(const TaskSpec& spec, std::int64_t prev_token) const;
};

struct Utterance {
  std::vector<float> features;  // [duration_frames, d_in] row-major
  std::vector<int> labels;      // in [1, vocab]
  std::int64_t duration_frames = 0;
  std::vector<int> tokens;      // generating tokens (not serialized)
  std::vector<std::uint8_t> query_label;  // 1 where a label comes from a query
};

// pre: n_tokens >= 3K + 2.
Utterance gen_utterance(const TaskSpec& spec, const TaskTables& tables, std::int64_t n_tokens,
                        Rng& rng);

// Concatenates utterances in order until the duration reaches target_frames
// (always at least the first one).
Utterance concat_utterances(const std::vector<Utterance>& us, std::int64_t target_frames);

enum class Regime { kSF, kLF, kLFXL };
std::string to_string(Regime r);
Regime parse_regime(const std::string& name);  // sf, lf, lfxl

struct Dataset {
  std::int64_t d_in = 0;
  std::vector<Utterance> utts;

  std::int64_t total_frames() const;
  double mean_frames() const;
};

// Item `index` of an unbounded deterministic stream; make_splits returns
// the first n items of a stream.
Utterance sample_utterance(const TaskSpec& spec, const TaskTables& tables, Regime regime,
                           std::uint64_t stream, std::int64_t index);

// SF: 32-96 tokens each. LF: 2-3 SF utterances joined. LFXL: 16-20 joined.
// `stream` selects an independent split (e.g. 0 train, 1 test).
Dataset make_splits(const TaskSpec& spec, Regime regime, std::int64_t n, std::uint64_t stream = 0);

// Binary records (u32 frames, u32 labels, f32 features, i32 labels; all
// little-endian) plus a text manifest of record offsets.
void save_dataset(const Dataset& ds, const std::string& path, const std::string& manifest_path);
Dataset load_dataset(const std::string& path, const std::string& manifest_path);

}  // namespace rala
