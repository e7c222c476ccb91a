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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "rala/longform.hpp"

namespace rala {
namespace {

TaskSpec task() {
  TaskSpec t;
  t.vocab_size = 8;
  t.d_in = 6;
  return t;
}

EncoderParams<float> model(AttentionKind kind = AttentionKind::kRwkv) {
  EncoderConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.conv_kernel = 5;
  c.d_in = 6;
  c.vocab_size = 8;
  c.attention_kind = kind;
  c.decay_rank = 2;
  c.mamba_head_dim = 8;
  c.mamba_state_dim = 4;
  return EncoderParams<float>::init(c, 21);
}

TEST(ChunkBounds, FixedChunksWithRemainderLast) {
  const auto b = chunk_bounds(985700, 40000);
  ASSERT_EQ(b.size(), 25u);
  EXPECT_EQ(b.front(), (std::pair<std::int64_t, std::int64_t>{0, 40000}));
  EXPECT_EQ(b.back(), (std::pair<std::int64_t, std::int64_t>{960000, 985700}));
  for (std::size_t i = 1; i < b.size(); ++i) EXPECT_EQ(b[i].first, b[i - 1].second);
  EXPECT_EQ(chunk_bounds(100, 100).size(), 1u);
  EXPECT_EQ(chunk_bounds(100, 1000).size(), 1u);
  EXPECT_EQ(chunk_bounds(101, 100).size(), 2u);
  EXPECT_THROW(chunk_bounds(100, 0), Error);
}

TEST(Longform, LargeChunkEqualsWholeUtteranceDecode) {
  const auto m = model();
  const Dataset data = make_splits(task(), Regime::kLF, 5);
  DecodeJob whole;
  const LongformResult a = longform_decode(m, data, whole);
  DecodeJob big;
  big.chunk_size = 1 << 20;
  const LongformResult b = longform_decode(m, data, big);
  EXPECT_EQ(a.hyps, b.hyps);
  for (const auto& c : b.chunk_outputs) EXPECT_EQ(c.size(), 1u);
}

TEST(Longform, ChunksAreDecodedIndependently) {
  const auto m = model(AttentionKind::kMamba2);
  const Dataset data = make_splits(task(), Regime::kLFXL, 1);
  DecodeJob job;
  job.chunk_size = 64;
  const LongformResult r = longform_decode(m, data, job);
  const Utterance& u = data.utts[0];
  const auto bounds = chunk_bounds(u.duration_frames, 64);
  ASSERT_EQ(r.chunk_outputs[0].size(), bounds.size());
  // decode the chunks in reverse order, one per pass, and put them back
  std::vector<std::size_t> order(bounds.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::vector<std::vector<float>> segs;
  for (std::size_t i : order) {
    segs.emplace_back(u.features.begin() + bounds[i].first * 6, u.features.begin() + bounds[i].second * 6);
  }
  const auto outs = decode_segments(m, segs, m.cfg.default_schedule(), 1);
  std::vector<int> joined;
  for (std::size_t k = bounds.size(); k-- > 0;) {
    EXPECT_EQ(outs[k], r.chunk_outputs[0][order[k]]) << "chunk " << order[k];
  }
  for (const auto& c : r.chunk_outputs[0]) joined.insert(joined.end(), c.begin(), c.end());
  EXPECT_EQ(joined, r.hyps[0]);
}

TEST(Longform, ReportSumsPerUtteranceAlignments) {
  const auto m = model();
  const Dataset data = make_splits(task(), Regime::kSF, 7);
  DecodeJob job;
  job.chunk_size = 48;
  job.batch_size = 3;
  const LongformResult r = longform_decode(m, data, job);
  ErrorReport sum;
  for (std::size_t i = 0; i < data.utts.size(); ++i) {
    const ErrorReport e = edit_distance_align(data.utts[i].labels, r.hyps[i]);
    EXPECT_EQ(e.errors(), r.per_utterance[i].errors());
    EXPECT_EQ(e.ref_len, r.per_utterance[i].ref_len);
    sum += e;
  }
  EXPECT_EQ(sum.errors(), r.report.errors());
  EXPECT_EQ(sum.ref_len, r.report.ref_len);
  // deterministic
  EXPECT_EQ(longform_decode(m, data, job).hyps, r.hyps);
}

TEST(Longform, BatchSizeDoesNotChangeOutputs) {
  const auto m = model();
  const Dataset data = make_splits(task(), Regime::kLF, 3);
  DecodeJob one, four;
  one.chunk_size = four.chunk_size = 96;
  one.batch_size = 1;
  EXPECT_EQ(longform_decode(m, data, one).hyps, longform_decode(m, data, four).hyps);
}

TEST(Longform, RejectsBadJobs) {
  const auto m = model();
  const Dataset data = make_splits(task(), Regime::kSF, 2);
  DecodeJob job;
  job.chunk_size = 3;
  EXPECT_THROW(longform_decode(m, data, job), Error);
  job.chunk_size = 4;
  EXPECT_NO_THROW(longform_decode(m, data, job));
  TaskSpec other = task();
  other.d_in = 5;
  job.chunk_size = 0;
  EXPECT_THROW(longform_decode(m, make_splits(other, Regime::kSF, 1), job), Error);
  const auto mha = model(AttentionKind::kMha);
  job.schedule = LayerSchedule::parse("l2r", 2);
  EXPECT_THROW(longform_decode(mha, data, job), Error);
}

TEST(DecodeSegments, TooShortSegmentsEmitNothing) {
  const auto m = model();
  const std::vector<std::vector<float>> segs{std::vector<float>(3 * 6, 0.5f), std::vector<float>(8 * 6, 0.5f)};
  const auto out = decode_segments(m, segs, m.cfg.default_schedule(), 4);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].empty());
}

}  // namespace
}  // namespace rala
