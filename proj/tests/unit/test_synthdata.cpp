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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "rala/ctc.hpp"
#include "rala/synthdata.hpp"

namespace rala {
namespace {

// Independent labelling of a token stream: content symbols get
// table[symbol][class of previous token], queries get the value after the
// nearest matching key in their direction, everything else is silent.
std::vector<int> oracle_labels(const TaskSpec& spec, const TaskTables& tables, const std::vector<int>& toks) {
  std::vector<int> out;
  const auto n = static_cast<std::int64_t>(toks.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t t = toks[static_cast<std::size_t>(i)];
    if (t < spec.vocab_size) {
      const std::int64_t prev = i > 0 ? toks[static_cast<std::size_t>(i - 1)] : spec.filler();
      const std::int64_t cls = prev < spec.vocab_size ? prev % spec.prev_classes : spec.prev_classes;
      out.push_back(tables.label_of[static_cast<std::size_t>(t * (spec.prev_classes + 1) + cls)]);
    } else if (t >= spec.look_back(0)) {
      const bool ahead = t >= spec.look_ahead(0);
      const std::int64_t key = spec.key(t - (ahead ? spec.look_ahead(0) : spec.look_back(0)));
      int label = -1;
      for (std::int64_t j = i + (ahead ? 1 : -1); j >= 0 && j < n; j += ahead ? 1 : -1) {
        if (toks[static_cast<std::size_t>(j)] == key) {
          label = toks[static_cast<std::size_t>(j + 1)] + 1;
          break;
        }
      }
      out.push_back(label);
    }
  }
  return out;
}

TaskSpec noiseless() {
  TaskSpec s;
  s.noise_std = 0;
  s.frames_per_token = 1;
  return s;
}

TEST(Synthdata, QueryLabelsMatchTheirKeysValue) {
  TaskSpec spec;
  spec.key_value_pairs = 6;
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(1);
  std::int64_t queries = 0;
  for (int i = 0; i < 10000; ++i) {
    const Utterance u = gen_utterance(spec, tables, 20 + i % 60, rng);
    ASSERT_EQ(oracle_labels(spec, tables, u.tokens), u.labels) << "sequence " << i;
    for (auto q : u.query_label) queries += q;
  }
  EXPECT_EQ(queries, 6 * 10000);
}

TEST(Synthdata, ShapeInvariants) {
  TaskSpec spec;
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Utterance u = gen_utterance(spec, tables, 40, rng);
    EXPECT_EQ(u.duration_frames, static_cast<std::int64_t>(u.tokens.size()) * spec.frames_per_token);
    EXPECT_EQ(static_cast<std::int64_t>(u.features.size()), u.duration_frames * spec.d_in);
    EXPECT_GE(static_cast<std::int64_t>(u.tokens.size()), 40);
    EXPECT_EQ(u.tokens.front(), spec.filler());
    for (int l : u.labels) {
      EXPECT_GE(l, 1);
      EXPECT_LE(l, spec.vocab_size);
    }
  }
}

TEST(Synthdata, LabelsAreCtcFeasibleAfterSubsampling) {
  TaskSpec spec;
  for (Regime r : {Regime::kSF, Regime::kLF, Regime::kLFXL}) {
    const Dataset ds = make_splits(spec, r, r == Regime::kLFXL ? 20 : 300);
    for (const auto& u : ds.utts) EXPECT_LE(ctc_min_frames(u.labels), u.duration_frames / 4);
  }
}

TEST(Synthdata, NoiselessFeaturesAreTokenEmbeddings) {
  const TaskSpec spec = noiseless();
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(3);
  const Utterance u = gen_utterance(spec, tables, 30, rng);
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    for (std::int64_t c = 0; c < spec.d_in; ++c) {
      EXPECT_EQ(u.features[i * static_cast<std::size_t>(spec.d_in) + static_cast<std::size_t>(c)],
                tables.embed[static_cast<std::size_t>(u.tokens[i] * spec.d_in + c)]);
    }
  }
}

// Recovers tokens from noiseless features by nearest embedding, then labels
// them with the oracle: zero error.
TEST(Synthdata, GeneratorAwareDecoderIsExact) {
  const TaskSpec spec = noiseless();
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(4);
  const std::int64_t d = spec.d_in;
  for (int i = 0; i < 200; ++i) {
    const Utterance u = gen_utterance(spec, tables, 64, rng);
    std::vector<int> toks;
    for (std::int64_t s = 0; s < u.duration_frames; ++s) {
      int best = -1;
      double best_dist = INFINITY;
      for (std::int64_t k = 0; k < spec.n_tokens(); ++k) {
        double dist = 0;
        for (std::int64_t c = 0; c < d; ++c) {
          const double diff = u.features[static_cast<std::size_t>(s * d + c)] - tables.embed[static_cast<std::size_t>(k * d + c)];
          dist += diff * diff;
        }
        if (dist < best_dist) best_dist = dist, best = static_cast<int>(k);
      }
      toks.push_back(best);
    }
    EXPECT_EQ(oracle_labels(spec, tables, toks), u.labels);
  }
}

// A classifier that only sees (token, previous token) solves the local
// labels and is near chance on queries.
TEST(Synthdata, LocalLookupSolvesLocalLabelsOnly) {
  const TaskSpec spec = noiseless();
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(5);
  std::map<std::pair<int, int>, std::map<int, int>> counts;
  auto visit = [&](const Utterance& u, auto&& fn) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      const bool labelled = u.tokens[i] < spec.vocab_size || u.tokens[i] >= spec.look_back(0);
      if (!labelled) continue;
      fn(std::make_pair(u.tokens[i], i ? u.tokens[i - 1] : -1), u.labels[k], u.query_label[k] != 0);
      ++k;
    }
  };
  for (int i = 0; i < 4000; ++i) {
    visit(gen_utterance(spec, tables, 64, rng), [&](auto key, int label, bool) { ++counts[key][label]; });
  }
  std::int64_t local_ok = 0, local_n = 0, query_ok = 0, query_n = 0;
  for (int i = 0; i < 1000; ++i) {
    visit(gen_utterance(spec, tables, 64, rng), [&](auto key, int label, bool query) {
      int guess = -1, best = 0;
      for (auto [l, c] : counts[key]) {
        if (c > best) best = c, guess = l;
      }
      (query ? query_ok : local_ok) += guess == label;
      (query ? query_n : local_n) += 1;
    });
  }
  EXPECT_EQ(local_ok, local_n);
  const double query_acc = static_cast<double>(query_ok) / static_cast<double>(query_n);
  EXPECT_LT(query_acc, 0.2) << "chance is " << 1.0 / static_cast<double>(spec.vocab_size);
}

TEST(Synthdata, SameSeedSameUtterance) {
  TaskSpec spec;
  const TaskTables a = TaskTables::make(spec), b = TaskTables::make(spec);
  EXPECT_EQ(a.embed, b.embed);
  EXPECT_EQ(a.label_of, b.label_of);
  Rng r1(7), r2(7);
  const Utterance u = gen_utterance(spec, a, 50, r1), v = gen_utterance(spec, b, 50, r2);
  EXPECT_EQ(u.features, v.features);
  EXPECT_EQ(u.labels, v.labels);
  const Utterance w = sample_utterance(spec, a, Regime::kLF, 0, 17);
  EXPECT_EQ(w.features, sample_utterance(spec, a, Regime::kLF, 0, 17).features);
  EXPECT_NE(w.features, sample_utterance(spec, a, Regime::kLF, 1, 17).features);
  TaskSpec other = spec;
  other.seed = 2;
  EXPECT_NE(TaskTables::make(other).embed, a.embed);
}

TEST(Synthdata, SplitsArePrefixesOfTheirStream) {
  TaskSpec spec;
  const Dataset small = make_splits(spec, Regime::kSF, 5), big = make_splits(spec, Regime::kSF, 9);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(small.utts[i].features, big.utts[i].features);
}

TEST(Synthdata, RejectsTooFewTokensForThePlants) {
  TaskSpec spec;
  spec.key_value_pairs = 4;
  const TaskTables tables = TaskTables::make(spec);
  Rng rng(8);
  EXPECT_THROW(gen_utterance(spec, tables, 13, rng), Error);
  EXPECT_NO_THROW(gen_utterance(spec, tables, 14, rng));
}

TEST(Synthdata, RegimeLengthStatistics) {
  TaskSpec spec;
  const double sf = make_splits(spec, Regime::kSF, 2000).mean_frames();
  const double lf = make_splits(spec, Regime::kLF, 1000).mean_frames();
  const double xl = make_splits(spec, Regime::kLFXL, 200).mean_frames();
  EXPECT_NEAR(sf / static_cast<double>(spec.frames_per_token), 64.0, 2.0);
  EXPECT_GE(lf / sf, 2.3);
  EXPECT_LE(lf / sf, 2.9);
  EXPECT_NEAR(xl / sf, 17.9, 0.9);
}

Utterance flat(std::int64_t frames, int label) {
  Utterance u;
  u.duration_frames = frames;
  u.features.assign(static_cast<std::size_t>(frames), static_cast<float>(label));
  u.labels = {label, label + 1};
  return u;
}

TEST(Concat, StopsOnceTargetIsReached) {
  const std::vector<Utterance> us{flat(100, 1), flat(100, 3), flat(100, 5)};
  const Utterance a = concat_utterances(us, 150);
  EXPECT_EQ(a.duration_frames, 200);
  EXPECT_EQ(a.labels, (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(a.features.size(), 200u);
  EXPECT_EQ(a.features[150], 3.0f);
  EXPECT_EQ(concat_utterances(us, 0).duration_frames, 100);
  const Utterance all = concat_utterances(us, 1000);
  EXPECT_EQ(all.labels.size(), 6u);
  EXPECT_THROW(concat_utterances({}, 10), Error);
}

TEST(Dataset, SaveLoadRoundTrip) {
  TaskSpec spec;
  const Dataset ds = make_splits(spec, Regime::kLF, 7);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string bin = (dir / "rala_ds_test.bin").string(), man = (dir / "rala_ds_test.manifest").string();
  save_dataset(ds, bin, man);
  const Dataset back = load_dataset(bin, man);
  ASSERT_EQ(back.utts.size(), ds.utts.size());
  EXPECT_EQ(back.d_in, ds.d_in);
  for (std::size_t i = 0; i < ds.utts.size(); ++i) {
    EXPECT_EQ(back.utts[i].duration_frames, ds.utts[i].duration_frames);
    EXPECT_EQ(back.utts[i].features, ds.utts[i].features);
    EXPECT_EQ(back.utts[i].labels, ds.utts[i].labels);
  }
  std::filesystem::resize_file(bin, std::filesystem::file_size(bin) - 3);
  EXPECT_THROW(load_dataset(bin, man), Error);
  std::remove(bin.c_str());
  std::remove(man.c_str());
}

}  // namespace
}  // namespace rala
