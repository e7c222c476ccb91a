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
#include <set>

#include "rala/encoder.hpp"
#include "test_util.hpp"

namespace rala {
namespace {

using testing::rand_var;

EncoderConfig small(AttentionKind kind, bool bidir = true) {
  EncoderConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.conv_kernel = 5;
  c.d_in = 6;
  c.vocab_size = 7;
  c.attention_kind = kind;
  c.bidirectional = bidir;
  c.max_offset = 8;
  c.lca_left = 3;
  c.lca_right = 2;
  c.decay_rank = 2;
  c.mamba_head_dim = 8;
  c.mamba_state_dim = 4;
  return c;
}

class EncoderKinds : public ::testing::TestWithParam<AttentionKind> {};

TEST_P(EncoderKinds, OutputShapesAndLengths) {
  const auto cfg = small(GetParam());
  const auto model = EncoderParams<double>::init(cfg, 1);
  Rng rng(2);
  const Var<double> x = rand_var<double>({3, 23, 6}, rng);
  const Lengths lens{23, 9, 16};
  const auto out = encoder_forward(model, x, lens, cfg.default_schedule());
  EXPECT_EQ(out.hidden.shape(), (Shape{3, 5, 16}));
  EXPECT_EQ(out.lengths, (Lengths{5, 2, 4}));
  const Tensor<double> logp = ctc_logits(model, out.hidden).value();
  EXPECT_EQ(logp.shape(), (Shape{3, 5, 8}));
  for (std::int64_t r = 0; r < 15; ++r) {
    double s = 0;
    for (std::int64_t c = 0; c < 8; ++c) s += std::exp(logp[r * 8 + c]);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST_P(EncoderKinds, PaddedBatchMatchesSingleUtterances) {
  const auto cfg = small(GetParam());
  const auto model = EncoderParams<double>::init(cfg, 3);
  Rng rng(4);
  const std::vector<std::int64_t> lens{20, 13, 8};
  Tensor<double> batch(Shape{3, 20, 6}, 0.0);
  std::vector<Tensor<double>> singles;
  for (std::size_t i = 0; i < lens.size(); ++i) {
    Tensor<double> u = normal_tensor<double>({1, lens[i], 6}, 1.0, rng);
    std::copy(u.ptr(), u.ptr() + u.numel(), batch.ptr() + static_cast<std::int64_t>(i) * 120);
    singles.push_back(std::move(u));
  }
  // junk in the padding must not matter
  for (std::int64_t s = 13; s < 20; ++s) batch[(1 * 20 + s) * 6] = 50.0;
  const auto sched = cfg.default_schedule();
  const auto out = encoder_forward(model, Var<double>(batch), Lengths(lens), sched);
  for (std::size_t i = 0; i < lens.size(); ++i) {
    const auto one = encoder_forward(model, Var<double>(singles[i]), {}, sched);
    const std::int64_t n = one.lengths[0];
    ASSERT_EQ(out.lengths[i], n);
    for (std::int64_t s = 0; s < 5; ++s) {
      for (std::int64_t c = 0; c < 16; ++c) {
        const double got = out.hidden.value()[(static_cast<std::int64_t>(i) * 5 + s) * 16 + c];
        if (s < n) {
          EXPECT_NEAR(got, one.hidden.value()[s * 16 + c], 1e-10) << "utt " << i << " frame " << s;
        } else {
          EXPECT_EQ(got, 0.0);
        }
      }
    }
  }
}

TEST_P(EncoderKinds, ParametersHaveUniqueNamesAndAttentionPrefix) {
  const auto model = EncoderParams<float>::init(small(GetParam()), 1);
  std::set<std::string> names;
  std::size_t attn = 0;
  for (const auto& p : model.params()) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    EXPECT_TRUE(p.var.requires_grad()) << p.name;
    if (is_attention_param(p.name)) {
      ++attn;
      EXPECT_EQ(p.name.rfind("blocks.", 0), 0u) << p.name;
    }
  }
  EXPECT_GT(attn, 0u);
  EXPECT_LT(attn, names.size());
  EXPECT_TRUE(names.count("ctc.w"));
}

TEST_P(EncoderKinds, SameSeedSameWeights) {
  const auto a = EncoderParams<float>::init(small(GetParam()), 9).params();
  const auto b = EncoderParams<float>::init(small(GetParam()), 9).params();
  const auto c = EncoderParams<float>::init(small(GetParam()), 10).params();
  ASSERT_EQ(a.size(), b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(testing::bit_equal(a[i].var.value(), b[i].var.value())) << a[i].name;
    any_diff |= !testing::bit_equal(a[i].var.value(), c[i].var.value());
  }
  EXPECT_TRUE(any_diff);
}

INSTANTIATE_TEST_SUITE_P(All, EncoderKinds,
                         ::testing::Values(AttentionKind::kMha, AttentionKind::kLcaGt, AttentionKind::kRwkv,
                                           AttentionKind::kMamba2),
                         [](const auto& info) { return to_string(info.param); });

TEST(Encoder, RejectsInputsShorterThanSubsampling) {
  const auto model = EncoderParams<double>::init(small(AttentionKind::kRwkv), 1);
  Rng rng(1);
  const auto sched = model.cfg.default_schedule();
  EXPECT_THROW(encoder_forward(model, rand_var<double>({1, 3, 6}, rng), {}, sched), Error);
  EXPECT_THROW(encoder_forward(model, rand_var<double>({2, 8, 6}, rng), {8, 3}, sched), Error);
  EXPECT_NO_THROW(encoder_forward(model, rand_var<double>({1, 4, 6}, rng), {}, sched));
}

TEST(Encoder, RejectsWrongFeatureWidthAndScheduleDepth) {
  const auto model = EncoderParams<double>::init(small(AttentionKind::kRwkv), 1);
  Rng rng(1);
  EXPECT_THROW(encoder_forward(model, rand_var<double>({1, 8, 5}, rng), {}, model.cfg.default_schedule()),
               ShapeError);
  EXPECT_THROW(encoder_forward(model, rand_var<double>({1, 8, 6}, rng), {}, LayerSchedule::parse("bi", 3)),
               Error);
}

TEST(Encoder, ScheduleModesMustBeSupported) {
  Rng rng(1);
  const auto mha = EncoderParams<double>::init(small(AttentionKind::kMha), 1);
  EXPECT_THROW(encoder_forward(mha, rand_var<double>({1, 8, 6}, rng), {}, LayerSchedule::parse("l2r", 2)), Error);
  const auto uni = EncoderParams<double>::init(small(AttentionKind::kMamba2, false), 1);
  EXPECT_EQ(uni.cfg.default_schedule().to_string(), "FF");
  EXPECT_THROW(encoder_forward(uni, rand_var<double>({1, 8, 6}, rng), {}, LayerSchedule::parse("alt", 2)), Error);
}

TEST(Encoder, UnidirectionalCausalModelIgnoresTheFuture) {
  auto cfg = small(AttentionKind::kRwkv, false);
  cfg.causal_conv = true;
  const auto model = EncoderParams<double>::init(cfg, 5);
  Rng rng(6);
  const Var<double> x = rand_var<double>({1, 32, 6}, rng);
  Tensor<double> bumped = x.value();
  for (std::int64_t i = 24 * 6; i < bumped.numel(); ++i) bumped[i] += 1.0;
  const auto sched = cfg.default_schedule();
  const Tensor<double> a = encoder_forward(model, x, {}, sched).hidden.value();
  const Tensor<double> b = encoder_forward(model, Var<double>(bumped), {}, sched).hidden.value();
  // output frame j sees input frames up to 4j + 3
  for (std::int64_t i = 0; i < 5 * 16; ++i) EXPECT_EQ(a[i], b[i]);
  double diff = 0;
  for (std::int64_t i = 6 * 16; i < a.numel(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Encoder, ConfigValidation) {
  auto c = small(AttentionKind::kRwkv);
  EXPECT_NO_THROW(c.validate());
  c.subsample_factor = 2;
  EXPECT_THROW(c.validate(), Error);
  c = small(AttentionKind::kRwkv);
  c.d_model = 15;
  EXPECT_THROW(c.validate(), Error);
  c = small(AttentionKind::kRwkv);
  c.conv_kernel = 4;
  EXPECT_THROW(c.validate(), Error);
  c = small(AttentionKind::kRwkv);
  c.n_layers = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(GreedyDecode, CollapsesRepeatsAndDropsBlanks) {
  // argmax path per frame: 1 1 0 1 2 2 0
  const std::vector<int> path{1, 1, 0, 1, 2, 2, 0};
  Tensor<double> lp(Shape{1, 7, 3}, -5.0);
  for (std::int64_t s = 0; s < 7; ++s) lp[s * 3 + path[static_cast<std::size_t>(s)]] = -0.1;
  EXPECT_EQ(ctc_greedy_decode(lp)[0], (std::vector<int>{1, 1, 2}));
  EXPECT_EQ(ctc_greedy_decode(lp, {2})[0], (std::vector<int>{1}));
}

}  // namespace
}  // namespace rala
