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
#include <cmath>
#include <numeric>

#include "rala/mha.hpp"
#include "test_util.hpp"

namespace rala {
namespace {

using testing::rand_var;
using V = Var<double>;

// Dense reference: per head, scores q.k / sqrt(hd) + bias[clip(j - i)],
// masked by `allowed(i, j)` over the extended sequence, softmax, weighted
// sum of values. Rows at or beyond a sequence's length are zero.
Tensor<double> dense_attention(const MhaParams<double>& p, const Tensor<double>& ext, std::int64_t n_global,
                               const std::function<bool(std::int64_t, std::int64_t)>& allowed,
                               const std::vector<std::int64_t>& lens) {
  const std::int64_t b = ext.dim(0), te = ext.dim(1), d = ext.dim(2), h = p.n_heads, hd = d / h;
  auto proj = [&](const Tensor<double>& w) {
    Tensor<double> out(ext.shape(), 0.0);
    for (std::int64_t r = 0; r < b * te; ++r) {
      for (std::int64_t o = 0; o < d; ++o) {
        for (std::int64_t i = 0; i < d; ++i) out[r * d + o] += ext[r * d + i] * w[i * d + o];
      }
    }
    return out;
  };
  const Tensor<double> q = proj(p.w_q.value()), k = proj(p.w_k.value()), v = proj(p.w_v.value());
  Tensor<double> y(ext.shape(), 0.0);
  const std::int64_t nb = 2 * p.max_offset + 1;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    const std::int64_t valid = n_global + lens[static_cast<std::size_t>(bi)];
    for (std::int64_t hh = 0; hh < h; ++hh) {
      for (std::int64_t i = 0; i < valid; ++i) {
        std::vector<double> s(static_cast<std::size_t>(valid), -INFINITY);
        for (std::int64_t j = 0; j < valid; ++j) {
          if (!allowed(i, j)) continue;
          double dot = 0;
          for (std::int64_t c = 0; c < hd; ++c) dot += q[(bi * te + i) * d + hh * hd + c] * k[(bi * te + j) * d + hh * hd + c];
          double bias = 0;
          if (i >= n_global && j >= n_global) {
            const std::int64_t off = std::clamp(j - i, -p.max_offset, p.max_offset);
            bias = p.rel_bias.value()[hh * nb + off + p.max_offset];
          }
          s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(hd)) + bias;
        }
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (std::int64_t j = 0; j < valid; ++j) {
          for (std::int64_t c = 0; c < hd; ++c) {
            y[(bi * te + i) * d + hh * hd + c] += s[static_cast<std::size_t>(j)] / z * v[(bi * te + j) * d + hh * hd + c];
          }
        }
      }
    }
  }
  Tensor<double> out(y.shape(), 0.0);
  for (std::int64_t r = 0; r < b * te; ++r) {
    for (std::int64_t o = 0; o < d; ++o) {
      for (std::int64_t i = 0; i < d; ++i) out[r * d + o] += y[r * d + i] * p.w_o.value()[i * d + o];
    }
  }
  return out;
}

MhaParams<double> params(std::int64_t d, std::int64_t h, std::int64_t max_offset, std::uint64_t seed) {
  Rng rng(seed);
  auto p = MhaParams<double>::init(d, h, max_offset, rng);
  p.rel_bias.mutable_value() = normal_tensor<double>(p.rel_bias.shape(), 0.5, rng);
  return p;
}

void expect_close(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "element " << i;
}

TEST(Mha, SingleFrameIsValueThenOutputProjection) {
  const auto p = params(8, 2, 4, 1);
  Rng rng(2);
  const V x = rand_var<double>({3, 1, 8}, rng);
  expect_close(mha_forward(p, x, false).value(), linear(linear(x, p.w_v), p.w_o).value(), 1e-12);
}

TEST(Mha, TwoFrameHandOracle) {
  MhaParams<double> p;
  p.d_model = 2;
  p.n_heads = 1;
  p.max_offset = 1;
  auto mat = [](std::vector<double> v) {
    Tensor<double> t(Shape{2, 2});
    for (int i = 0; i < 4; ++i) t[i] = v[static_cast<std::size_t>(i)];
    return V::parameter(t);
  };
  p.w_q = mat({1, 0, 0, 1});
  p.w_k = mat({1, 0, 0, 1});
  p.w_v = mat({1, 0, 0, 1});
  p.w_o = mat({1, 0, 0, 1});
  Tensor<double> bias(Shape{1, 3});
  bias[0] = 0.2;  // offset -1
  bias[1] = 0.0;
  bias[2] = -0.1;  // offset +1
  p.rel_bias = V::parameter(bias);
  Tensor<double> x(Shape{1, 2, 2});
  x[0] = 1, x[1] = 0, x[2] = 0.5, x[3] = 2;
  // frame 0: scores [1/sqrt2, 0.5/sqrt2 - 0.1]; frame 1: [0.5/sqrt2 + 0.2, 4.25/sqrt2]
  const double r2 = std::sqrt(2.0);
  const double a0 = 1 / r2, a1 = 0.5 / r2 - 0.1, b0 = 0.5 / r2 + 0.2, b1 = 4.25 / r2;
  const double p01 = std::exp(a1) / (std::exp(a0) + std::exp(a1)), p11 = std::exp(b1) / (std::exp(b0) + std::exp(b1));
  const Tensor<double> y = mha_forward(p, V(x), false).value();
  EXPECT_NEAR(y[0], (1 - p01) * 1 + p01 * 0.5, 1e-6);
  EXPECT_NEAR(y[1], p01 * 2, 1e-6);
  EXPECT_NEAR(y[2], (1 - p11) * 1 + p11 * 0.5, 1e-6);
  EXPECT_NEAR(y[3], p11 * 2, 1e-6);
}

TEST(Mha, MatchesDenseOracleWithLengthsAndCausality) {
  const auto p = params(8, 2, 2, 3);
  Rng rng(4);
  const V x = rand_var<double>({2, 7, 8}, rng);
  const std::vector<std::int64_t> lens{7, 5};
  for (bool causal : {false, true}) {
    const Tensor<double> want =
        dense_attention(p, x.value(), 0, [&](auto i, auto j) { return !causal || j <= i; }, lens);
    expect_close(mha_forward(p, x, causal, Lengths(lens)).value(), want, 1e-10);
  }
}

TEST(Mha, ShapeContractAndErrors) {
  Rng rng(5);
  auto p = MhaParams<float>::init(64, 4, 64, rng);
  EXPECT_EQ(mha_forward(p, rand_var<float>({4, 128, 64}, rng), false).shape(), (Shape{4, 128, 64}));
  EXPECT_THROW(mha_forward(p, rand_var<float>({4, 8, 32}, rng), false), ShapeError);
  EXPECT_THROW(MhaParams<float>::init(30, 4, 8, rng), ShapeError);
}

TEST(Mha, EquivariantWithoutPositionInformation) {
  auto p = params(8, 2, 4, 6);
  p.rel_bias.mutable_value() = Tensor<double>(p.rel_bias.shape(), 0.0);
  Rng rng(7);
  const V x = rand_var<double>({1, 6, 8}, rng);
  std::vector<std::int64_t> perm{3, 0, 5, 1, 4, 2};
  Tensor<double> xp(x.shape());
  for (std::int64_t s = 0; s < 6; ++s) {
    for (std::int64_t c = 0; c < 8; ++c) xp[s * 8 + c] = x.value()[perm[static_cast<std::size_t>(s)] * 8 + c];
  }
  const Tensor<double> y = mha_forward(p, x, false).value(), yp = mha_forward(p, V(xp), false).value();
  for (std::int64_t s = 0; s < 6; ++s) {
    for (std::int64_t c = 0; c < 8; ++c) EXPECT_NEAR(yp[s * 8 + c], y[perm[static_cast<std::size_t>(s)] * 8 + c], 1e-12);
  }
}

TEST(Mha, CausalOutputIgnoresLaterFrames) {
  const auto p = params(8, 2, 4, 8);
  Rng rng(9);
  const V x = rand_var<double>({1, 9, 8}, rng);
  Tensor<double> later = x.value();
  for (std::int64_t i = 5 * 8; i < later.numel(); ++i) later[i] += 3.0;
  const Tensor<double> a = mha_forward(p, x, true).value(), b = mha_forward(p, V(later), true).value();
  for (std::int64_t i = 0; i < 5 * 8; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Lca, WideWindowsWithoutGlobalsEqualFullAttention) {
  const auto p = params(8, 2, 4, 10);
  Rng rng(11);
  for (std::int64_t t = 1; t <= 32; ++t) {
    Rng lrng(12);
    const auto c = LcaConfig<double>::init(t, t, 0, 8, lrng);
    const V x = rand_var<double>({2, t, 8}, rng);
    expect_close(lca_gt_forward(p, c, x).value(), mha_forward(p, x, false).value(), 1e-5);
  }
}

TEST(Lca, MatchesDenseOracleWithGlobalTokens) {
  const auto p = params(8, 2, 3, 13);
  Rng rng(14);
  const auto c = LcaConfig<double>::init(2, 1, 2, 8, rng);
  const V x = rand_var<double>({2, 9, 8}, rng);
  const std::vector<std::int64_t> lens{9, 6};
  Tensor<double> ext(Shape{2, 11, 8});
  for (std::int64_t b = 0; b < 2; ++b) {
    std::copy(c.global_embed.value().ptr(), c.global_embed.value().ptr() + 16, ext.ptr() + b * 88);
    std::copy(x.value().ptr() + b * 72, x.value().ptr() + (b + 1) * 72, ext.ptr() + b * 88 + 16);
  }
  const Tensor<double> dense = dense_attention(
      p, ext, 2, [](std::int64_t i, std::int64_t j) { return i < 2 || j < 2 || (j - i >= -2 && j - i <= 1); }, lens);
  const Tensor<double> got = lca_gt_forward(p, c, x, Lengths(lens)).value();
  for (std::int64_t b = 0; b < 2; ++b) {
    for (std::int64_t s = 0; s < lens[static_cast<std::size_t>(b)]; ++s) {
      for (std::int64_t ch = 0; ch < 8; ++ch) {
        EXPECT_NEAR(got[(b * 9 + s) * 8 + ch], dense[(b * 11 + 2 + s) * 8 + ch], 1e-10);
      }
    }
  }
}

TEST(Lca, WindowMaskIsExactlyZeroOutside) {
  Rng rng(15);
  const Tensor<double> q = normal_tensor<double>({1, 5, 4}, 1.0, rng), k = normal_tensor<double>({1, 5, 4}, 1.0, rng);
  AttentionPattern pat;
  pat.left = pat.right = 1;
  pat.max_offset = 2;
  const Tensor<double> probs = attention_probs(q, k, Tensor<double>(Shape{1, 5}, 0.0), 1, pat);
  for (std::int64_t j = 0; j < 5; ++j) {
    const double w = probs[2 * 5 + j];
    if (j >= 1 && j <= 3) {
      EXPECT_GT(w, 0.0);
    } else {
      EXPECT_EQ(w, 0.0);
    }
  }
  for (std::int64_t i = 0; i < 5; ++i) {
    for (std::int64_t j = 0; j < 5; ++j) {
      if (std::abs(i - j) > 1) {
        EXPECT_EQ(probs[i * 5 + j], 0.0);
      }
    }
  }
}

TEST(AttentionFlops, GrowthRates) {
  FlopsConfig cfg;
  const auto ratio = [&](AttentionKind k, std::int64_t t) {
    return static_cast<double>(attention_flops(k, 2 * t, cfg)) / static_cast<double>(attention_flops(k, t, cfg));
  };
  EXPECT_DOUBLE_EQ(ratio(AttentionKind::kMha, 100000), 4.0);
  EXPECT_NEAR(ratio(AttentionKind::kLcaGt, 1000000), 2.0, 1e-3);
  EXPECT_DOUBLE_EQ(ratio(AttentionKind::kRwkv, 777), 2.0);
  EXPECT_NEAR(ratio(AttentionKind::kMamba2, 777), 2.0, 1e-12);
  // short sequences: the window covers everything, so LCA is quadratic too
  EXPECT_GT(ratio(AttentionKind::kLcaGt, 20), 3.5);
  EXPECT_THROW(attention_flops(AttentionKind::kMha, 0, cfg), Error);
}

}  // namespace
}  // namespace rala
