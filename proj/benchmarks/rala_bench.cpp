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

// Microbenchmarks for the hot kernels: gemm, the attention sublayers and the
// CTC forward-backward pass.

#include <benchmark/benchmark.h>

#include "rala/bench.hpp"
#include "rala/ctc.hpp"
#include "rala/ops.hpp"
#include "rala/random.hpp"

namespace {

using namespace rala;

void BM_Gemm(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  Rng rng(1);
  const Tensor<float> a = normal_tensor<float>({n, n}, 1.0f, rng);
  const Tensor<float> b = normal_tensor<float>({n, n}, 1.0f, rng);
  Tensor<float> c({n, n});
  for (auto _ : state) {
    gemm<float>(n, n, n, a.ptr(), b.ptr(), c.ptr(), false);
    benchmark::DoNotOptimize(c.ptr());
  }
  state.counters["GFLOPS"] =
      benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Gemm)->RangeMultiplier(2)->Range(32, 256);

void BM_GemmNt(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  Rng rng(2);
  const Tensor<float> a = normal_tensor<float>({n, n}, 1.0f, rng);
  const Tensor<float> b = normal_tensor<float>({n, n}, 1.0f, rng);
  Tensor<float> c({n, n});
  for (auto _ : state) {
    gemm_nt<float>(n, n, n, a.ptr(), b.ptr(), c.ptr(), false);
    benchmark::DoNotOptimize(c.ptr());
  }
}
BENCHMARK(BM_GemmNt)->Arg(64)->Arg(256);

// One attention sublayer over a [1, t, 64] input, no gradients.
void attention_bench(benchmark::State& state, AttentionKind kind, bool bidirectional) {
  const std::int64_t t = state.range(0);
  AttentionBench spec;
  spec.kind = kind;
  spec.bidirectional = bidirectional;
  const EncodeFn encode = attention_encode_fn(spec);
  Rng rng(3);
  const Tensor<float> x = normal_tensor<float>({1, t, spec.cfg.d_model}, 1.0f, rng);
  const Lengths lengths{t};
  for (auto _ : state) encode(x, lengths);
  state.SetItemsProcessed(state.iterations() * t);
}

void BM_AttentionMha(benchmark::State& s) { attention_bench(s, AttentionKind::kMha, false); }
void BM_AttentionLca(benchmark::State& s) { attention_bench(s, AttentionKind::kLcaGt, false); }
void BM_AttentionRwkvUni(benchmark::State& s) { attention_bench(s, AttentionKind::kRwkv, false); }
void BM_AttentionRwkvBi(benchmark::State& s) { attention_bench(s, AttentionKind::kRwkv, true); }
void BM_AttentionMamba2Bi(benchmark::State& s) { attention_bench(s, AttentionKind::kMamba2, true); }
BENCHMARK(BM_AttentionMha)->RangeMultiplier(4)->Range(128, 2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionLca)->RangeMultiplier(4)->Range(128, 8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionRwkvUni)->RangeMultiplier(4)->Range(128, 8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionRwkvBi)->RangeMultiplier(4)->Range(128, 8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionMamba2Bi)->RangeMultiplier(4)->Range(128, 8192)->Unit(benchmark::kMillisecond);

void BM_CtcLossBackward(benchmark::State& state) {
  const std::int64_t t = state.range(0), classes = 32, n_labels = t / 4;
  Rng rng(4);
  const Tensor<double> logits = normal_tensor<double>({1, t, classes}, 1.0, rng);
  std::vector<std::vector<int>> labels(1);
  for (std::int64_t i = 0; i < n_labels; ++i) labels[0].push_back(1 + static_cast<int>(i % (classes - 1)));
  for (auto _ : state) {
    Var<double> x(logits, true);
    Var<double> loss = ctc_loss(log_softmax_lastdim(x), labels);
    backward(loss);
    benchmark::DoNotOptimize(x.grad().ptr());
  }
}
BENCHMARK(BM_CtcLossBackward)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
