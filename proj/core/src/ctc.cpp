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

#include "rala/ctc.hpp"

#include <cmath>
#include <limits>

namespace rala {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct CtcTables {
  std::vector<int> ext;          // blank-interleaved labels
  std::vector<double> alpha;     // [t, s]
  std::vector<double> beta;      // [t, s]
  double log_p = 0;
};

// alpha and beta both include the emission at their own frame.
template <typename T>
CtcTables ctc_tables(const T* lp, std::int64_t len, std::int64_t classes,
                     const std::vector<int>& labels) {
  CtcTables tb;
  tb.ext.push_back(0);
  for (int l : labels) {
    tb.ext.push_back(l);
    tb.ext.push_back(0);
  }
  const std::int64_t S = static_cast<std::int64_t>(tb.ext.size());
  auto emit = [&](std::int64_t t, std::int64_t s) {
    return static_cast<double>(lp[t * classes + tb.ext[static_cast<std::size_t>(s)]]);
  };
  auto skip_ok = [&](std::int64_t s) {
    return s >= 2 && tb.ext[static_cast<std::size_t>(s)] != 0 &&
           tb.ext[static_cast<std::size_t>(s)] != tb.ext[static_cast<std::size_t>(s - 2)];
  };
  tb.alpha.assign(static_cast<std::size_t>(len * S), kNegInf);
  tb.beta.assign(static_cast<std::size_t>(len * S), kNegInf);
  auto A = [&](std::int64_t t, std::int64_t s) -> double& { return tb.alpha[static_cast<std::size_t>(t * S + s)]; };
  auto Bt = [&](std::int64_t t, std::int64_t s) -> double& { return tb.beta[static_cast<std::size_t>(t * S + s)]; };
  A(0, 0) = emit(0, 0);
  if (S > 1) A(0, 1) = emit(0, 1);
  for (std::int64_t t = 1; t < len; ++t) {
    for (std::int64_t s = 0; s < S; ++s) {
      double a = A(t - 1, s);
      if (s >= 1) a = log_add(a, A(t - 1, s - 1));
      if (skip_ok(s)) a = log_add(a, A(t - 1, s - 2));
      A(t, s) = a == kNegInf ? kNegInf : a + emit(t, s);
    }
  }
  Bt(len - 1, S - 1) = emit(len - 1, S - 1);
  if (S > 1) Bt(len - 1, S - 2) = emit(len - 1, S - 2);
  for (std::int64_t t = len - 2; t >= 0; --t) {
    for (std::int64_t s = 0; s < S; ++s) {
      double b = Bt(t + 1, s);
      if (s + 1 < S) b = log_add(b, Bt(t + 1, s + 1));
      if (s + 2 < S && skip_ok(s + 2)) b = log_add(b, Bt(t + 1, s + 2));
      Bt(t, s) = b == kNegInf ? kNegInf : b + emit(t, s);
    }
  }
  tb.log_p = A(len - 1, S - 1);
  if (S > 1) tb.log_p = log_add(tb.log_p, A(len - 1, S - 2));
  return tb;
}

}  // namespace

std::int64_t ctc_min_frames(const std::vector<int>& labels) {
  std::int64_t n = static_cast<std::int64_t>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const std::vector<std::vector<int>>& labels,
                const Lengths& input_lengths) {
  if (log_probs.shape().size() != 3) throw ShapeError("ctc_loss expects [batch, time, classes]");
  const std::int64_t b = log_probs.dim(0), t = log_probs.dim(1), classes = log_probs.dim(2);
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw ShapeError("ctc_loss: " + std::to_string(labels.size()) + " label sequences for batch " +
                     std::to_string(b));
  }
  const Lengths lens = resolve_lengths(input_lengths, log_probs.shape());
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& lab = labels[static_cast<std::size_t>(i)];
    for (int l : lab) {
      if (l <= 0 || l >= classes) {
        throw DomainError("ctc_loss: label " + std::to_string(l) + " outside [1, " +
                          std::to_string(classes) + ")");
      }
    }
    const std::int64_t need = ctc_min_frames(lab);
    if (need > lens[static_cast<std::size_t>(i)]) {
      throw DomainError("ctc_loss: sequence " + std::to_string(i) + " has " +
                        std::to_string(lens[static_cast<std::size_t>(i)]) + " frames but " +
                        std::to_string(lab.size()) + " labels need at least " +
                        std::to_string(need));
    }
  }
  double total = 0;
  for (std::int64_t i = 0; i < b; ++i) {
    const CtcTables tb = ctc_tables(log_probs.value().ptr() + i * t * classes,
                                    lens[static_cast<std::size_t>(i)], classes,
                                    labels[static_cast<std::size_t>(i)]);
    total -= tb.log_p;
  }
  return make_result<T>(Tensor<T>::scalar(static_cast<T>(total)), {log_probs},
                        [log_probs, labels, lens, b, t, classes](Node<T>& self) {
    const double g = static_cast<double>(self.grad.item());
    Tensor<T> grad(log_probs.shape());
    for (std::int64_t i = 0; i < b; ++i) {
      const std::int64_t len = lens[static_cast<std::size_t>(i)];
      const T* lp = log_probs.value().ptr() + i * t * classes;
      const CtcTables tb = ctc_tables(lp, len, classes, labels[static_cast<std::size_t>(i)]);
      const std::int64_t S = static_cast<std::int64_t>(tb.ext.size());
      for (std::int64_t s0 = 0; s0 < len; ++s0) {
        T* row = grad.ptr() + (i * t + s0) * classes;
        for (std::int64_t s = 0; s < S; ++s) {
          const double a = tb.alpha[static_cast<std::size_t>(s0 * S + s)];
          const double bb = tb.beta[static_cast<std::size_t>(s0 * S + s)];
          if (a == kNegInf || bb == kNegInf) continue;
          const int k = tb.ext[static_cast<std::size_t>(s)];
          const double occ = std::exp(a + bb - static_cast<double>(lp[s0 * classes + k]) - tb.log_p);
          row[k] = static_cast<T>(static_cast<double>(row[k]) - g * occ);
        }
      }
    }
    log_probs.node()->accumulate(grad);
  });
}

template Var<float> ctc_loss(const Var<float>&, const std::vector<std::vector<int>>&, const Lengths&);
template Var<double> ctc_loss(const Var<double>&, const std::vector<std::vector<int>>&,
                              const Lengths&);

}  // namespace rala
