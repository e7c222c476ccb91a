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
#include <vector>

#include "rala/autograd.hpp"

namespace rala {

// lr(step) = peak * min(step / warmup, sqrt(warmup / step)), step >= 1.
double lr_at(std::int64_t step, double peak, std::int64_t warmup);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping. Parameters without a gradient are skipped.
template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm);

template <typename T>
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(ParamList<T> params) : Adam(std::move(params), Options{}) {}
  Adam(ParamList<T> params, Options opt);

  // One update at learning rate lr for every parameter that has a gradient.
  void step(double lr);
  std::int64_t steps() const { return t_; }
  const ParamList<T>& params() const { return params_; }

  // Moment buffers, in parameter order (for checkpointing).
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParamList<T> params_;
  Options opt_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace rala
