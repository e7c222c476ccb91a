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

#include "rala/optim.hpp"

#include <algorithm>
#include <cmath>

namespace rala {

double lr_at(std::int64_t step, double peak, std::int64_t warmup) {
  if (step < 1) throw Error("lr_at: step must be >= 1");
  if (warmup < 1) throw Error("lr_at: warmup must be >= 1");
  const double s = static_cast<double>(step), w = static_cast<double>(warmup);
  return peak * std::min(s / w, std::sqrt(w / s));
}

template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    if (!p.var.has_grad()) continue;
    for (T g : p.var.grad().data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (const auto& p : params) {
      if (!p.var.has_grad()) continue;
      for (T& g : p.var.node()->grad.data()) g = static_cast<T>(static_cast<double>(g) * f);
    }
  }
  return norm;
}

template <typename T>
Adam<T>::Adam(ParamList<T> params, Options opt) : params_(std::move(params)), opt_(opt) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<T> var = params_[i].var;
    if (!var.has_grad()) continue;
    const auto g = var.grad().data();
    auto w = var.mutable_value().data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk;
      const double vk = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = lr * (mk / bc1) / (std::sqrt(vk / bc2) + opt_.eps);
      w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
    }
  }
}

template double clip_grad_norm(const ParamList<float>&, double);
template double clip_grad_norm(const ParamList<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace rala
