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

#include "rala/attention_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace rala {

namespace {

struct Geometry {
  std::int64_t batch, t_ext, d, heads, hd, n_global;
};

Geometry check_geometry(const Shape& qs, const Shape& ks, const Shape& vs, const Shape& bs,
                        std::int64_t n_heads, const AttentionPattern& pat) {
  if (qs.size() != 3 || qs != ks || qs != vs) {
    throw ShapeError("attention: q/k/v shapes " + shape_str(qs) + ", " + shape_str(ks) + ", " +
                     shape_str(vs));
  }
  if (n_heads < 1 || qs[2] % n_heads != 0) {
    throw ShapeError("attention: d_model " + std::to_string(qs[2]) + " not divisible by " +
                     std::to_string(n_heads) + " heads");
  }
  if (pat.n_global < 0 || pat.n_global >= qs[1]) throw ShapeError("attention: bad n_global");
  if (bs != Shape{n_heads, 2 * pat.max_offset + 1}) {
    throw ShapeError("attention: rel_bias shape " + shape_str(bs));
  }
  return {qs[0], qs[1], qs[2], n_heads, qs[2] / n_heads, pat.n_global};
}

// Visits allowed key indices (extended coordinates) of query row i, passing
// (j, bias index or -1).
template <typename F>
void for_each_key(std::int64_t i, std::int64_t len, const Geometry& g, const AttentionPattern& pat,
                  F&& f) {
  const std::int64_t G = g.n_global;
  if (i < G) {
    for (std::int64_t j = 0; j < G + len; ++j) f(j, std::int64_t{-1});
    return;
  }
  for (std::int64_t j = 0; j < G; ++j) f(j, std::int64_t{-1});
  const std::int64_t pi = i - G;
  std::int64_t lo = 0, hi = len - 1;
  if (pat.left >= 0) lo = std::max(lo, pi - pat.left);
  if (pat.right >= 0) hi = std::min(hi, pi + pat.right);
  if (pat.causal) hi = std::min(hi, pi);
  for (std::int64_t pj = lo; pj <= hi; ++pj) {
    const std::int64_t off = std::clamp(pj - pi, -pat.max_offset, pat.max_offset);
    f(G + pj, off + pat.max_offset);
  }
}

}  // namespace

template <typename T>
Var<T> attention_core(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Var<T>& rel_bias,
                      std::int64_t n_heads, const AttentionPattern& pat, const Lengths& lengths) {
  const Geometry g = check_geometry(q.shape(), k.shape(), v.shape(), rel_bias.shape(), n_heads, pat);
  const Lengths lens =
      resolve_lengths(lengths, Shape{g.batch, g.t_ext - g.n_global});
  const T scale = T(1) / std::sqrt(static_cast<T>(g.hd));
  Tensor<T> out(q.shape());
  auto lse = std::make_shared<std::vector<T>>(static_cast<std::size_t>(g.batch * g.heads * g.t_ext),
                                              T(0));
  const T* qp = q.value().ptr();
  const T* kp = k.value().ptr();
  const T* vp = v.value().ptr();
  const T* bp = rel_bias.value().ptr();
  const std::int64_t nb = 2 * pat.max_offset + 1;
  std::vector<T> scores(static_cast<std::size_t>(g.t_ext));
  std::vector<std::int64_t> keys(static_cast<std::size_t>(g.t_ext));
  std::vector<T> acc(static_cast<std::size_t>(g.hd));
  // one head's keys and values, packed [t_ext, hd]
  std::vector<T> kh(static_cast<std::size_t>(g.t_ext * g.hd)), vh(kh.size());

  for (std::int64_t b = 0; b < g.batch; ++b) {
    const std::int64_t len = lens[static_cast<std::size_t>(b)];
    const std::int64_t rows = g.n_global + len;
    for (std::int64_t h = 0; h < g.heads; ++h) {
      const std::int64_t co = h * g.hd;
      for (std::int64_t j = 0; j < rows; ++j) {
        std::copy_n(kp + (b * g.t_ext + j) * g.d + co, g.hd, kh.data() + j * g.hd);
        std::copy_n(vp + (b * g.t_ext + j) * g.d + co, g.hd, vh.data() + j * g.hd);
      }
      for (std::int64_t i = 0; i < rows; ++i) {
        const T* qi = qp + (b * g.t_ext + i) * g.d + co;
        std::int64_t n = 0;
        T mx = -std::numeric_limits<T>::infinity();
        for_each_key(i, len, g, pat, [&](std::int64_t j, std::int64_t bi) {
          const T* kj = kh.data() + j * g.hd;
          T s = 0;
          for (std::int64_t c = 0; c < g.hd; ++c) s += qi[c] * kj[c];
          s = s * scale + (bi >= 0 ? bp[h * nb + bi] : T(0));
          scores[static_cast<std::size_t>(n)] = s;
          keys[static_cast<std::size_t>(n)] = j;
          mx = std::max(mx, s);
          ++n;
        });
        std::fill(acc.begin(), acc.end(), T(0));
        T l = 0;
        for (std::int64_t m = 0; m < n; ++m) {
          const T p = std::exp(scores[static_cast<std::size_t>(m)] - mx);
          l += p;
          const T* vj = vh.data() + keys[static_cast<std::size_t>(m)] * g.hd;
          for (std::int64_t c = 0; c < g.hd; ++c) acc[static_cast<std::size_t>(c)] += p * vj[c];
        }
        T* oi = out.ptr() + (b * g.t_ext + i) * g.d + co;
        const T inv = T(1) / l;
        for (std::int64_t c = 0; c < g.hd; ++c) oi[c] = acc[static_cast<std::size_t>(c)] * inv;
        (*lse)[static_cast<std::size_t>((b * g.heads + h) * g.t_ext + i)] = mx + std::log(l);
      }
    }
  }

  return make_result<T>(
      std::move(out), {q, k, v, rel_bias},
      [q, k, v, rel_bias, g, pat, lens, lse, scale, nb](Node<T>& self) {
        const T* qp = q.value().ptr();
        const T* kp = k.value().ptr();
        const T* vp = v.value().ptr();
        const T* bp = rel_bias.value().ptr();
        const T* op = self.value.ptr();
        const T* gp = self.grad.ptr();
        Tensor<T> gq(q.shape()), gk(k.shape()), gv(v.shape()), gb(rel_bias.shape());
        for (std::int64_t b = 0; b < g.batch; ++b) {
          const std::int64_t len = lens[static_cast<std::size_t>(b)];
          const std::int64_t rows = g.n_global + len;
          for (std::int64_t h = 0; h < g.heads; ++h) {
            const std::int64_t co = h * g.hd;
            for (std::int64_t i = 0; i < rows; ++i) {
              const std::int64_t ri = (b * g.t_ext + i) * g.d + co;
              const T* qi = qp + ri;
              const T* doi = gp + ri;
              const T* oi = op + ri;
              T* dqi = gq.ptr() + ri;
              T dsum = 0;
              for (std::int64_t c = 0; c < g.hd; ++c) dsum += doi[c] * oi[c];
              const T li = (*lse)[static_cast<std::size_t>((b * g.heads + h) * g.t_ext + i)];
              for_each_key(i, len, g, pat, [&](std::int64_t j, std::int64_t bi) {
                const std::int64_t rj = (b * g.t_ext + j) * g.d + co;
                const T* kj = kp + rj;
                const T* vj = vp + rj;
                T s = 0, dp = 0;
                for (std::int64_t c = 0; c < g.hd; ++c) {
                  s += qi[c] * kj[c];
                  dp += doi[c] * vj[c];
                }
                s = s * scale + (bi >= 0 ? bp[h * nb + bi] : T(0));
                const T p = std::exp(s - li);
                const T ds = p * (dp - dsum);
                T* dkj = gk.ptr() + rj;
                T* dvj = gv.ptr() + rj;
                for (std::int64_t c = 0; c < g.hd; ++c) {
                  dqi[c] += scale * ds * kj[c];
                  dkj[c] += scale * ds * qi[c];
                  dvj[c] += p * doi[c];
                }
                if (bi >= 0) gb[h * nb + bi] += ds;
              });
            }
          }
        }
        q.node()->accumulate(gq);
        k.node()->accumulate(gk);
        v.node()->accumulate(gv);
        rel_bias.node()->accumulate(gb);
      });
}

template <typename T>
Tensor<T> attention_probs(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& rel_bias,
                          std::int64_t n_heads, const AttentionPattern& pat,
                          const Lengths& lengths) {
  const Geometry g = check_geometry(q.shape(), k.shape(), k.shape(), rel_bias.shape(), n_heads, pat);
  const Lengths lens = resolve_lengths(lengths, Shape{g.batch, g.t_ext - g.n_global});
  const T scale = T(1) / std::sqrt(static_cast<T>(g.hd));
  const std::int64_t nb = 2 * pat.max_offset + 1;
  Tensor<T> probs(Shape{g.batch, g.heads, g.t_ext, g.t_ext});
  for (std::int64_t b = 0; b < g.batch; ++b) {
    const std::int64_t len = lens[static_cast<std::size_t>(b)];
    for (std::int64_t h = 0; h < g.heads; ++h) {
      for (std::int64_t i = 0; i < g.n_global + len; ++i) {
        T* row = probs.ptr() + ((b * g.heads + h) * g.t_ext + i) * g.t_ext;
        std::vector<std::pair<std::int64_t, T>> sc;
        T mx = -std::numeric_limits<T>::infinity();
        for_each_key(i, len, g, pat, [&](std::int64_t j, std::int64_t bi) {
          T s = 0;
          for (std::int64_t c = 0; c < g.hd; ++c) {
            s += q[(b * g.t_ext + i) * g.d + h * g.hd + c] * k[(b * g.t_ext + j) * g.d + h * g.hd + c];
          }
          s = s * scale + (bi >= 0 ? rel_bias[h * nb + bi] : T(0));
          sc.emplace_back(j, s);
          mx = std::max(mx, s);
        });
        T l = 0;
        for (auto& [j, s] : sc) {
          s = std::exp(s - mx);
          l += s;
        }
        for (auto& [j, s] : sc) row[j] = s / l;
      }
    }
  }
  return probs;
}

template Var<float> attention_core(const Var<float>&, const Var<float>&, const Var<float>&,
                                   const Var<float>&, std::int64_t, const AttentionPattern&,
                                   const Lengths&);
template Var<double> attention_core(const Var<double>&, const Var<double>&, const Var<double>&,
                                    const Var<double>&, std::int64_t, const AttentionPattern&,
                                    const Lengths&);
template Tensor<float> attention_probs(const Tensor<float>&, const Tensor<float>&,
                                       const Tensor<float>&, std::int64_t,
                                       const AttentionPattern&, const Lengths&);
template Tensor<double> attention_probs(const Tensor<double>&, const Tensor<double>&,
                                        const Tensor<double>&, std::int64_t,
                                        const AttentionPattern&, const Lengths&);

}  // namespace rala
