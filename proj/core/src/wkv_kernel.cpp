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

#include "rala/wkv_kernel.hpp"

#include <cmath>
#include <memory>

namespace rala {

namespace {

struct WkvGeom {
  std::int64_t batch, time, d, heads, hd;
};

// Row accessor for the head slice of a [batch, time, d] tensor.
template <typename T>
inline const T* head_row(const T* base, const WkvGeom& g, std::int64_t b, std::int64_t t,
                         std::int64_t h) {
  return base + (b * g.time + t) * g.d + h * g.hd;
}

template <typename T>
void seq_forward(const WkvGeom& g, std::int64_t b, std::int64_t h, std::int64_t len, const T* r,
                 const T* k, const T* v, const T* lw, const T* u, double* S, T* y,
                 std::vector<double>* history) {
  const std::int64_t n = g.hd;
  std::vector<double> acc(static_cast<std::size_t>(n));
  const T* uh = u + h * n;
  for (std::int64_t t = 0; t < len; ++t) {
    const T* rt = head_row(r, g, b, t, h);
    const T* kt = head_row(k, g, b, t, h);
    const T* vt = head_row(v, g, b, t, h);
    const T* wt = head_row(lw, g, b, t, h);
    if (history) history->insert(history->end(), S, S + n * n);
    double bonus = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      bonus += (static_cast<double>(rt[i]) * static_cast<double>(uh[i])) * static_cast<double>(kt[i]);
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      const double ri = rt[i];
      const double* Si = S + i * n;
      for (std::int64_t j = 0; j < n; ++j) acc[static_cast<std::size_t>(j)] += ri * Si[j];
    }
    T* yt = y + (b * g.time + t) * g.d + h * n;
    for (std::int64_t j = 0; j < n; ++j) {
      yt[j] = static_cast<T>(acc[static_cast<std::size_t>(j)] + bonus * static_cast<double>(vt[j]));
    }
    for (std::int64_t i = 0; i < n; ++i) {
      const double w = std::exp(static_cast<double>(wt[i]));
      const double ki = kt[i];
      double* Si = S + i * n;
      for (std::int64_t j = 0; j < n; ++j) Si[j] = w * Si[j] + ki * static_cast<double>(vt[j]);
    }
  }
}

template <typename T>
void chunk_forward(const WkvGeom& g, std::int64_t b, std::int64_t h, std::int64_t len,
                   std::int64_t chunk, const T* r, const T* k, const T* v, const T* lw, const T* u,
                   double* S, T* y) {
  const std::int64_t n = g.hd;
  const T* uh = u + h * n;
  std::vector<double> lam;   // [(L+1) * n] cumulative log decay within the chunk
  std::vector<double> acc(static_cast<std::size_t>(n)), intra(static_cast<std::size_t>(n));
  std::vector<double> snew(static_cast<std::size_t>(n * n));
  for (std::int64_t c0 = 0; c0 < len; c0 += chunk) {
    const std::int64_t L = std::min(chunk, len - c0);
    lam.assign(static_cast<std::size_t>((L + 1) * n), 0.0);
    for (std::int64_t s = 0; s < L; ++s) {
      const T* ws = head_row(lw, g, b, c0 + s, h);
      for (std::int64_t i = 0; i < n; ++i) {
        lam[static_cast<std::size_t>((s + 1) * n + i)] =
            lam[static_cast<std::size_t>(s * n + i)] + static_cast<double>(ws[i]);
      }
    }
    for (std::int64_t a = 0; a < L; ++a) {
      const T* ra = head_row(r, g, b, c0 + a, h);
      const T* ka = head_row(k, g, b, c0 + a, h);
      const T* va = head_row(v, g, b, c0 + a, h);
      const double* lam_a = lam.data() + a * n;
      // carried state, decayed to just before frame a
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t i = 0; i < n; ++i) {
        const double ri = static_cast<double>(ra[i]) * std::exp(lam_a[i]);
        const double* Si = S + i * n;
        for (std::int64_t j = 0; j < n; ++j) acc[static_cast<std::size_t>(j)] += ri * Si[j];
      }
      // decay-weighted scores against earlier frames of this chunk
      std::fill(intra.begin(), intra.end(), 0.0);
      for (std::int64_t s = 0; s < a; ++s) {
        const T* ks = head_row(k, g, b, c0 + s, h);
        const T* vs = head_row(v, g, b, c0 + s, h);
        const double* lam_s1 = lam.data() + (s + 1) * n;
        double score = 0;
        for (std::int64_t i = 0; i < n; ++i) {
          score += static_cast<double>(ra[i]) * static_cast<double>(ks[i]) *
                   std::exp(lam_a[i] - lam_s1[i]);
        }
        for (std::int64_t j = 0; j < n; ++j) {
          intra[static_cast<std::size_t>(j)] += score * static_cast<double>(vs[j]);
        }
      }
      double bonus = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        bonus += (static_cast<double>(ra[i]) * static_cast<double>(uh[i])) * static_cast<double>(ka[i]);
      }
      for (std::int64_t j = 0; j < n; ++j) {
        intra[static_cast<std::size_t>(j)] += bonus * static_cast<double>(va[j]);
      }
      T* ya = y + (b * g.time + c0 + a) * g.d + h * n;
      for (std::int64_t j = 0; j < n; ++j) {
        ya[j] = static_cast<T>(acc[static_cast<std::size_t>(j)] + intra[static_cast<std::size_t>(j)]);
      }
    }
    // state at chunk end
    const double* lam_end = lam.data() + L * n;
    for (std::int64_t i = 0; i < n; ++i) {
      const double e = std::exp(lam_end[i]);
      for (std::int64_t j = 0; j < n; ++j) snew[static_cast<std::size_t>(i * n + j)] = e * S[i * n + j];
    }
    for (std::int64_t s = 0; s < L; ++s) {
      const T* ks = head_row(k, g, b, c0 + s, h);
      const T* vs = head_row(v, g, b, c0 + s, h);
      const double* lam_s1 = lam.data() + (s + 1) * n;
      for (std::int64_t i = 0; i < n; ++i) {
        const double dk = std::exp(lam_end[i] - lam_s1[i]) * static_cast<double>(ks[i]);
        double* row = snew.data() + i * n;
        for (std::int64_t j = 0; j < n; ++j) row[j] += dk * static_cast<double>(vs[j]);
      }
    }
    std::copy(snew.begin(), snew.end(), S);
  }
}

}  // namespace

template <typename T>
ScanResult<T> wkv_scan(const Var<T>& r, const Var<T>& k, const Var<T>& v, const Var<T>& log_w,
                       const Var<T>& u, const Var<T>& s0, std::int64_t n_heads,
                       std::int64_t chunk, const Lengths& lengths) {
  const Shape& rs = r.shape();
  if (rs.size() != 3 || k.shape() != rs || v.shape() != rs || log_w.shape() != rs) {
    throw ShapeError("wkv_scan: r/k/v/log_w shapes must match, got " + shape_str(rs) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()) + ", " +
                     shape_str(log_w.shape()));
  }
  if (n_heads < 1 || rs[2] % n_heads != 0) throw ShapeError("wkv_scan: bad head count");
  if (chunk < 0) throw Error("wkv_scan: chunk must be >= 0");
  const WkvGeom g{rs[0], rs[1], rs[2], n_heads, rs[2] / n_heads};
  if (u.shape() != Shape{g.d}) throw ShapeError("wkv_scan: u shape " + shape_str(u.shape()));
  const Shape state_shape{g.batch, g.heads, g.hd, g.hd};
  if (s0.shape() != state_shape) {
    throw ShapeError("wkv_scan: state shape " + shape_str(s0.shape()) + ", expected " +
                     shape_str(state_shape));
  }
  const Lengths lens = resolve_lengths(lengths, rs);
  for (const Var<T>* in : {&r, &k, &v, &log_w}) {
    for (T x : in->value().data()) {
      if (!std::isfinite(x)) throw DomainError("wkv_scan: non-finite input");
    }
  }

  const std::int64_t ny = r.numel();
  const std::int64_t ns = s0.numel();
  Tensor<T> packed(Shape{ny + ns});
  const std::int64_t hh = g.hd * g.hd;
  std::vector<double> S(static_cast<std::size_t>(hh));
  for (std::int64_t b = 0; b < g.batch; ++b) {
    const std::int64_t len = lens[static_cast<std::size_t>(b)];
    for (std::int64_t h = 0; h < g.heads; ++h) {
      const T* s0p = s0.value().ptr() + (b * g.heads + h) * hh;
      for (std::int64_t i = 0; i < hh; ++i) S[static_cast<std::size_t>(i)] = s0p[i];
      if (chunk == 0) {
        seq_forward(g, b, h, len, r.value().ptr(), k.value().ptr(), v.value().ptr(),
                    log_w.value().ptr(), u.value().ptr(), S.data(), packed.ptr(), nullptr);
      } else {
        chunk_forward(g, b, h, len, chunk, r.value().ptr(), k.value().ptr(), v.value().ptr(),
                      log_w.value().ptr(), u.value().ptr(), S.data(), packed.ptr());
      }
      T* sout = packed.ptr() + ny + (b * g.heads + h) * hh;
      for (std::int64_t i = 0; i < hh; ++i) sout[i] = static_cast<T>(S[static_cast<std::size_t>(i)]);
    }
  }

  Var<T> pk = make_result<T>(std::move(packed), {r, k, v, log_w, u, s0},
                             [r, k, v, log_w, u, s0, g, lens, ny](Node<T>& self) {
    const std::int64_t n = g.hd, hh = n * n;
    const T* gy = self.grad.ptr();
    const T* gs = self.grad.ptr() + ny;
    Tensor<T> dr(r.shape()), dk(k.shape()), dv(v.shape()), dlw(log_w.shape()), du(u.shape()),
        ds0(s0.shape());
    std::vector<double> S(static_cast<std::size_t>(hh)), G(static_cast<std::size_t>(hh));
    std::vector<double> hist;
    std::vector<double> du_acc(static_cast<std::size_t>(g.d), 0.0);
    Tensor<T> scratch(r.shape());
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const std::int64_t len = lens[static_cast<std::size_t>(b)];
      for (std::int64_t h = 0; h < g.heads; ++h) {
        const T* s0p = s0.value().ptr() + (b * g.heads + h) * hh;
        for (std::int64_t i = 0; i < hh; ++i) S[static_cast<std::size_t>(i)] = s0p[i];
        hist.clear();
        hist.reserve(static_cast<std::size_t>(len * hh));
        seq_forward(g, b, h, len, r.value().ptr(), k.value().ptr(), v.value().ptr(),
                    log_w.value().ptr(), u.value().ptr(), S.data(), scratch.ptr(), &hist);
        const T* gsp = gs + (b * g.heads + h) * hh;
        for (std::int64_t i = 0; i < hh; ++i) G[static_cast<std::size_t>(i)] = gsp[i];
        const T* uh = u.value().ptr() + h * n;
        for (std::int64_t t = len - 1; t >= 0; --t) {
          const std::int64_t row = (b * g.time + t) * g.d + h * n;
          const T* rt = r.value().ptr() + row;
          const T* kt = k.value().ptr() + row;
          const T* vt = v.value().ptr() + row;
          const T* wt = log_w.value().ptr() + row;
          const T* dyt = gy + row;
          const double* Sp = hist.data() + t * hh;
          double dyv = 0, bonus = 0;
          for (std::int64_t j = 0; j < n; ++j) dyv += static_cast<double>(dyt[j]) * vt[j];
          for (std::int64_t i = 0; i < n; ++i) bonus += static_cast<double>(rt[i]) * uh[i] * kt[i];
          for (std::int64_t i = 0; i < n; ++i) {
            const double ri = rt[i], ki = kt[i], ui = uh[i];
            const double w = std::exp(static_cast<double>(wt[i]));
            double sdy = 0, gv = 0, gsp2 = 0;
            const double* Spi = Sp + i * n;
            double* Gi = G.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
              sdy += dyt[j] * Spi[j];
              gv += Gi[j] * vt[j];
              gsp2 += Gi[j] * Spi[j];
            }
            dr[row + i] = static_cast<T>(sdy + ui * ki * dyv);
            du_acc[static_cast<std::size_t>(h * n + i)] += ri * ki * dyv;
            dk[row + i] = static_cast<T>(ri * ui * dyv + gv);
            dlw[row + i] = static_cast<T>(w * gsp2);
          }
          for (std::int64_t j = 0; j < n; ++j) {
            double gk = 0;
            for (std::int64_t i = 0; i < n; ++i) gk += G[static_cast<std::size_t>(i * n + j)] * kt[i];
            dv[row + j] = static_cast<T>(bonus * dyt[j] + gk);
          }
          for (std::int64_t i = 0; i < n; ++i) {
            const double w = std::exp(static_cast<double>(wt[i]));
            const double ri = rt[i];
            double* Gi = G.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) Gi[j] = w * Gi[j] + ri * dyt[j];
          }
        }
        T* dsp = ds0.ptr() + (b * g.heads + h) * hh;
        for (std::int64_t i = 0; i < hh; ++i) dsp[i] = static_cast<T>(G[static_cast<std::size_t>(i)]);
      }
    }
    for (std::int64_t i = 0; i < g.d; ++i) du[i] = static_cast<T>(du_acc[static_cast<std::size_t>(i)]);
    r.node()->accumulate(dr);
    k.node()->accumulate(dk);
    v.node()->accumulate(dv);
    log_w.node()->accumulate(dlw);
    u.node()->accumulate(du);
    s0.node()->accumulate(ds0);
  });
  return {unpack(pk, 0, rs), unpack(pk, ny, state_shape)};
}

template ScanResult<float> wkv_scan(const Var<float>&, const Var<float>&, const Var<float>&,
                                    const Var<float>&, const Var<float>&, const Var<float>&,
                                    std::int64_t, std::int64_t, const Lengths&);
template ScanResult<double> wkv_scan(const Var<double>&, const Var<double>&, const Var<double>&,
                                     const Var<double>&, const Var<double>&, const Var<double>&,
                                     std::int64_t, std::int64_t, const Lengths&);

}  // namespace rala
