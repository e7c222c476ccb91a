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

#include "rala/ssd_kernel.hpp"

#include <cmath>

namespace rala {

namespace {

struct SsdGeom {
  std::int64_t batch, time, heads, hd, n;
  std::int64_t di() const { return heads * hd; }
};

template <typename T>
struct SsdInputs {
  const T* x;
  const T* delta;
  const T* a_log;
  const T* b;
  const T* c;
};

// Per-frame log decay and scaled input for head h.
template <typename T>
inline double log_decay(const SsdGeom& g, const SsdInputs<T>& in, std::int64_t bi, std::int64_t t,
                        std::int64_t h) {
  const double dt = in.delta[(bi * g.time + t) * g.heads + h];
  return -dt * std::exp(static_cast<double>(in.a_log[h]));
}

template <typename T>
void seq_forward(const SsdGeom& g, const SsdInputs<T>& in, std::int64_t bi, std::int64_t h,
                 std::int64_t len, double* H, T* y, std::vector<double>* history) {
  const std::int64_t n = g.n, hd = g.hd;
  std::vector<double> acc(static_cast<std::size_t>(hd)), xdt(static_cast<std::size_t>(hd));
  for (std::int64_t t = 0; t < len; ++t) {
    if (history) history->insert(history->end(), H, H + n * hd);
    const double a = std::exp(log_decay(g, in, bi, t, h));
    const double dt = in.delta[(bi * g.time + t) * g.heads + h];
    const T* xt = in.x + (bi * g.time + t) * g.di() + h * hd;
    const T* bt = in.b + (bi * g.time + t) * n;
    const T* ct = in.c + (bi * g.time + t) * n;
    for (std::int64_t j = 0; j < hd; ++j) xdt[static_cast<std::size_t>(j)] = dt * xt[j];
    std::fill(acc.begin(), acc.end(), 0.0);
    double cb = 0;
    for (std::int64_t s = 0; s < n; ++s) {
      const double cs = ct[s];
      cb += cs * static_cast<double>(bt[s]);
      const double* Hs = H + s * hd;
      for (std::int64_t j = 0; j < hd; ++j) acc[static_cast<std::size_t>(j)] += cs * Hs[j];
    }
    T* yt = y + (bi * g.time + t) * g.di() + h * hd;
    for (std::int64_t j = 0; j < hd; ++j) {
      yt[j] = static_cast<T>(a * acc[static_cast<std::size_t>(j)] +
                             cb * xdt[static_cast<std::size_t>(j)]);
    }
    for (std::int64_t s = 0; s < n; ++s) {
      const double bs = bt[s];
      double* Hs = H + s * hd;
      for (std::int64_t j = 0; j < hd; ++j) Hs[j] = a * Hs[j] + bs * xdt[static_cast<std::size_t>(j)];
    }
  }
}

template <typename T>
void chunk_forward(const SsdGeom& g, const SsdInputs<T>& in, std::int64_t bi, std::int64_t h,
                   std::int64_t len, std::int64_t chunk, double* H, T* y) {
  const std::int64_t n = g.n, hd = g.hd;
  std::vector<double> lam, xdt;
  std::vector<double> acc(static_cast<std::size_t>(hd)), intra(static_cast<std::size_t>(hd));
  for (std::int64_t c0 = 0; c0 < len; c0 += chunk) {
    const std::int64_t L = std::min(chunk, len - c0);
    // lam[s+1] = summed log decay of frames 0..s of the chunk
    lam.assign(static_cast<std::size_t>(L + 1), 0.0);
    xdt.assign(static_cast<std::size_t>(L * hd), 0.0);
    for (std::int64_t s = 0; s < L; ++s) {
      lam[static_cast<std::size_t>(s + 1)] = lam[static_cast<std::size_t>(s)] + log_decay(g, in, bi, c0 + s, h);
      const double dt = in.delta[(bi * g.time + c0 + s) * g.heads + h];
      const T* xs = in.x + (bi * g.time + c0 + s) * g.di() + h * hd;
      for (std::int64_t j = 0; j < hd; ++j) xdt[static_cast<std::size_t>(s * hd + j)] = dt * xs[j];
    }
    for (std::int64_t a = 0; a < L; ++a) {
      const T* ca = in.c + (bi * g.time + c0 + a) * n;
      const double la = lam[static_cast<std::size_t>(a + 1)];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t s = 0; s < n; ++s) {
        const double cs = ca[s];
        const double* Hs = H + s * hd;
        for (std::int64_t j = 0; j < hd; ++j) acc[static_cast<std::size_t>(j)] += cs * Hs[j];
      }
      const double carry = std::exp(la);
      std::fill(intra.begin(), intra.end(), 0.0);
      for (std::int64_t s = 0; s <= a; ++s) {
        const T* bs = in.b + (bi * g.time + c0 + s) * n;
        double cb = 0;
        for (std::int64_t m = 0; m < n; ++m) cb += static_cast<double>(ca[m]) * static_cast<double>(bs[m]);
        const double wgt = cb * std::exp(la - lam[static_cast<std::size_t>(s + 1)]);
        const double* xs = xdt.data() + s * hd;
        for (std::int64_t j = 0; j < hd; ++j) intra[static_cast<std::size_t>(j)] += wgt * xs[j];
      }
      T* ya = y + (bi * g.time + c0 + a) * g.di() + h * hd;
      for (std::int64_t j = 0; j < hd; ++j) {
        ya[j] = static_cast<T>(carry * acc[static_cast<std::size_t>(j)] +
                               intra[static_cast<std::size_t>(j)]);
      }
    }
    const double lend = lam[static_cast<std::size_t>(L)];
    const double e = std::exp(lend);
    for (std::int64_t i = 0; i < n * hd; ++i) H[i] = e * H[i];
    for (std::int64_t s = 0; s < L; ++s) {
      const T* bs = in.b + (bi * g.time + c0 + s) * n;
      const double dec = std::exp(lend - lam[static_cast<std::size_t>(s + 1)]);
      const double* xs = xdt.data() + s * hd;
      for (std::int64_t m = 0; m < n; ++m) {
        const double coef = dec * static_cast<double>(bs[m]);
        double* Hm = H + m * hd;
        for (std::int64_t j = 0; j < hd; ++j) Hm[j] += coef * xs[j];
      }
    }
  }
}

}  // namespace

template <typename T>
ScanResult<T> ssd_scan(const Var<T>& x, const Var<T>& delta, const Var<T>& a_log, const Var<T>& b,
                       const Var<T>& c, const Var<T>& h0, std::int64_t chunk,
                       const Lengths& lengths) {
  if (x.shape().size() != 3 || delta.shape().size() != 3 || b.shape().size() != 3) {
    throw ShapeError("ssd_scan: x, delta, b, c must be rank 3");
  }
  const std::int64_t batch = x.dim(0), time = x.dim(1);
  const std::int64_t heads = delta.dim(2);
  const std::int64_t n = b.dim(2);
  if (heads < 1 || x.dim(2) % heads != 0) throw ShapeError("ssd_scan: channels not divisible by heads");
  const SsdGeom g{batch, time, heads, x.dim(2) / heads, n};
  if (delta.shape() != Shape{batch, time, heads} || b.shape() != Shape{batch, time, n} ||
      c.shape() != b.shape() || a_log.shape() != Shape{heads}) {
    throw ShapeError("ssd_scan: inconsistent shapes x " + shape_str(x.shape()) + ", delta " +
                     shape_str(delta.shape()) + ", b " + shape_str(b.shape()) + ", c " +
                     shape_str(c.shape()) + ", a_log " + shape_str(a_log.shape()));
  }
  const Shape state_shape{batch, heads, n, g.hd};
  if (h0.shape() != state_shape) {
    throw ShapeError("ssd_scan: state shape " + shape_str(h0.shape()) + ", expected " +
                     shape_str(state_shape));
  }
  if (chunk < 0) throw Error("ssd_scan: chunk must be >= 0");
  const Lengths lens = resolve_lengths(lengths, x.shape());
  for (const Var<T>* in : {&x, &delta, &b, &c}) {
    for (T v : in->value().data()) {
      if (!std::isfinite(v)) throw DomainError("ssd_scan: non-finite input");
    }
  }

  const std::int64_t ny = x.numel(), hn = n * g.hd;
  Tensor<T> packed(Shape{ny + h0.numel()});
  const SsdInputs<T> in{x.value().ptr(), delta.value().ptr(), a_log.value().ptr(), b.value().ptr(),
                        c.value().ptr()};
  std::vector<double> H(static_cast<std::size_t>(hn));
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    for (std::int64_t h = 0; h < heads; ++h) {
      const T* hp = h0.value().ptr() + (bi * heads + h) * hn;
      for (std::int64_t i = 0; i < hn; ++i) H[static_cast<std::size_t>(i)] = hp[i];
      const std::int64_t len = lens[static_cast<std::size_t>(bi)];
      if (chunk == 0) {
        seq_forward(g, in, bi, h, len, H.data(), packed.ptr(), nullptr);
      } else {
        chunk_forward(g, in, bi, h, len, chunk, H.data(), packed.ptr());
      }
      T* out = packed.ptr() + ny + (bi * heads + h) * hn;
      for (std::int64_t i = 0; i < hn; ++i) out[i] = static_cast<T>(H[static_cast<std::size_t>(i)]);
    }
  }

  Var<T> pk = make_result<T>(std::move(packed), {x, delta, a_log, b, c, h0},
                             [x, delta, a_log, b, c, h0, g, lens, ny](Node<T>& self) {
    const std::int64_t n = g.n, hd = g.hd, hn = n * hd;
    const T* gy = self.grad.ptr();
    const T* gs = self.grad.ptr() + ny;
    const SsdInputs<T> in{x.value().ptr(), delta.value().ptr(), a_log.value().ptr(),
                          b.value().ptr(), c.value().ptr()};
    Tensor<T> dx(x.shape()), ddelta(delta.shape()), dalog(a_log.shape()), db(b.shape()),
        dc(c.shape()), dh0(h0.shape());
    std::vector<double> dalog_acc(static_cast<std::size_t>(g.heads), 0.0);
    std::vector<double> db_acc(static_cast<std::size_t>(b.numel()), 0.0);
    std::vector<double> dc_acc(static_cast<std::size_t>(c.numel()), 0.0);
    std::vector<double> H(static_cast<std::size_t>(hn)), G(static_cast<std::size_t>(hn));
    std::vector<double> Hcur(static_cast<std::size_t>(hn)), hist;
    std::vector<double> xdt(static_cast<std::size_t>(hd)), dxdt(static_cast<std::size_t>(hd));
    Tensor<T> scratch(x.shape());
    for (std::int64_t bi = 0; bi < g.batch; ++bi) {
      const std::int64_t len = lens[static_cast<std::size_t>(bi)];
      for (std::int64_t h = 0; h < g.heads; ++h) {
        const T* hp = h0.value().ptr() + (bi * g.heads + h) * hn;
        for (std::int64_t i = 0; i < hn; ++i) H[static_cast<std::size_t>(i)] = hp[i];
        hist.clear();
        hist.reserve(static_cast<std::size_t>(len * hn));
        seq_forward(g, in, bi, h, len, H.data(), scratch.ptr(), &hist);
        const T* gsp = gs + (bi * g.heads + h) * hn;
        for (std::int64_t i = 0; i < hn; ++i) G[static_cast<std::size_t>(i)] = gsp[i];
        const double E = std::exp(static_cast<double>(a_log.value()[h]));
        for (std::int64_t t = len - 1; t >= 0; --t) {
          const std::int64_t frame = bi * g.time + t;
          const double dt = in.delta[frame * g.heads + h];
          const double a = std::exp(-dt * E);
          const T* xt = in.x + frame * g.di() + h * hd;
          const T* bt = in.b + frame * n;
          const T* ct = in.c + frame * n;
          const T* dyt = gy + frame * g.di() + h * hd;
          const double* Hp = hist.data() + t * hn;
          for (std::int64_t j = 0; j < hd; ++j) xdt[static_cast<std::size_t>(j)] = dt * xt[j];
          std::fill(dxdt.begin(), dxdt.end(), 0.0);
          double da = 0;
          for (std::int64_t m = 0; m < n; ++m) {
            const double bm = bt[m], cm = ct[m];
            const double* Hpm = Hp + m * hd;
            double* Gm = G.data() + m * hd;
            double dcm = 0, dbm = 0;
            for (std::int64_t j = 0; j < hd; ++j) {
              const double hcur = a * Hpm[j] + bm * xdt[static_cast<std::size_t>(j)];
              dcm += hcur * dyt[j];
              Gm[j] += cm * dyt[j];
              dbm += Gm[j] * xdt[static_cast<std::size_t>(j)];
              dxdt[static_cast<std::size_t>(j)] += Gm[j] * bm;
              da += Gm[j] * Hpm[j];
            }
            dc_acc[static_cast<std::size_t>(frame * n + m)] += dcm;
            db_acc[static_cast<std::size_t>(frame * n + m)] += dbm;
          }
          double ddt = 0;
          T* dxt = dx.ptr() + frame * g.di() + h * hd;
          for (std::int64_t j = 0; j < hd; ++j) {
            dxt[j] = static_cast<T>(dt * dxdt[static_cast<std::size_t>(j)]);
            ddt += static_cast<double>(xt[j]) * dxdt[static_cast<std::size_t>(j)];
          }
          const double dla = da * a;  // d/d(log a)
          ddt += dla * (-E);
          dalog_acc[static_cast<std::size_t>(h)] += dla * (-dt * E);
          ddelta[frame * g.heads + h] = static_cast<T>(ddt);
          for (auto& v : G) v *= a;
        }
        T* dhp = dh0.ptr() + (bi * g.heads + h) * hn;
        for (std::int64_t i = 0; i < hn; ++i) dhp[i] = static_cast<T>(G[static_cast<std::size_t>(i)]);
      }
    }
    for (std::int64_t h = 0; h < g.heads; ++h) dalog[h] = static_cast<T>(dalog_acc[static_cast<std::size_t>(h)]);
    for (std::int64_t i = 0; i < b.numel(); ++i) {
      db[i] = static_cast<T>(db_acc[static_cast<std::size_t>(i)]);
      dc[i] = static_cast<T>(dc_acc[static_cast<std::size_t>(i)]);
    }
    x.node()->accumulate(dx);
    delta.node()->accumulate(ddelta);
    a_log.node()->accumulate(dalog);
    b.node()->accumulate(db);
    c.node()->accumulate(dc);
    h0.node()->accumulate(dh0);
  });
  return {unpack(pk, 0, x.shape()), unpack(pk, ny, state_shape)};
}

template ScanResult<float> ssd_scan(const Var<float>&, const Var<float>&, const Var<float>&,
                                    const Var<float>&, const Var<float>&, const Var<float>&,
                                    std::int64_t, const Lengths&);
template ScanResult<double> ssd_scan(const Var<double>&, const Var<double>&, const Var<double>&,
                                     const Var<double>&, const Var<double>&, const Var<double>&,
                                     std::int64_t, const Lengths&);

}  // namespace rala
