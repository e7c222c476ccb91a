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

#include "rala/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <new>
#include <sstream>
#include <thread>

namespace rala {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Group {
  Tensor<float> x;
  Lengths lengths;
};

// Splits a group's sequences into `parts` contiguous sub-batches.
std::vector<Group> split_group(const Group& g, std::int64_t parts) {
  const std::int64_t n = g.x.dim(0), t = g.x.dim(1), d = g.x.dim(2);
  parts = std::min(parts, n);
  std::vector<Group> out;
  for (std::int64_t p = 0; p < parts; ++p) {
    const std::int64_t b = n * p / parts, e = n * (p + 1) / parts;
    Group s{Tensor<float>(Shape{e - b, t, d}), Lengths(g.lengths.begin() + b, g.lengths.begin() + e)};
    std::copy(g.x.ptr() + b * t * d, g.x.ptr() + e * t * d, s.x.ptr());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

BenchReport bench_throughput(const BenchConfig& cfg, const EncodeFn& encode, const std::string& model_name) {
  if (cfg.chunk_sizes.empty()) throw Error("bench: no chunk sizes");
  if (cfg.batch_size < 1 || cfg.repeats < 1 || cfg.warmup_queries < 0 || cfg.d_in < 1 || cfg.threads < 1) {
    throw Error("bench: batch_size, repeats and threads must be >= 1, warmup >= 0");
  }
  const std::int64_t largest = *std::max_element(cfg.chunk_sizes.begin(), cfg.chunk_sizes.end());
  const std::int64_t total = cfg.total_frames > 0 ? cfg.total_frames : cfg.batch_size * largest;
  Rng rng(cfg.seed);
  const Tensor<float> long_input = normal_tensor<float>({total, cfg.d_in}, 1.0f, rng);

  BenchReport report;
  report.model = model_name;
  report.threads = cfg.threads;
  for (std::int64_t chunk : cfg.chunk_sizes) {
    if (chunk < 1) throw Error("bench: chunk sizes must be >= 1");
    BenchCell cell;
    cell.chunk_size = chunk;
    cell.frames = total;
    cell.audio_minutes = audio_minutes(total);
    try {
      std::vector<Group> groups;
      for (std::int64_t begin = 0; begin < total; begin += chunk * cfg.batch_size) {
        const std::int64_t end = std::min(total, begin + chunk * cfg.batch_size);
        const std::int64_t n = (end - begin + chunk - 1) / chunk;
        const std::int64_t t_max = std::min(chunk, end - begin);
        Group g{Tensor<float>(Shape{n, t_max, cfg.d_in}), {}};
        for (std::int64_t i = 0; i < n; ++i) {
          const std::int64_t s = begin + i * chunk, e = std::min(end, s + chunk);
          std::copy(long_input.ptr() + s * cfg.d_in, long_input.ptr() + e * cfg.d_in,
                    g.x.ptr() + i * t_max * cfg.d_in);
          g.lengths.push_back(e - s);
        }
        groups.push_back(std::move(g));
      }
      std::vector<std::vector<Group>> parts;
      if (cfg.threads > 1) {
        for (const Group& g : groups) parts.push_back(split_group(g, cfg.threads));
      }
      auto run_group = [&](std::size_t i) {
        if (cfg.threads == 1) {
          encode(groups[i].x, groups[i].lengths);
          return;
        }
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex mu;
        for (const Group& sub : parts[i]) {
          pool.emplace_back([&, &sub = sub] {
            try {
              encode(sub.x, sub.lengths);
            } catch (...) {
              std::lock_guard lock(mu);
              err = std::current_exception();
            }
          });
        }
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
      };
      for (std::int64_t w = 0; w < cfg.warmup_queries; ++w) run_group(0);
      for (std::int64_t r = 0; r < cfg.repeats; ++r) {
        const auto t0 = Clock::now();
        for (std::size_t i = 0; i < groups.size(); ++i) run_group(i);
        const double s = seconds_since(t0);
        cell.wall_seconds.push_back(s);
        if (cfg.max_pass_seconds > 0 && s > cfg.max_pass_seconds) {
          throw Error("pass took " + std::to_string(s) + " s, over the budget");
        }
      }
      cell.min_seconds = *std::min_element(cell.wall_seconds.begin(), cell.wall_seconds.end());
      cell.max_seconds = *std::max_element(cell.wall_seconds.begin(), cell.wall_seconds.end());
      cell.median_seconds = median_of(cell.wall_seconds);
      cell.mps = cell.audio_minutes / cell.median_seconds;
    } catch (const std::bad_alloc&) {
      cell.failed = true;
      cell.failure = "out of memory";
    } catch (const Error& e) {
      cell.failed = true;
      cell.failure = e.what();
    }
    report.cells.push_back(std::move(cell));
  }

  std::vector<std::pair<std::int64_t, double>> pts;
  for (const auto& c : report.cells) {
    if (!c.failed) pts.emplace_back(c.chunk_size, c.median_seconds);
  }
  report.exponent = report.exponent_stderr = std::numeric_limits<double>::quiet_NaN();
  try {
    const ExponentFit f = fit_complexity_exponent(pts);
    report.exponent = f.slope;
    report.exponent_stderr = f.stderr_;
  } catch (const Error&) {
  }
  return report;
}

ExponentFit fit_complexity_exponent(const std::vector<std::pair<std::int64_t, double>>& timings) {
  std::vector<std::int64_t> lengths;
  for (const auto& [len, s] : timings) {
    if (len < 1 || !(s > 0)) throw Error("fit_complexity_exponent: lengths and times must be positive");
    lengths.push_back(len);
  }
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  if (lengths.size() < 3 || lengths.back() < 4 * lengths.front()) {
    throw Error("fit_complexity_exponent: need >= 3 distinct lengths spanning >= 4x");
  }
  const double n = static_cast<double>(timings.size());
  double mx = 0, my = 0;
  for (const auto& [len, s] : timings) {
    mx += std::log(static_cast<double>(len));
    my += std::log(s);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& [len, s] : timings) {
    const double dx = std::log(static_cast<double>(len)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(s) - my);
  }
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (const auto& [len, s] : timings) {
    const double r = std::log(s) - (f.intercept + f.slope * std::log(static_cast<double>(len)));
    rss += r * r;
  }
  f.stderr_ = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

EncodeFn encoder_encode_fn(const EncoderParams<float>& model, const LayerSchedule& schedule) {
  const LayerSchedule sched = schedule.size() == 0 ? model.cfg.default_schedule() : schedule;
  return [&model, sched](const Tensor<float>& x, const Lengths& lengths) {
    NoGradGuard guard;
    encoder_forward(model, Var<float>(x), lengths, sched);
  };
}

EncodeFn attention_encode_fn(const AttentionBench& spec, std::uint64_t seed) {
  EncoderConfig cfg = spec.cfg;
  cfg.attention_kind = spec.kind;
  cfg.bidirectional = spec.bidirectional;
  cfg.n_layers = 1;
  cfg.validate();
  Rng rng(seed);
  auto block = std::make_shared<ConformerBlockParams<float>>(ConformerBlockParams<float>::init(cfg, rng));
  const Direction mode = is_recurrent(cfg.attention_kind) && !cfg.bidirectional ? Direction::kL2R : Direction::kBi;
  // input already has width d_model; the sublayer sees it unchanged
  return [block, cfg, mode](const Tensor<float>& x, const Lengths& lengths) {
    NoGradGuard guard;
    const AttentionSublayer<float>& a = block->attn;
    Var<float> in(x);
    switch (a.kind) {
      case AttentionKind::kMha:
        mha_forward(a.mha, in, false, lengths);
        break;
      case AttentionKind::kLcaGt:
        lca_gt_forward(a.mha, a.lca, in, lengths);
        break;
      default:
        bidir_forward(a.dir, in, mode, lengths, cfg.scan_chunk);
        break;
    }
  };
}

std::vector<std::pair<std::int64_t, double>> time_lengths(const EncodeFn& encode, std::int64_t d_in,
                                                          const std::vector<std::int64_t>& lengths,
                                                          std::int64_t warmup, std::int64_t repeats,
                                                          std::uint64_t seed) {
  if (repeats < 1) throw Error("time_lengths: repeats must be >= 1");
  std::vector<std::pair<std::int64_t, double>> out;
  Rng rng(seed);
  for (std::int64_t len : lengths) {
    const Tensor<float> x = normal_tensor<float>({1, len, d_in}, 1.0f, rng);
    const Lengths lens{len};
    for (std::int64_t w = 0; w < warmup; ++w) encode(x, lens);
    std::vector<double> times;
    for (std::int64_t r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      encode(x, lens);
      times.push_back(seconds_since(t0));
    }
    out.emplace_back(len, median_of(times));
  }
  return out;
}

std::string bench_csv(const std::vector<BenchReport>& reports) {
  std::ostringstream o;
  o << "model,chunk_size,frames,audio_minutes,min_s,median_s,max_s,mps\n";
  for (const auto& r : reports) {
    for (const auto& c : r.cells) {
      o << r.model << ',' << c.chunk_size << ',' << c.frames << ',' << c.audio_minutes << ',';
      if (c.failed) {
        o << "-,-,-,-\n";
      } else {
        o << c.min_seconds << ',' << c.median_seconds << ',' << c.max_seconds << ',' << c.mps << '\n';
      }
    }
  }
  return o.str();
}

}  // namespace rala
