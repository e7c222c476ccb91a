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

#include "rala/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <exception>
#include <memory>
#include <thread>

#include "rala/ctc.hpp"

namespace rala {

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error("make_batch: no utterances");
  std::int64_t t_max = 0;
  for (std::size_t i : indices) t_max = std::max(t_max, ds.utts.at(i).duration_frames);
  const std::int64_t b = static_cast<std::int64_t>(indices.size()), d = ds.d_in;
  Batch batch;
  batch.features = Tensor<float>(Shape{b, t_max, d});
  for (std::int64_t k = 0; k < b; ++k) {
    const Utterance& u = ds.utts[indices[static_cast<std::size_t>(k)]];
    std::copy(u.features.begin(), u.features.end(), batch.features.ptr() + k * t_max * d);
    batch.lengths.push_back(u.duration_frames);
    batch.labels.push_back(u.labels);
  }
  batch.indices = indices;
  return batch;
}

std::vector<std::vector<std::size_t>> plan_batches(const Dataset& ds, std::int64_t frame_budget,
                                                   Rng& rng) {
  if (frame_budget < 1) throw Error("plan_batches: frame budget must be >= 1");
  std::vector<std::size_t> order(ds.utts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  // sort within pools so that batches hold similar lengths
  constexpr std::size_t kPool = 64;
  for (std::size_t p = 0; p < order.size(); p += kPool) {
    auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), p + kPool));
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(p), end, [&](std::size_t a, std::size_t b) {
      return ds.utts[a].duration_frames < ds.utts[b].duration_frames;
    });
  }
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::int64_t cur_max = 0;
  for (std::size_t i : order) {
    const std::int64_t len = ds.utts[i].duration_frames;
    const std::int64_t new_max = std::max(cur_max, len);
    if (!cur.empty() && new_max * static_cast<std::int64_t>(cur.size() + 1) > frame_budget) {
      batches.push_back(std::move(cur));
      cur.clear();
      cur_max = 0;
    }
    cur.push_back(i);
    cur_max = std::max(cur_max, len);
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

namespace {

std::int64_t label_count(const std::vector<std::vector<int>>& labels) {
  std::int64_t n = 0;
  for (const auto& l : labels) n += static_cast<std::int64_t>(l.size());
  return n;
}

}  // namespace

UtteranceStream task_stream(const TaskSpec& spec, Regime regime, std::uint64_t stream) {
  auto tables = std::make_shared<const TaskTables>(TaskTables::make(spec));
  return {spec.d_in, [spec, tables, regime, stream](std::int64_t i) {
            return sample_utterance(spec, *tables, regime, stream, i);
          }};
}

namespace {

using BatchProducer = std::function<void(BoundedQueue<Batch>&, Rng&)>;

TrainResult run_training(EncoderParams<float>& model, std::int64_t d_in, const BatchProducer& produce,
                         const TrainConfig& cfg, const StepCallback& on_step) {
  if (d_in != model.cfg.d_in) {
    throw Error("train: data d_in " + std::to_string(d_in) + " does not match model d_in " +
                std::to_string(model.cfg.d_in));
  }
  if (cfg.max_steps < 0) throw Error("train: max_steps must be >= 0");
  const bool dirdrop_on = cfg.dirdrop.variant != DirDropVariant::kOff;
  if (dirdrop_on && (!is_recurrent(model.cfg.attention_kind) || !model.cfg.bidirectional)) {
    throw Error("train: direction dropout needs a bidirectional recurrent model");
  }

  ParamList<float> all = model.params();
  ParamList<float> trainable;
  std::vector<bool> saved_flags;
  for (auto& p : all) {
    saved_flags.push_back(p.var.requires_grad());
    const bool on = !cfg.freeze_non_attention || is_attention_param(p.name);
    Var<float> v = p.var;
    v.set_requires_grad(on);
    if (on) trainable.push_back(p);
  }
  auto restore_flags = [&] {
    for (std::size_t i = 0; i < all.size(); ++i) {
      Var<float> v = all[i].var;
      v.set_requires_grad(saved_flags[i]);
    }
  };
  Adam<float> opt(trainable);

  std::ofstream metrics;
  if (!cfg.metrics_path.empty()) {
    const bool fresh = !std::ifstream(cfg.metrics_path).good();
    metrics.open(cfg.metrics_path, std::ios::app);
    if (!metrics) {
      restore_flags();
      throw Error("cannot open metrics log " + cfg.metrics_path);
    }
    if (fresh) metrics << "step,lr,loss,wall_ms\n";
  }

  BoundedQueue<Batch> queue(cfg.prefetch);
  std::exception_ptr producer_error;
  std::thread producer([&] {
    try {
      Rng batch_rng(derive_seed(cfg.seed, 1));
      produce(queue, batch_rng);
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  Rng dir_rng(derive_seed(cfg.seed, 2));
  const LayerSchedule fixed = model.cfg.default_schedule();
  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
      std::optional<Batch> batch = queue.pop();
      if (!batch) break;
      const LayerSchedule schedule =
          dirdrop_on ? dirdrop_sample(cfg.dirdrop, static_cast<std::size_t>(model.cfg.n_layers), dir_rng)
                     : fixed;
      EncoderOutput<float> enc =
          encoder_forward(model, Var<float>(std::move(batch->features)), batch->lengths, schedule);
      Var<float> logp = ctc_logits(model, enc.hidden);
      const double n_labels = static_cast<double>(std::max<std::int64_t>(1, label_count(batch->labels)));
      Var<float> loss = scale(ctc_loss(logp, batch->labels, enc.lengths),
                              static_cast<float>(cfg.ctc_weight / n_labels));
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw Error("training diverged: non-finite loss at step " + std::to_string(step));
      }
      zero_grads(trainable);
      backward(loss);
      clip_grad_norm(trainable, cfg.clip_norm);
      const double lr = lr_at(step, cfg.lr_peak, cfg.warmup_steps);
      opt.step(lr);
      StepMetrics m;
      m.step = step;
      m.lr = lr;
      m.loss = loss_value;
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.log.push_back(m);
      if (metrics.is_open()) metrics << m.step << ',' << m.lr << ',' << m.loss << ',' << m.wall_ms << '\n';
      if (on_step) on_step(m);
    }
  } catch (...) {
    queue.close();
    producer.join();
    restore_flags();
    throw;
  }
  queue.close();
  producer.join();
  zero_grads(all);
  restore_flags();
  if (producer_error) std::rethrow_exception(producer_error);
  result.rng_state = rng_state(dir_rng);
  return result;
}

}  // namespace

TrainResult train(EncoderParams<float>& model, const Dataset& data, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  if (data.utts.empty()) throw Error("train: empty dataset");
  auto produce = [&](BoundedQueue<Batch>& queue, Rng& rng) {
    std::int64_t produced = 0;
    while (produced < cfg.max_steps) {
      for (const auto& idx : plan_batches(data, cfg.batch_frames, rng)) {
        if (produced >= cfg.max_steps) return;
        if (!queue.push(make_batch(data, idx))) return;
        ++produced;
      }
    }
  };
  return run_training(model, data.d_in, produce, cfg, on_step);
}

TrainResult train(EncoderParams<float>& model, const UtteranceStream& data, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  if (!data.sample) throw Error("train: empty utterance stream");
  auto produce = [&](BoundedQueue<Batch>& queue, Rng& rng) {
    constexpr std::int64_t kPool = 64;
    std::int64_t produced = 0, next = 0;
    while (produced < cfg.max_steps) {
      Dataset pool;
      pool.d_in = data.d_in;
      for (std::int64_t i = 0; i < kPool; ++i) pool.utts.push_back(data.sample(next++));
      for (const auto& idx : plan_batches(pool, cfg.batch_frames, rng)) {
        if (produced >= cfg.max_steps) return;
        if (!queue.push(make_batch(pool, idx))) return;
        ++produced;
      }
    }
  };
  return run_training(model, data.d_in, produce, cfg, on_step);
}

double dataset_loss(const EncoderParams<float>& model, const Dataset& data,
                    const LayerSchedule& schedule, std::int64_t batch_frames) {
  NoGradGuard guard;
  Rng rng(0);
  double total = 0;
  std::int64_t labels = 0;
  for (const auto& idx : plan_batches(data, batch_frames, rng)) {
    Batch b = make_batch(data, idx);
    EncoderOutput<float> enc = encoder_forward(model, Var<float>(std::move(b.features)), b.lengths, schedule);
    Var<float> logp = ctc_logits(model, enc.hidden);
    total += ctc_loss(logp, b.labels, enc.lengths).value().item();
    labels += label_count(b.labels);
  }
  return total / static_cast<double>(std::max<std::int64_t>(1, labels));
}

}  // namespace rala
