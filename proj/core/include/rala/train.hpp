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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rala/direction.hpp"
#include "rala/encoder.hpp"
#include "rala/optim.hpp"
#include "rala/synthdata.hpp"

namespace rala {

// FIFO hand-off with at most `capacity` items in flight. pop() returns
// nullopt once the queue is closed and drained.
template <typename Item>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  // Returns false if the queue was closed before the item could be queued.
  bool push(Item item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<Item> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    Item item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<Item> items_;
  bool closed_ = false;
};

struct Batch {
  Tensor<float> features;  // [b, t_max, d_in], zero padded
  Lengths lengths;
  std::vector<std::vector<int>> labels;
  std::vector<std::size_t> indices;  // dataset positions
};

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

// Groups utterance indices into batches whose padded frame count
// (size x longest) stays within frame_budget; a single longer utterance
// forms its own batch. Order is shuffled by rng.
std::vector<std::vector<std::size_t>> plan_batches(const Dataset& ds, std::int64_t frame_budget,
                                                   Rng& rng);

struct TrainConfig {
  double lr_peak = 2e-3;
  std::int64_t warmup_steps = 200;
  std::int64_t max_steps = 1000;
  std::int64_t batch_frames = 4096;
  DirDropPolicy dirdrop;
  bool freeze_non_attention = false;
  std::uint64_t seed = 1;
  double ctc_weight = 1.0;
  double clip_norm = 5.0;
  std::size_t prefetch = 2;
  std::string metrics_path;  // CSV appended when non-empty
};

struct StepMetrics {
  std::int64_t step = 0;
  double lr = 0;
  double loss = 0;  // CTC loss per label
  double wall_ms = 0;
};

struct TrainResult {
  std::vector<StepMetrics> log;
  std::string rng_state;  // of the direction-sampling generator at the end
};

// Unbounded source of training utterances; sample(i) must be deterministic.
struct UtteranceStream {
  std::int64_t d_in = 0;
  std::function<Utterance(std::int64_t)> sample;
};

UtteranceStream task_stream(const TaskSpec& spec, Regime regime, std::uint64_t stream = 0);

using StepCallback = std::function<void(const StepMetrics&)>;

// Trains `model` in place, cycling over `data` in reshuffled epochs. Aborts
// with an Error on a non-finite loss.
TrainResult train(EncoderParams<float>& model, const Dataset& data, const TrainConfig& cfg,
                  const StepCallback& on_step = {});
// Same, but every batch is drawn from fresh stream items (64 at a time,
// length-sorted into batches).
TrainResult train(EncoderParams<float>& model, const UtteranceStream& data, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

// Mean CTC loss per label of a dataset under a schedule (no training).
double dataset_loss(const EncoderParams<float>& model, const Dataset& data,
                    const LayerSchedule& schedule, std::int64_t batch_frames = 8192);

}  // namespace rala
