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

#include "rala/pipeline.hpp"

namespace rala {

Checkpoint train_from_config(const RunConfig& cfg, const StepCallback& on_step) {
  RunConfig rc = cfg;
  rc.finalize();
  Checkpoint ck;
  if (!rc.init_from.empty()) {
    ck = load_checkpoint(rc.init_from);
    if (ck.model.cfg.d_in != rc.task.d_in || ck.model.cfg.vocab_size != rc.task.vocab_size) {
      throw Error("checkpoint " + rc.init_from + " does not match the task's d_in / vocab_size");
    }
  } else {
    ck.model = EncoderParams<float>::init(rc.encoder, derive_seed(rc.train.seed, 0));
  }
  TrainResult r = rc.train_utts > 0
                      ? train(ck.model, make_splits(rc.task, rc.regime, rc.train_utts, 0), rc.train, on_step)
                      : train(ck.model, task_stream(rc.task, rc.regime, 0), rc.train, on_step);
  ck.meta.step += static_cast<std::int64_t>(r.log.size());
  ck.meta.rng_state = std::move(r.rng_state);
  return ck;
}

std::int64_t training_length(const TaskSpec& task, Regime regime, std::int64_t sample) {
  const double mean = make_splits(task, regime, sample, 0).mean_frames();
  return static_cast<std::int64_t>(mean) / 4 * 4;
}

Dataset test_split(const TaskSpec& task, Regime regime, std::int64_t n) {
  return make_splits(task, regime, n, 1);
}

}  // namespace rala
