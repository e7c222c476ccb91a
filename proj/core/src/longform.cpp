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

#include "rala/longform.hpp"

#include <algorithm>

namespace rala {

std::vector<std::pair<std::int64_t, std::int64_t>> chunk_bounds(std::int64_t frames,
                                                                std::int64_t chunk_size) {
  if (chunk_size < 1) throw Error("chunk size must be >= 1");
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t b = 0; b < frames; b += chunk_size) out.emplace_back(b, std::min(frames, b + chunk_size));
  return out;
}

std::vector<std::vector<int>> decode_segments(const EncoderParams<float>& model,
                                              const std::vector<std::vector<float>>& segments,
                                              const LayerSchedule& schedule,
                                              std::int64_t batch_size) {
  if (batch_size < 1) throw Error("decode batch size must be >= 1");
  const std::int64_t d = model.cfg.d_in;
  const std::int64_t min_frames = model.cfg.subsample_factor;
  const LayerSchedule sched = schedule.size() == 0 ? model.cfg.default_schedule() : schedule;
  NoGradGuard guard;

  std::vector<std::vector<int>> out(segments.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].size() % static_cast<std::size_t>(d) != 0) {
      throw ShapeError("decode segment size is not a multiple of d_in");
    }
    if (static_cast<std::int64_t>(segments[i].size()) / d >= min_frames) todo.push_back(i);
  }
  for (std::size_t g = 0; g < todo.size(); g += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(todo.size(), g + static_cast<std::size_t>(batch_size));
    Lengths lens;
    std::int64_t t_max = 0;
    for (std::size_t k = g; k < end; ++k) {
      lens.push_back(static_cast<std::int64_t>(segments[todo[k]].size()) / d);
      t_max = std::max(t_max, lens.back());
    }
    Tensor<float> x(Shape{static_cast<std::int64_t>(end - g), t_max, d});
    for (std::size_t k = g; k < end; ++k) {
      const auto& s = segments[todo[k]];
      std::copy(s.begin(), s.end(), x.ptr() + static_cast<std::int64_t>(k - g) * t_max * d);
    }
    EncoderOutput<float> enc = encoder_forward(model, Var<float>(std::move(x)), lens, sched);
    auto hyps = ctc_greedy_decode(ctc_logits(model, enc.hidden).value(), enc.lengths);
    for (std::size_t k = g; k < end; ++k) out[todo[k]] = std::move(hyps[k - g]);
  }
  return out;
}

LongformResult longform_decode(const EncoderParams<float>& model, const Dataset& data,
                               const DecodeJob& job) {
  if (job.chunk_size != 0 && job.chunk_size < model.cfg.subsample_factor) {
    throw Error("chunk size " + std::to_string(job.chunk_size) + " is below the subsampling factor " +
                std::to_string(model.cfg.subsample_factor));
  }
  if (data.d_in != model.cfg.d_in) throw ShapeError("dataset d_in does not match the model");
  const std::int64_t d = data.d_in;
  std::vector<std::vector<float>> segments;
  std::vector<std::size_t> owner;
  for (std::size_t u = 0; u < data.utts.size(); ++u) {
    const Utterance& utt = data.utts[u];
    const std::int64_t chunk = job.chunk_size == 0 ? std::max<std::int64_t>(1, utt.duration_frames) : job.chunk_size;
    for (auto [b, e] : chunk_bounds(utt.duration_frames, chunk)) {
      segments.emplace_back(utt.features.begin() + b * d, utt.features.begin() + e * d);
      owner.push_back(u);
    }
  }
  auto outs = decode_segments(model, segments, job.schedule, job.batch_size);

  LongformResult r;
  r.hyps.resize(data.utts.size());
  r.chunk_outputs.resize(data.utts.size());
  for (std::size_t s = 0; s < outs.size(); ++s) {
    auto& h = r.hyps[owner[s]];
    h.insert(h.end(), outs[s].begin(), outs[s].end());
    r.chunk_outputs[owner[s]].push_back(std::move(outs[s]));
  }
  for (std::size_t u = 0; u < data.utts.size(); ++u) {
    r.per_utterance.push_back(edit_distance_align(data.utts[u].labels, r.hyps[u]));
    r.report += r.per_utterance.back();
  }
  return r;
}

}  // namespace rala
