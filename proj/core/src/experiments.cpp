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

#include "rala/experiments.hpp"

#include <sstream>

namespace rala {

namespace {

void check_model(const NamedModel& m) {
  if (m.model == nullptr) throw Error("experiment model '" + m.name + "' is not loaded");
}

bool needs_reverse(const LayerSchedule& s) {
  for (Direction d : s.modes) {
    if (d != Direction::kL2R) return true;
  }
  return false;
}

}  // namespace

std::vector<MatrixRow> length_generalization_matrix(const std::vector<NamedModel>& models,
                                                    const Dataset& test,
                                                    const std::vector<std::int64_t>& chunk_grid,
                                                    std::int64_t batch_size) {
  std::vector<MatrixRow> rows;
  for (const NamedModel& m : models) {
    check_model(m);
    const LayerSchedule sched = m.model->cfg.default_schedule();
    for (std::int64_t chunk : chunk_grid) {
      DecodeJob job;
      job.chunk_size = chunk;
      job.batch_size = batch_size;
      job.schedule = sched;
      rows.push_back({m.name, m.policy, sched.to_string(), chunk, longform_decode(*m.model, test, job).report});
    }
  }
  return rows;
}

std::vector<MatrixRow> direction_matrix(const std::vector<NamedModel>& models, const Dataset& test,
                                        const std::vector<std::string>& schedules,
                                        std::int64_t chunk_size, std::int64_t batch_size) {
  std::vector<MatrixRow> rows;
  for (const NamedModel& m : models) {
    check_model(m);
    const auto n = static_cast<std::size_t>(m.model->cfg.n_layers);
    for (const std::string& spec : schedules) {
      const LayerSchedule sched = LayerSchedule::parse(spec, n);
      const bool bidir_model = is_recurrent(m.model->cfg.attention_kind) && m.model->cfg.bidirectional;
      if (is_recurrent(m.model->cfg.attention_kind) && !bidir_model && needs_reverse(sched)) {
        throw Error("schedule '" + spec + "' needs a bidirectional model, '" + m.name + "' is unidirectional");
      }
      DecodeJob job;
      job.chunk_size = chunk_size;
      job.batch_size = batch_size;
      job.schedule = sched;
      rows.push_back({m.name, m.policy, spec, chunk_size, longform_decode(*m.model, test, job).report});
    }
  }
  return rows;
}

std::string matrix_csv(const std::vector<MatrixRow>& rows) {
  std::ostringstream o;
  o << "model,policy,schedule,chunk_size,S,I,D,ref_len,wer\n";
  for (const auto& r : rows) {
    o << r.model << ',' << r.policy << ',' << r.schedule << ',' << r.chunk_size << ','
      << r.report.substitutions << ',' << r.report.insertions << ',' << r.report.deletions << ','
      << r.report.ref_len << ',' << r.report.wer() << '\n';
  }
  return o.str();
}

}  // namespace rala
