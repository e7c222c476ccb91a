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

#include <cstdint>
#include <string>
#include <vector>

#include "rala/longform.hpp"

namespace rala {

struct NamedModel {
  std::string name;
  std::string policy;  // training policy label, e.g. "sf", "bi", "dirdrop-both"
  const EncoderParams<float>* model = nullptr;
};

struct MatrixRow {
  std::string model, policy, schedule;
  std::int64_t chunk_size = 0;
  ErrorReport report;
};

// Every model decoded at every chunk size with its default schedule.
std::vector<MatrixRow> length_generalization_matrix(const std::vector<NamedModel>& models,
                                                    const Dataset& test,
                                                    const std::vector<std::int64_t>& chunk_grid,
                                                    std::int64_t batch_size = 4);

// Every model decoded under every schedule spec (see LayerSchedule::parse)
// at one chunk size. Throws when a schedule needs a direction the model
// does not have.
std::vector<MatrixRow> direction_matrix(const std::vector<NamedModel>& models, const Dataset& test,
                                        const std::vector<std::string>& schedules,
                                        std::int64_t chunk_size, std::int64_t batch_size = 4);

// Columns: model,policy,schedule,chunk_size,S,I,D,ref_len,wer
std::string matrix_csv(const std::vector<MatrixRow>& rows);

}  // namespace rala
