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

#include "rala/encoder.hpp"

namespace rala {

class CheckpointError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct CheckpointMeta {
  std::int64_t step = 0;
  std::string rng_state;
};

struct Checkpoint {
  EncoderParams<float> model;
  CheckpointMeta meta;
};

// Layout: "RACPKT01", u64 header length, JSON header (tensor table, config
// echo, blank index, meta), then each tensor as little-endian f32 in table
// order.
void save_checkpoint(const std::string& path, const EncoderParams<float>& model,
                     const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rala
