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
#include <utility>
#include <vector>

#include "rala/encoder.hpp"
#include "rala/synthdata.hpp"
#include "rala/train.hpp"

namespace rala {

// Everything a training run needs. Text form: one `key = value` per line,
// '#' starts a comment, blank lines ignored.
struct RunConfig {
  TaskSpec task;
  EncoderConfig encoder;
  TrainConfig train;
  Regime regime = Regime::kSF;
  std::int64_t train_utts = 0;  // 0: fresh utterances every batch
  std::string init_from;  // checkpoint to start from (optional)

  // Copies task vocab_size and d_in into the encoder config and validates.
  void finalize();
};

// Sets one key. Throws Error for an unknown key or a malformed value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::vector<std::string> config_keys();

// Encoder settings as key/value pairs (the checkpoint config echo) and back.
std::vector<std::pair<std::string, std::string>> encoder_settings(const EncoderConfig& cfg);
EncoderConfig encoder_from_settings(const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace rala
