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

#include "rala/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rala {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error("config: " + key + " expects a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: " + key + " expects true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto i64 = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_int(k, v); };
    };
    auto f64 = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); };
    };
    auto flag = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_bool(k, v); };
    };
    // task
    i64("vocab_size", [](RunConfig& c) -> std::int64_t& { return c.task.vocab_size; });
    i64("d_in", [](RunConfig& c) -> std::int64_t& { return c.task.d_in; });
    i64("frames_per_token", [](RunConfig& c) -> std::int64_t& { return c.task.frames_per_token; });
    i64("key_value_pairs", [](RunConfig& c) -> std::int64_t& { return c.task.key_value_pairs; });
    i64("n_key_ids", [](RunConfig& c) -> std::int64_t& { return c.task.n_key_ids; });
    i64("prev_classes", [](RunConfig& c) -> std::int64_t& { return c.task.prev_classes; });
    f64("noise_std", [](RunConfig& c) -> double& { return c.task.noise_std; });
    t["task_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.task.seed = static_cast<std::uint64_t>(to_int(k, v));
    };
    // encoder
    t["attention"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.encoder.attention_kind = parse_attention_kind(v);
    };
    flag("bidirectional", [](RunConfig& c) -> bool& { return c.encoder.bidirectional; });
    flag("causal_conv", [](RunConfig& c) -> bool& { return c.encoder.causal_conv; });
    i64("n_layers", [](RunConfig& c) -> std::int64_t& { return c.encoder.n_layers; });
    i64("d_model", [](RunConfig& c) -> std::int64_t& { return c.encoder.d_model; });
    i64("n_heads", [](RunConfig& c) -> std::int64_t& { return c.encoder.n_heads; });
    i64("d_ff", [](RunConfig& c) -> std::int64_t& { return c.encoder.d_ff; });
    i64("conv_kernel", [](RunConfig& c) -> std::int64_t& { return c.encoder.conv_kernel; });
    i64("max_offset", [](RunConfig& c) -> std::int64_t& { return c.encoder.max_offset; });
    i64("lca_left", [](RunConfig& c) -> std::int64_t& { return c.encoder.lca_left; });
    i64("lca_right", [](RunConfig& c) -> std::int64_t& { return c.encoder.lca_right; });
    i64("lca_global", [](RunConfig& c) -> std::int64_t& { return c.encoder.lca_n_global; });
    i64("decay_rank", [](RunConfig& c) -> std::int64_t& { return c.encoder.decay_rank; });
    i64("mamba_head_dim", [](RunConfig& c) -> std::int64_t& { return c.encoder.mamba_head_dim; });
    i64("mamba_state_dim", [](RunConfig& c) -> std::int64_t& { return c.encoder.mamba_state_dim; });
    i64("scan_chunk", [](RunConfig& c) -> std::int64_t& { return c.encoder.scan_chunk; });
    // training
    f64("lr_peak", [](RunConfig& c) -> double& { return c.train.lr_peak; });
    i64("warmup_steps", [](RunConfig& c) -> std::int64_t& { return c.train.warmup_steps; });
    i64("max_steps", [](RunConfig& c) -> std::int64_t& { return c.train.max_steps; });
    i64("batch_frames", [](RunConfig& c) -> std::int64_t& { return c.train.batch_frames; });
    t["dirdrop"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.train.dirdrop.variant = parse_dirdrop_variant(v);
    };
    f64("dirdrop_p", [](RunConfig& c) -> double& { return c.train.dirdrop.p; });
    flag("freeze_non_attention", [](RunConfig& c) -> bool& { return c.train.freeze_non_attention; });
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.seed = static_cast<std::uint64_t>(to_int(k, v));
    };
    f64("clip_norm", [](RunConfig& c) -> double& { return c.train.clip_norm; });
    t["prefetch"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const std::int64_t n = to_int(k, v);
      if (n < 1) throw Error("config: prefetch must be >= 1");
      c.train.prefetch = static_cast<std::size_t>(n);
    };
    t["metrics_path"] = [](RunConfig& c, const std::string&, const std::string& v) { c.train.metrics_path = v; };
    t["regime"] = [](RunConfig& c, const std::string&, const std::string& v) { c.regime = parse_regime(v); };
    i64("train_utts", [](RunConfig& c) -> std::int64_t& { return c.train_utts; });
    t["init_from"] = [](RunConfig& c, const std::string&, const std::string& v) { c.init_from = v; };
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::finalize() {
  task.validate();
  encoder.vocab_size = task.vocab_size;
  encoder.d_in = task.d_in;
  encoder.validate();
  if (train.dirdrop.p < 0 || train.dirdrop.p > 1) throw Error("config: dirdrop_p must be in [0, 1]");
  if (train_utts < 0) throw Error("config: train_utts must be >= 0");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw Error("config: unknown key '" + key + "'");
  it->second(cfg, key, value);
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(n) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) apply_setting(cfg, k, v);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_run_config(s.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& kv : setters()) out.push_back(kv.first);
  return out;
}

std::vector<std::pair<std::string, std::string>> encoder_settings(const EncoderConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto i = [](std::int64_t v) { return std::to_string(v); };
  return {{"attention", to_string(c.attention_kind)},
          {"bidirectional", b(c.bidirectional)},
          {"causal_conv", b(c.causal_conv)},
          {"n_layers", i(c.n_layers)},
          {"d_model", i(c.d_model)},
          {"n_heads", i(c.n_heads)},
          {"d_ff", i(c.d_ff)},
          {"conv_kernel", i(c.conv_kernel)},
          {"d_in", i(c.d_in)},
          {"vocab_size", i(c.vocab_size)},
          {"subsample_factor", i(c.subsample_factor)},
          {"max_offset", i(c.max_offset)},
          {"lca_left", i(c.lca_left)},
          {"lca_right", i(c.lca_right)},
          {"lca_global", i(c.lca_n_global)},
          {"decay_rank", i(c.decay_rank)},
          {"mamba_head_dim", i(c.mamba_head_dim)},
          {"mamba_state_dim", i(c.mamba_state_dim)},
          {"scan_chunk", i(c.scan_chunk)}};
}

EncoderConfig encoder_from_settings(const std::vector<std::pair<std::string, std::string>>& kv) {
  RunConfig rc;
  std::int64_t d_in = -1, vocab = -1;
  for (const auto& [k, v] : kv) {
    if (k == "d_in") {
      d_in = to_int(k, v);
    } else if (k == "vocab_size") {
      vocab = to_int(k, v);
    } else if (k == "subsample_factor") {
      rc.encoder.subsample_factor = to_int(k, v);
    } else {
      apply_setting(rc, k, v);
    }
  }
  if (d_in < 0 || vocab < 0) throw Error("encoder settings lack d_in or vocab_size");
  rc.encoder.d_in = d_in;
  rc.encoder.vocab_size = vocab;
  rc.encoder.validate();
  return rc.encoder;
}

}  // namespace rala
