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

#include "rala/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rala/tensor.hpp"

namespace rala {

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

void TaskSpec::validate() const {
  if (vocab_size < 2) throw Error("task: vocab_size must be >= 2");
  if (d_in < 1 || frames_per_token < 1) throw Error("task: d_in and frames_per_token must be >= 1");
  if (key_value_pairs < 0) throw Error("task: key_value_pairs must be >= 0");
  if (key_value_pairs > 0 && n_key_ids < 1) throw Error("task: n_key_ids must be >= 1");
  if (prev_classes < 1) throw Error("task: prev_classes must be >= 1");
  if (noise_std < 0) throw Error("task: noise_std must be >= 0");
}

TaskTables TaskTables::make(const TaskSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x7AB1E5));
  TaskTables t;
  std::normal_distribution<double> nd(0.0, 1.0);
  t.embed.resize(static_cast<std::size_t>(spec.n_tokens() * spec.frames_per_token * spec.d_in));
  for (auto& v : t.embed) v = static_cast<float>(nd(rng));
  const std::int64_t cols = spec.prev_classes + 1;
  t.label_of.resize(static_cast<std::size_t>(spec.vocab_size * cols));
  std::vector<int> perm(static_cast<std::size_t>(spec.vocab_size));
  for (std::int64_t c = 0; c < cols; ++c) {
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::int64_t s = 0; s < spec.vocab_size; ++s) {
      t.label_of[static_cast<std::size_t>(s * cols + c)] = perm[static_cast<std::size_t>(s)];
    }
  }
  return t;
}

std::int64_t TaskTables::prev_class(const TaskSpec& spec, std::int64_t prev_token) const {
  if (prev_token >= 0 && prev_token < spec.vocab_size) return prev_token % spec.prev_classes;
  return spec.prev_classes;
}

int TaskTables::local_label(const TaskSpec& spec, std::int64_t symbol, std::int64_t prev_token) const {
  return label_of[static_cast<std::size_t>(symbol * (spec.prev_classes + 1) +
                                           prev_class(spec, prev_token))];
}

namespace {

enum class Slot : std::uint8_t { kContent, kKey, kValue, kQuery, kSilent };

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> d(lo, hi);
  return d(rng);
}

}  // namespace

Utterance gen_utterance(const TaskSpec& spec, const TaskTables& tables, std::int64_t n_tokens,
                        Rng& rng) {
  spec.validate();
  const std::int64_t K = spec.key_value_pairs;
  if (n_tokens < 3 * K + 2) {
    throw Error("gen_utterance: " + std::to_string(n_tokens) + " tokens cannot hold " +
                std::to_string(K) + " key/value/query plants (need " + std::to_string(3 * K + 2) +
                ")");
  }
  // Skeleton: a leading filler, then units where a key+value pair is one unit.
  const std::int64_t units = n_tokens - 1 - K;
  std::vector<std::int64_t> unit_pos(static_cast<std::size_t>(units));
  std::iota(unit_pos.begin(), unit_pos.end(), 0);
  std::shuffle(unit_pos.begin(), unit_pos.end(), rng);

  struct UnitInfo {
    Slot slot = Slot::kContent;
    std::int64_t key_id = -1;
    bool ahead = false;
  };
  std::vector<UnitInfo> info(static_cast<std::size_t>(units));
  for (std::int64_t p = 0; p < K; ++p) {
    std::int64_t a = unit_pos[static_cast<std::size_t>(2 * p)];
    std::int64_t b = unit_pos[static_cast<std::size_t>(2 * p + 1)];
    if (a > b) std::swap(a, b);
    const bool query_first = uniform_int(rng, 0, 1) == 1;
    const std::int64_t id = uniform_int(rng, 0, spec.n_key_ids - 1);
    info[static_cast<std::size_t>(query_first ? b : a)] = {Slot::kKey, id, false};
    info[static_cast<std::size_t>(query_first ? a : b)] = {Slot::kQuery, id, query_first};
  }

  std::vector<int> tokens{static_cast<int>(spec.filler())};
  std::vector<Slot> slots{Slot::kSilent};
  for (const UnitInfo& u : info) {
    switch (u.slot) {
      case Slot::kContent:
        tokens.push_back(static_cast<int>(uniform_int(rng, 0, spec.vocab_size - 1)));
        slots.push_back(Slot::kContent);
        break;
      case Slot::kKey:
        tokens.push_back(static_cast<int>(spec.key(u.key_id)));
        slots.push_back(Slot::kSilent);
        tokens.push_back(static_cast<int>(uniform_int(rng, 0, spec.vocab_size - 1)));
        slots.push_back(Slot::kValue);
        break;
      case Slot::kQuery:
        tokens.push_back(static_cast<int>(u.ahead ? spec.look_ahead(u.key_id) : spec.look_back(u.key_id)));
        slots.push_back(Slot::kQuery);
        break;
      default:
        break;
    }
  }

  // Query labels: value following the nearest matching key in the query's direction.
  const std::int64_t n = static_cast<std::int64_t>(tokens.size());
  auto query_label = [&](std::int64_t pos) {
    const std::int64_t tok = tokens[static_cast<std::size_t>(pos)];
    const bool ahead = tok >= spec.look_ahead(0);
    const std::int64_t id = ahead ? tok - spec.look_ahead(0) : tok - spec.look_back(0);
    const std::int64_t step = ahead ? 1 : -1;
    for (std::int64_t q = pos + step; q >= 0 && q < n; q += step) {
      if (tokens[static_cast<std::size_t>(q)] == spec.key(id)) {
        return tokens[static_cast<std::size_t>(q + 1)] + 1;
      }
    }
    throw Error("gen_utterance: query without a matching key");
  };

  Utterance u;
  std::vector<int> out_tokens;
  int last_label = 0;  // 0: a silent token intervened
  for (std::int64_t pos = 0; pos < n; ++pos) {
    const Slot s = slots[static_cast<std::size_t>(pos)];
    if (s == Slot::kSilent) {
      out_tokens.push_back(tokens[static_cast<std::size_t>(pos)]);
      last_label = 0;
      continue;
    }
    const std::int64_t prev = out_tokens.back();
    int label = s == Slot::kQuery ? query_label(pos)
                                  : tables.local_label(spec, tokens[static_cast<std::size_t>(pos)], prev);
    if (label == last_label) {
      if (s == Slot::kContent) {
        while (label == last_label) {
          tokens[static_cast<std::size_t>(pos)] = static_cast<int>(uniform_int(rng, 0, spec.vocab_size - 1));
          label = tables.local_label(spec, tokens[static_cast<std::size_t>(pos)], prev);
        }
      } else {
        // only a query can repeat here (a value always follows its silent key)
        out_tokens.push_back(static_cast<int>(spec.filler()));
      }
    }
    out_tokens.push_back(tokens[static_cast<std::size_t>(pos)]);
    u.labels.push_back(label);
    u.query_label.push_back(s == Slot::kQuery ? 1 : 0);
    last_label = label;
  }

  const std::int64_t F = spec.frames_per_token, d = spec.d_in;
  u.tokens = std::move(out_tokens);
  u.duration_frames = static_cast<std::int64_t>(u.tokens.size()) * F;
  u.features.resize(static_cast<std::size_t>(u.duration_frames * d));
  std::normal_distribution<double> noise(0.0, spec.noise_std > 0 ? spec.noise_std : 1.0);
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    const float* e = tables.embed.data() + static_cast<std::size_t>(u.tokens[i]) * F * d;
    float* dst = u.features.data() + i * static_cast<std::size_t>(F * d);
    for (std::int64_t k = 0; k < F * d; ++k) {
      dst[k] = e[k] + (spec.noise_std > 0 ? static_cast<float>(noise(rng)) : 0.0f);
    }
  }
  return u;
}

Utterance concat_utterances(const std::vector<Utterance>& us, std::int64_t target_frames) {
  if (us.empty()) throw Error("concat_utterances: empty list");
  Utterance out;
  for (const Utterance& u : us) {
    out.features.insert(out.features.end(), u.features.begin(), u.features.end());
    out.labels.insert(out.labels.end(), u.labels.begin(), u.labels.end());
    out.tokens.insert(out.tokens.end(), u.tokens.begin(), u.tokens.end());
    out.query_label.insert(out.query_label.end(), u.query_label.begin(), u.query_label.end());
    out.duration_frames += u.duration_frames;
    if (out.duration_frames >= target_frames) break;
  }
  return out;
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kSF: return "sf";
    case Regime::kLF: return "lf";
    case Regime::kLFXL: return "lfxl";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  if (name == "sf" || name == "SF") return Regime::kSF;
  if (name == "lf" || name == "LF") return Regime::kLF;
  if (name == "lfxl" || name == "LFXL") return Regime::kLFXL;
  throw Error("unknown regime '" + name + "' (expected sf, lf, lfxl)");
}

std::int64_t Dataset::total_frames() const {
  std::int64_t n = 0;
  for (const auto& u : utts) n += u.duration_frames;
  return n;
}

double Dataset::mean_frames() const {
  return utts.empty() ? 0.0 : static_cast<double>(total_frames()) / static_cast<double>(utts.size());
}

Utterance sample_utterance(const TaskSpec& spec, const TaskTables& tables, Regime regime,
                           std::uint64_t stream, std::int64_t index) {
  const std::uint64_t base =
      derive_seed(spec.seed, 1000 + stream * 8 + static_cast<std::uint64_t>(regime));
  const std::uint64_t item = derive_seed(base, static_cast<std::uint64_t>(index));
  auto sf_utt = [&](std::uint64_t part) {
    Rng rng(derive_seed(item, part));
    const std::int64_t len = uniform_int(rng, 32, 96);
    return gen_utterance(spec, tables, len, rng);
  };
  if (regime == Regime::kSF) return sf_utt(0);
  Rng pick(derive_seed(item, 0xC0FFEEull));
  const std::int64_t k = regime == Regime::kLF ? uniform_int(pick, 2, 3) : uniform_int(pick, 16, 20);
  std::vector<Utterance> group;
  std::int64_t frames = 0;
  for (std::int64_t j = 0; j < k; ++j) {
    group.push_back(sf_utt(static_cast<std::uint64_t>(j)));
    frames += group.back().duration_frames;
  }
  return concat_utterances(group, frames);
}

Dataset make_splits(const TaskSpec& spec, Regime regime, std::int64_t n, std::uint64_t stream) {
  const TaskTables tables = TaskTables::make(spec);
  Dataset ds;
  ds.d_in = spec.d_in;
  for (std::int64_t i = 0; i < n; ++i) ds.utts.push_back(sample_utterance(spec, tables, regime, stream, i));
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path, const std::string& manifest_path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  std::ostringstream manifest;
  manifest << "# rala dataset: d_in=" << ds.d_in << " records=" << ds.utts.size() << "\n";
  std::uint64_t offset = 0;
  for (const Utterance& u : ds.utts) {
    manifest << offset << "\n";
    const auto frames = static_cast<std::uint32_t>(u.duration_frames);
    const auto labels = static_cast<std::uint32_t>(u.labels.size());
    out.write(reinterpret_cast<const char*>(&frames), 4);
    out.write(reinterpret_cast<const char*>(&labels), 4);
    out.write(reinterpret_cast<const char*>(u.features.data()),
              static_cast<std::streamsize>(u.features.size() * 4));
    std::vector<std::int32_t> lab(u.labels.begin(), u.labels.end());
    out.write(reinterpret_cast<const char*>(lab.data()), static_cast<std::streamsize>(lab.size() * 4));
    offset += 8 + u.features.size() * 4 + lab.size() * 4;
  }
  if (!out) throw Error("write failed for " + path);
  std::ofstream m(manifest_path);
  if (!m) throw Error("cannot write " + manifest_path);
  m << manifest.str();
}

Dataset load_dataset(const std::string& path, const std::string& manifest_path) {
  std::ifstream m(manifest_path);
  if (!m) throw Error("cannot read " + manifest_path);
  std::string header;
  std::getline(m, header);
  Dataset ds;
  const auto pos = header.find("d_in=");
  if (pos == std::string::npos) throw Error("manifest " + manifest_path + " lacks d_in");
  ds.d_in = std::stoll(header.substr(pos + 5));
  std::vector<std::uint64_t> offsets;
  for (std::uint64_t off; m >> off;) offsets.push_back(off);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  for (std::uint64_t off : offsets) {
    in.seekg(static_cast<std::streamoff>(off));
    std::uint32_t frames = 0, labels = 0;
    in.read(reinterpret_cast<char*>(&frames), 4);
    in.read(reinterpret_cast<char*>(&labels), 4);
    if (!in) throw Error("truncated dataset record at offset " + std::to_string(off));
    Utterance u;
    u.duration_frames = frames;
    u.features.resize(static_cast<std::size_t>(frames) * static_cast<std::size_t>(ds.d_in));
    in.read(reinterpret_cast<char*>(u.features.data()), static_cast<std::streamsize>(u.features.size() * 4));
    std::vector<std::int32_t> lab(labels);
    in.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(lab.size() * 4));
    if (!in) throw Error("truncated dataset record at offset " + std::to_string(off));
    u.labels.assign(lab.begin(), lab.end());
    ds.utts.push_back(std::move(u));
  }
  return ds;
}

}  // namespace rala
