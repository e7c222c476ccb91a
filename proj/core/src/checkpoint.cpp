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

#include "rala/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "rala/config.hpp"

namespace rala {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'A', 'C', 'P', 'K', 'T', '0', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const EncoderParams<float>& model, const CheckpointMeta& meta) {
  const ParamList<float> params = model.params();
  nlohmann::ordered_json header;
  header["format"] = "rala-checkpoint";
  header["blank"] = kBlank;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : encoder_settings(model.cfg)) cfg[k] = v;
  header["config"] = cfg;
  header["step"] = meta.step;
  header["rng_state"] = meta.rng_state;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(p.var.numel()) * sizeof(float);
    tensors.push_back({{"name", p.name}, {"shape", p.var.shape()}, {"dtype", "f32"}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params) {
    out.write(reinterpret_cast<const char*>(p.var.value().ptr()),
              static_cast<std::streamsize>(p.var.numel() * static_cast<std::int64_t>(sizeof(float))));
  }
  if (!out) throw CheckpointError("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw BadMagicError(path + ": bad magic (not a rala checkpoint)");
  }
  std::uint64_t len = 0;
  if (blob.size() < sizeof(kMagic) + sizeof(len)) throw TruncatedError(path + ": truncated header length");
  std::memcpy(&len, blob.data() + sizeof(kMagic), sizeof(len));
  const std::size_t body = sizeof(kMagic) + sizeof(len);
  if (blob.size() - body < len) throw TruncatedError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.begin() + static_cast<std::ptrdiff_t>(body),
                                   blob.begin() + static_cast<std::ptrdiff_t>(body + len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("blank").get<int>() != kBlank) throw CheckpointError(path + ": unsupported blank index");
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& [k, v] : header.at("config").items()) kv.emplace_back(k, v.get<std::string>());
    ck.model = EncoderParams<float>::init(encoder_from_settings(kv), 0);
    ck.meta.step = header.at("step").get<std::int64_t>();
    ck.meta.rng_state = header.at("rng_state").get<std::string>();

    std::map<std::string, nlohmann::json> table;
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") throw CheckpointError(path + ": " + name + " is not f32");
      if (!table.emplace(name, t).second) throw CheckpointError(path + ": duplicate tensor " + name);
    }
    const std::size_t payload = body + len;
    ParamList<float> params = ck.model.params();
    if (table.size() != params.size()) {
      throw ShapeMismatchError(path + ": header lists " + std::to_string(table.size()) + " tensors, config implies " +
                               std::to_string(params.size()));
    }
    for (auto& p : params) {
      auto it = table.find(p.name);
      if (it == table.end()) throw ShapeMismatchError(path + ": missing tensor " + p.name);
      const Shape shape = it->second.at("shape").get<Shape>();
      if (shape != p.var.shape()) {
        throw ShapeMismatchError(path + ": " + p.name + " has shape " + shape_str(shape) + ", config expects " +
                                 shape_str(p.var.shape()));
      }
      const std::uint64_t off = it->second.at("offset").get<std::uint64_t>();
      const std::uint64_t bytes = static_cast<std::uint64_t>(p.var.numel()) * sizeof(float);
      if (it->second.at("bytes").get<std::uint64_t>() != bytes) throw ShapeMismatchError(path + ": byte count of " + p.name);
      if (off > blob.size() - payload || blob.size() - payload - off < bytes) {
        throw TruncatedError(path + ": truncated payload at " + p.name);
      }
      std::memcpy(p.var.mutable_value().ptr(), blob.data() + payload + off, bytes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + e.what());
  }
  return ck;
}

}  // namespace rala
