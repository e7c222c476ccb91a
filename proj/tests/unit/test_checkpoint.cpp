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

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "rala/checkpoint.hpp"

namespace rala {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EncoderConfig cfg_of(AttentionKind kind) {
  EncoderConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 24;
  c.conv_kernel = 3;
  c.d_in = 5;
  c.vocab_size = 9;
  c.attention_kind = kind;
  c.decay_rank = 2;
  c.mamba_head_dim = 8;
  c.mamba_state_dim = 4;
  c.lca_left = 7;
  return c;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) {
    fs::create_directories(dir_);
    return dir_ / name;
  }
  fs::path dir_ = fs::temp_directory_path() / "rala_ckpt_test";
};

TEST_F(CheckpointTest, RoundTripIsBitExactForEveryKind) {
  for (AttentionKind kind : {AttentionKind::kMha, AttentionKind::kLcaGt, AttentionKind::kRwkv, AttentionKind::kMamba2}) {
    auto cfg = cfg_of(kind);
    cfg.bidirectional = kind != AttentionKind::kMamba2;
    const auto model = EncoderParams<float>::init(cfg, 11);
    const fs::path a = path("a.ckpt"), b = path("b.ckpt");
    save_checkpoint(a.string(), model, {123, "rng-state-text"});
    const Checkpoint ck = load_checkpoint(a.string());
    EXPECT_EQ(ck.meta.step, 123);
    EXPECT_EQ(ck.meta.rng_state, "rng-state-text");
    EXPECT_EQ(ck.model.cfg.attention_kind, kind);
    EXPECT_EQ(ck.model.cfg.bidirectional, cfg.bidirectional);
    EXPECT_EQ(ck.model.cfg.lca_left, 7);
    const auto want = model.params(), got = ck.model.params();
    ASSERT_EQ(want.size(), got.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(want[i].name, got[i].name);
      EXPECT_EQ(std::memcmp(want[i].var.value().ptr(), got[i].var.value().ptr(),
                            static_cast<std::size_t>(want[i].var.numel()) * 4),
                0)
          << want[i].name;
    }
    save_checkpoint(b.string(), ck.model, ck.meta);
    EXPECT_EQ(slurp(a), slurp(b)) << to_string(kind);
  }
}

TEST_F(CheckpointTest, HeaderListsEveryTensor) {
  const auto model = EncoderParams<float>::init(cfg_of(AttentionKind::kRwkv), 1);
  const fs::path p = path("m.ckpt");
  save_checkpoint(p.string(), model);
  const std::string blob = slurp(p);
  EXPECT_EQ(blob.substr(0, 8), "RACPKT01");
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + 8, 8);
  const auto header = nlohmann::json::parse(blob.substr(16, len));
  EXPECT_EQ(header.at("blank").get<int>(), kBlank);
  const auto params = model.params();
  ASSERT_EQ(header.at("tensors").size(), params.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = header.at("tensors")[i];
    EXPECT_EQ(t.at("name").get<std::string>(), params[i].name);
    EXPECT_EQ(t.at("offset").get<std::uint64_t>(), total);
    total += t.at("bytes").get<std::uint64_t>();
  }
  EXPECT_EQ(blob.size(), 16 + len + total);
}

TEST_F(CheckpointTest, RejectsForeignFiles) {
  const fs::path p = path("junk.ckpt");
  spit(p, "NOTACKPTxxxxxxxxxxxxxxxx");
  EXPECT_THROW(load_checkpoint(p.string()), BadMagicError);
  spit(p, "RAC");
  EXPECT_THROW(load_checkpoint(p.string()), BadMagicError);
  EXPECT_THROW(load_checkpoint((dir_ / "missing.ckpt").string()), CheckpointError);
}

TEST_F(CheckpointTest, EveryTruncationIsDetected) {
  const auto model = EncoderParams<float>::init(cfg_of(AttentionKind::kMamba2), 2);
  const fs::path p = path("t.ckpt"), cut = path("cut.ckpt");
  save_checkpoint(p.string(), model);
  const std::string blob = slurp(p);
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + 8, 8);
  for (std::size_t n : {std::size_t{12}, std::size_t{16 + len / 2}, std::size_t{16 + len + 4}, blob.size() - 1}) {
    spit(cut, blob.substr(0, n));
    EXPECT_THROW(load_checkpoint(cut.string()), TruncatedError) << "cut at " << n;
  }
}

TEST_F(CheckpointTest, ShapeMismatchIsReported) {
  const auto model = EncoderParams<float>::init(cfg_of(AttentionKind::kRwkv), 3);
  const fs::path p = path("s.ckpt");
  save_checkpoint(p.string(), model);
  const std::string blob = slurp(p);
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + 8, 8);
  auto rewrite = [&](auto&& edit) {
    auto header = nlohmann::ordered_json::parse(blob.substr(16, len));
    edit(header);
    const std::string text = header.dump();
    const std::uint64_t n = text.size();
    std::string out = blob.substr(0, 8);
    out.append(reinterpret_cast<const char*>(&n), 8);
    out += text;
    out += blob.substr(16 + len);
    spit(p, out);
  };
  rewrite([](auto& h) { h["config"]["d_ff"] = "32"; });
  EXPECT_THROW(load_checkpoint(p.string()), ShapeMismatchError);
  rewrite([](auto& h) { h["tensors"][0]["shape"] = {1, 2, 3}; });
  EXPECT_THROW(load_checkpoint(p.string()), ShapeMismatchError);
  rewrite([](auto& h) { h["tensors"].erase(h["tensors"].size() - 1); });
  EXPECT_THROW(load_checkpoint(p.string()), ShapeMismatchError);
  rewrite([](auto& h) { h["tensors"][1]["name"] = "blocks.9.ghost"; });
  EXPECT_THROW(load_checkpoint(p.string()), ShapeMismatchError);
  rewrite([](auto& h) { h.erase("config"); });
  EXPECT_THROW(load_checkpoint(p.string()), CheckpointError);
}

}  // namespace
}  // namespace rala
