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

// rala command-line tool: data generation, training, decoding, throughput
// benchmarks, gradient checks and WER scoring.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rala/bench.hpp"
#include "rala/checkpoint.hpp"
#include "rala/config.hpp"
#include "rala/experiments.hpp"
#include "rala/gradcheck.hpp"
#include "rala/longform.hpp"
#include "rala/pipeline.hpp"

namespace {

using namespace rala;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;  // key=value
};

void add_config_args(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.path, "Run config file (key = value per line)");
  cmd->add_option("--set", a.sets, "Override one config key, key=value (repeatable)");
}

RunConfig resolve_config(const ConfigArgs& a) {
  RunConfig rc = a.path.empty() ? RunConfig{} : load_run_config(a.path);
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    apply_setting(rc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return rc;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::int64_t> parse_sizes(const std::string& csv) {
  std::vector<std::int64_t> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error("bad size '" + item + "' in list '" + csv + "'");
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
  return out;
}

// Test material: a saved dataset, or `n` held-out items of the config's task.
struct DataArgs {
  std::string path;
  std::string regime;
  std::int64_t n = 50;
};

void add_data_args(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.path, "Dataset written by gen-data (manifest next to it)");
  cmd->add_option("--regime", d.regime, "Generate held-out data of this regime instead: sf, lf, lfxl");
  cmd->add_option("-n,--count", d.n, "Utterances to generate with --regime");
}

Dataset resolve_data(const DataArgs& d, const RunConfig& rc) {
  if (!d.path.empty()) return load_dataset(d.path, d.path + ".manifest");
  const Regime r = d.regime.empty() ? rc.regime : parse_regime(d.regime);
  return test_split(rc.task, r, d.n);
}

int cmd_gen_data(const ConfigArgs& ca, const std::string& out, const std::string& regime, std::int64_t n,
                 std::uint64_t stream) {
  RunConfig rc = resolve_config(ca);
  if (!regime.empty()) rc.regime = parse_regime(regime);
  rc.task.validate();
  const Dataset ds = make_splits(rc.task, rc.regime, n, stream);
  save_dataset(ds, out, out + ".manifest");
  std::printf("wrote %zu utterances (%lld frames, regime %s) to %s\n", ds.utts.size(),
              static_cast<long long>(ds.total_frames()), to_string(rc.regime).c_str(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rala: recurrent attention encoders for long-form sequence labelling"};
  app.require_subcommand(1);

  // gen-data
  ConfigArgs gen_cfg;
  std::string gen_out, gen_regime;
  std::int64_t gen_n = 100;
  std::uint64_t gen_stream = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_config_args(gen, gen_cfg);
  gen->add_option("-o,--out", gen_out, "Output records file")->required();
  gen->add_option("--regime", gen_regime, "sf, lf or lfxl (default: config)");
  gen->add_option("-n,--count", gen_n, "Number of utterances");
  gen->add_option("--stream", gen_stream, "Independent split id (0 train, 1 test)");
  for (const char* key : {"vocab_size", "d_in", "frames_per_token", "key_value_pairs", "n_key_ids", "noise_std",
                          "task_seed"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    gen->add_option_function<std::string>(
        flag, [&gen_cfg, key](const std::string& v) { gen_cfg.sets.push_back(std::string(key) + "=" + v); },
        std::string("Task ") + key);
  }

  // train
  ConfigArgs tr_cfg;
  std::string tr_out, tr_dirdrop, tr_attention, tr_init, tr_metrics;
  double tr_p = -1;
  bool tr_freeze = false;
  std::optional<bool> tr_bidir;
  std::int64_t tr_steps = -1, tr_log_every = 100;
  auto* tr = app.add_subcommand("train", "Train (or fine-tune) an encoder");
  tr->add_option("config", tr_cfg.path, "Run config file");
  tr->add_option("--set", tr_cfg.sets, "Override one config key, key=value (repeatable)");
  tr->add_option("-o,--out", tr_out, "Checkpoint to write")->required();
  tr->add_option("--dirdrop", tr_dirdrop, "Direction dropout: off, r2l, both")
      ->check(CLI::IsMember({"off", "r2l", "both"}));
  tr->add_option("--dirdrop-p", tr_p, "Direction dropout probability");
  tr->add_flag("--freeze-non-attention", tr_freeze, "Only train attention sublayers");
  tr->add_option("--attention", tr_attention, "mha, lca, rwkv or mamba2")
      ->check(CLI::IsMember({"mha", "lca", "rwkv", "mamba2"}));
  tr->add_flag("--bidirectional,!--unidirectional", tr_bidir, "Second direction for recurrent attention");
  tr->add_option("--steps", tr_steps, "Override max_steps");
  tr->add_option("--init-from", tr_init, "Start from this checkpoint");
  tr->add_option("--metrics", tr_metrics, "Append per-step metrics CSV here");
  tr->add_option("--log-every", tr_log_every, "Print progress every N steps (0: quiet)");

  // decode
  ConfigArgs dec_cfg;
  DataArgs dec_data;
  std::string dec_ckpt, dec_schedule, dec_report, dec_hyps;
  std::int64_t dec_chunk = 0, dec_batch = 4;
  auto* dec = app.add_subcommand("decode", "Chunked long-form greedy decoding and scoring");
  dec->add_option("-m,--checkpoint", dec_ckpt, "Model checkpoint")->required();
  add_config_args(dec, dec_cfg);
  add_data_args(dec, dec_data);
  dec->add_option("--chunk-size", dec_chunk, "Frames per chunk (0: whole utterances)");
  dec->add_option("--schedule", dec_schedule, "l2r, r2l, bi, alt, first_bi:K[:alt], last_bi:K[:alt]");
  dec->add_option("--batch", dec_batch, "Chunks per forward pass");
  dec->add_option("--report", dec_report, "Write a CSV report here");
  dec->add_option("--hyps", dec_hyps, "Write one hypothesis label line per utterance here");

  // bench
  ConfigArgs b_cfg;
  std::string b_ckpt, b_chunks = "2000,9000,20000,40000", b_csv, b_schedule;
  BenchConfig bc;
  auto* bench = app.add_subcommand("bench", "Encoder throughput in minutes of audio per second");
  bench->add_option("-m,--checkpoint", b_ckpt, "Model checkpoint (default: untrained model from config)");
  add_config_args(bench, b_cfg);
  bench->add_option("--chunk-sizes", b_chunks, "Comma-separated chunk sizes in frames");
  bench->add_option("--batch", bc.batch_size, "Chunks per forward pass");
  bench->add_option("--warmup", bc.warmup_queries, "Untimed warm-up queries");
  bench->add_option("--repeats", bc.repeats, "Timed passes per chunk size");
  bench->add_option("--total-frames", bc.total_frames, "Long input length (default: batch x largest chunk)");
  bench->add_option("--threads", bc.threads, "Threads per batch");
  bench->add_option("--max-pass-seconds", bc.max_pass_seconds, "Mark slower cells failed");
  bench->add_option("--schedule", b_schedule, "Layer schedule (default: the model's)");
  bench->add_option("--csv", b_csv, "Write the report CSV here");

  // gradcheck
  std::vector<std::string> gc_fragments;
  double gc_tol = 1e-4;
  GradcheckOptions gco;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of layer fragments");
  gc->add_option("--fragment", gc_fragments, "Fragments to check (default: all)");
  gc->add_option("--tol", gc_tol, "Relative error tolerance");
  gc->add_option("--eps", gco.eps, "Central-difference step");
  gc->add_option("--max-elems", gco.max_elems, "Elements checked per group (0: all)");

  // eval-wer
  std::string ew_ref, ew_hyp;
  auto* ew = app.add_subcommand("eval-wer", "Score hypothesis lines against reference lines");
  ew->add_option("ref", ew_ref, "Reference file, one utterance per line")->required();
  ew->add_option("hyp", ew_hyp, "Hypothesis file, one utterance per line")->required();

  // matrix
  ConfigArgs mx_cfg;
  DataArgs mx_data;
  std::vector<std::string> mx_models;
  std::string mx_kind = "length", mx_chunks, mx_schedules = "l2r,r2l,alt,bi", mx_csv;
  std::int64_t mx_chunk = 0, mx_batch = 4;
  auto* mx = app.add_subcommand("matrix", "Length-generalization or direction matrix over checkpoints");
  mx->add_option("--kind", mx_kind, "length or direction")->check(CLI::IsMember({"length", "direction"}));
  mx->add_option("--model", mx_models, "name=checkpoint[:policy] (repeatable)")->required();
  add_config_args(mx, mx_cfg);
  add_data_args(mx, mx_data);
  mx->add_option("--chunks", mx_chunks, "Chunk grid for --kind length (default: 1,2,4,8,16 x training length)");
  mx->add_option("--schedules", mx_schedules, "Schedules for --kind direction");
  mx->add_option("--chunk-size", mx_chunk, "Chunk size for --kind direction (0: whole utterances)");
  mx->add_option("--batch", mx_batch, "Chunks per forward pass");
  mx->add_option("--csv", mx_csv, "Write the CSV here (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_cfg, gen_out, gen_regime, gen_n, gen_stream);

    if (*tr) {
      RunConfig rc = resolve_config(tr_cfg);
      if (!tr_dirdrop.empty()) rc.train.dirdrop.variant = parse_dirdrop_variant(tr_dirdrop);
      if (tr_p >= 0) rc.train.dirdrop.p = tr_p;
      if (tr_freeze) rc.train.freeze_non_attention = true;
      if (!tr_attention.empty()) rc.encoder.attention_kind = parse_attention_kind(tr_attention);
      if (tr_bidir) rc.encoder.bidirectional = *tr_bidir;
      if (tr_steps >= 0) rc.train.max_steps = tr_steps;
      if (!tr_init.empty()) rc.init_from = tr_init;
      if (!tr_metrics.empty()) rc.train.metrics_path = tr_metrics;
      double recent = 0;
      std::int64_t n_recent = 0;
      const Checkpoint ck = train_from_config(rc, [&](const StepMetrics& m) {
        recent += m.loss;
        ++n_recent;
        if (tr_log_every > 0 && m.step % tr_log_every == 0) {
          std::fprintf(stderr, "step %lld  lr %.2e  loss %.4f  %.1f s\n", static_cast<long long>(m.step), m.lr,
                       recent / static_cast<double>(n_recent), m.wall_ms / 1000.0);
          recent = 0;
          n_recent = 0;
        }
      });
      save_checkpoint(tr_out, ck.model, ck.meta);
      std::printf("saved %s (step %lld)\n", tr_out.c_str(), static_cast<long long>(ck.meta.step));
      return 0;
    }

    if (*dec) {
      const RunConfig rc = resolve_config(dec_cfg);
      const Checkpoint ck = load_checkpoint(dec_ckpt);
      const Dataset data = resolve_data(dec_data, rc);
      DecodeJob job;
      job.chunk_size = dec_chunk;
      job.batch_size = dec_batch;
      if (!dec_schedule.empty()) {
        job.schedule = LayerSchedule::parse(dec_schedule, static_cast<std::size_t>(ck.model.cfg.n_layers));
      }
      const LongformResult r = longform_decode(ck.model, data, job);
      std::printf("utterances %zu  S %lld  I %lld  D %lld  N %lld  WER %.4f\n", data.utts.size(),
                  static_cast<long long>(r.report.substitutions), static_cast<long long>(r.report.insertions),
                  static_cast<long long>(r.report.deletions), static_cast<long long>(r.report.ref_len),
                  r.report.wer());
      if (!dec_report.empty()) {
        MatrixRow row{dec_ckpt, "", dec_schedule.empty() ? ck.model.cfg.default_schedule().to_string()
                                                         : dec_schedule,
                      dec_chunk, r.report};
        write_file(dec_report, matrix_csv({row}));
      }
      if (!dec_hyps.empty()) {
        std::ostringstream os;
        for (const auto& h : r.hyps) {
          for (std::size_t i = 0; i < h.size(); ++i) os << (i ? " " : "") << h[i];
          os << '\n';
        }
        write_file(dec_hyps, os.str());
      }
      return 0;
    }

    if (*bench) {
      RunConfig rc = resolve_config(b_cfg);
      EncoderParams<float> model;
      std::string name;
      if (!b_ckpt.empty()) {
        model = load_checkpoint(b_ckpt).model;
        name = b_ckpt;
      } else {
        rc.finalize();
        model = EncoderParams<float>::init(rc.encoder, rc.train.seed);
        name = to_string(rc.encoder.attention_kind) + (rc.encoder.bidirectional ? "-bi" : "-uni");
      }
      bc.chunk_sizes = parse_sizes(b_chunks);
      bc.d_in = model.cfg.d_in;
      const LayerSchedule sched = b_schedule.empty()
                                      ? model.cfg.default_schedule()
                                      : LayerSchedule::parse(b_schedule, static_cast<std::size_t>(model.cfg.n_layers));
      const BenchReport rep = bench_throughput(bc, encoder_encode_fn(model, sched), name);
      for (const auto& c : rep.cells) {
        if (c.failed) {
          std::printf("chunk %7lld  failed: %s\n", static_cast<long long>(c.chunk_size), c.failure.c_str());
        } else {
          std::printf("chunk %7lld  %.3f audio min  median %.3f s  [%.3f, %.3f]  MPS %.2f\n",
                      static_cast<long long>(c.chunk_size), c.audio_minutes, c.median_seconds, c.min_seconds,
                      c.max_seconds, c.mps);
        }
      }
      if (std::isfinite(rep.exponent)) std::printf("time exponent vs chunk size: %.3f +- %.3f\n", rep.exponent, rep.exponent_stderr);
      if (!b_csv.empty()) write_file(b_csv, bench_csv({rep}));
      return 0;
    }

    if (*gc) {
      if (gc_fragments.empty()) gc_fragments = gradcheck_fragments();
      bool ok = true;
      for (const std::string& f : gc_fragments) {
        const GradcheckReport r = gradcheck_fragment(f, gco);
        std::printf("%-16s max rel err %.2e  %s\n", f.c_str(), r.max_rel_err(), r.passed(gc_tol) ? "ok" : "FAILED");
        for (const auto& g : r.groups) {
          if (g.max_rel_err >= gc_tol) std::printf("    %s: %.2e\n", g.name.c_str(), g.max_rel_err);
        }
        ok = ok && r.passed(gc_tol);
      }
      return ok ? 0 : 1;
    }

    if (*ew) {
      const auto refs = read_lines(ew_ref), hyps = read_lines(ew_hyp);
      if (refs.size() != hyps.size()) {
        throw Error("reference has " + std::to_string(refs.size()) + " lines, hypothesis " +
                    std::to_string(hyps.size()));
      }
      ErrorReport total;
      for (std::size_t i = 0; i < refs.size(); ++i) total += edit_distance_align(split_words(refs[i]), split_words(hyps[i]));
      std::printf("S %lld  I %lld  D %lld  N %lld  WER %.4f\n", static_cast<long long>(total.substitutions),
                  static_cast<long long>(total.insertions), static_cast<long long>(total.deletions),
                  static_cast<long long>(total.ref_len), total.wer());
      return 0;
    }

    if (*mx) {
      const RunConfig rc = resolve_config(mx_cfg);
      const Dataset data = resolve_data(mx_data, rc);
      std::vector<Checkpoint> cks;
      std::vector<NamedModel> models;
      cks.reserve(mx_models.size());
      for (const std::string& spec : mx_models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw Error("--model expects name=checkpoint[:policy], got '" + spec + "'");
        std::string path = spec.substr(eq + 1), policy;
        if (const auto colon = path.rfind(':'); colon != std::string::npos) {
          policy = path.substr(colon + 1);
          path = path.substr(0, colon);
        }
        cks.push_back(load_checkpoint(path));
        models.push_back({spec.substr(0, eq), policy, &cks.back().model});
      }
      std::vector<MatrixRow> rows;
      if (mx_kind == "length") {
        std::vector<std::int64_t> grid;
        if (mx_chunks.empty()) {
          const std::int64_t L = training_length(rc.task, rc.regime);
          for (std::int64_t m : {1, 2, 4, 8, 16}) grid.push_back(m * L);
        } else {
          grid = parse_sizes(mx_chunks);
        }
        rows = length_generalization_matrix(models, data, grid, mx_batch);
      } else {
        rows = direction_matrix(models, data, split_list(mx_schedules), mx_chunk, mx_batch);
      }
      const std::string csv = matrix_csv(rows);
      if (mx_csv.empty()) {
        std::cout << csv;
      } else {
        write_file(mx_csv, csv);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
