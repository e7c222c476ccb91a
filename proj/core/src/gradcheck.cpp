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

#include "rala/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rala/ctc.hpp"
#include "rala/direction.hpp"
#include "rala/encoder.hpp"
#include "rala/mamba2.hpp"
#include "rala/mha.hpp"
#include "rala/rwkv.hpp"

namespace rala {

double GradcheckReport::max_rel_err() const {
  double m = 0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_err);
  return m;
}

GradcheckReport gradcheck(const std::string& fragment, const ParamList<double>& params,
                          const std::function<Var<double>()>& loss, const GradcheckOptions& opt) {
  if (!(opt.eps > 0)) throw Error("gradcheck: eps must be positive");
  zero_grads(params);
  backward(loss());
  std::vector<Tensor<double>> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.var.has_grad() ? p.var.grad() : zeros<double>(p.var.shape()));
  }

  GradcheckReport report;
  report.fragment = fragment;
  Rng rng(opt.seed);
  NoGradGuard guard;
  for (std::size_t g = 0; g < params.size(); ++g) {
    Var<double> v = params[g].var;
    const std::int64_t n = v.numel();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_elems > 0 && n > opt.max_elems) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(opt.max_elems));
    }
    double max_diff = 0, max_a = 0, max_n = 0;
    for (std::int64_t i : idx) {
      double& x = v.mutable_value()[i];
      const double saved = x;
      x = saved + opt.eps;
      const double up = loss().value().item();
      x = saved - opt.eps;
      const double down = loss().value().item();
      x = saved;
      const double numeric = (up - down) / (2 * opt.eps);
      const double a = analytic[g][i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      max_a = std::max(max_a, std::abs(a));
      max_n = std::max(max_n, std::abs(numeric));
    }
    GradcheckGroup out;
    out.name = params[g].name;
    out.checked = static_cast<std::int64_t>(idx.size());
    out.max_abs_err = max_diff;
    out.max_rel_err = max_diff / std::max({max_a, max_n, 1e-12});
    report.groups.push_back(out);
  }
  zero_grads(params);
  return report;
}

namespace {

using D = double;

Var<D> input(Shape s, Rng& rng, double scale = 1.0) {
  return Var<D>(normal_tensor<D>(std::move(s), scale, rng), true);
}

GradcheckReport recurrent_fragment(const std::string& name, AttentionKind kind, std::int64_t chunk,
                                   const GradcheckOptions& opt) {
  Rng rng(opt.seed + 11);
  const std::int64_t b = 2, t = 7, d = 16;
  const Lengths lens{t, t - 2};
  ParamList<D> params;
  Var<D> x = input({b, t, d}, rng);
  params.push_back({"input", x});
  RecurrentState<D> s0;
  std::function<RecurrentOutput<D>()> run;
  if (kind == AttentionKind::kRwkv) {
    auto p = std::make_shared<RwkvParams<D>>(RwkvParams<D>::init(d, 2, 4, rng));
    p->collect(params, "");
    s0 = p->zero_state(b);
    run = [p, x, &s0, chunk, lens] { return rwkv_forward(*p, x, s0, chunk, lens); };
  } else {
    auto p = std::make_shared<Mamba2Params<D>>(Mamba2Params<D>::init(d, 2, 8, 4, rng));
    p->collect(params, "");
    s0 = p->zero_state(b);
    run = [p, x, &s0, chunk, lens] { return mamba2_forward(*p, x, s0, chunk, lens); };
  }
  s0.matrix = Var<D>(normal_tensor<D>(s0.matrix.shape(), 0.5, rng), true);
  s0.tail = Var<D>(normal_tensor<D>(s0.tail.shape(), 0.5, rng), true);
  params.push_back({"state.matrix", s0.matrix});
  params.push_back({"state.tail", s0.tail});
  const Tensor<D> wy = normal_tensor<D>({b, t, d}, 1.0, rng);
  RecurrentOutput<D> shape_probe = run();
  const Tensor<D> ws = normal_tensor<D>(shape_probe.state.matrix.shape(), 1.0, rng);
  const Tensor<D> wt = normal_tensor<D>(shape_probe.state.tail.shape(), 1.0, rng);
  auto loss = [&] {
    RecurrentOutput<D> o = run();
    return add(add(sum(mul(o.y, Var<D>(wy))), sum(mul(o.state.matrix, Var<D>(ws)))),
               sum(mul(o.state.tail, Var<D>(wt))));
  };
  return gradcheck(name, params, loss, opt);
}

GradcheckReport bidir_fragment(const std::string& name, AttentionKind kind, const GradcheckOptions& opt) {
  Rng rng(opt.seed + 17);
  const std::int64_t b = 2, t = 6, d = 16;
  const Lengths lens{t, t - 2};
  typename RecurrentParams<D>::Dims dims;
  dims.d_model = d;
  dims.n_heads = 2;
  dims.decay_rank = 4;
  dims.mamba_head_dim = 8;
  dims.mamba_state_dim = 4;
  DirectionalLayer<D> layer = DirectionalLayer<D>::init(kind, dims, true, rng);
  ParamList<D> params;
  Var<D> x = input({b, t, d}, rng);
  params.push_back({"input", x});
  layer.collect(params, "");
  const Tensor<D> w = normal_tensor<D>({b, t, d}, 1.0, rng);
  auto loss = [&] { return sum(mul(bidir_forward(layer, x, Direction::kBi, lens), Var<D>(w))); };
  return gradcheck(name, params, loss, opt);
}

EncoderConfig small_encoder(AttentionKind kind) {
  EncoderConfig c;
  c.n_layers = 1;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.conv_kernel = 3;
  c.d_in = 8;
  c.vocab_size = 4;
  c.attention_kind = kind;
  c.max_offset = 4;
  c.lca_left = 2;
  c.lca_right = 2;
  c.decay_rank = 4;
  c.mamba_head_dim = 8;
  c.mamba_state_dim = 4;
  return c;
}

GradcheckReport conformer_fragment(const std::string& name, AttentionKind kind, const GradcheckOptions& opt) {
  Rng rng(opt.seed + 23);
  const EncoderConfig cfg = small_encoder(kind);
  const std::int64_t b = 2, t = 6;
  const Lengths lens{t, t - 1};
  auto block = ConformerBlockParams<D>::init(cfg, rng);
  ParamList<D> params;
  Var<D> x = input({b, t, cfg.d_model}, rng);
  params.push_back({"input", x});
  block.collect(params, "");
  const Tensor<D> w = normal_tensor<D>({b, t, cfg.d_model}, 1.0, rng);
  const Direction mode = Direction::kBi;
  auto loss = [&] { return sum(mul(conformer_block_forward(block, cfg, x, lens, mode), Var<D>(w))); };
  return gradcheck(name, params, loss, opt);
}

}  // namespace

std::vector<std::string> gradcheck_fragments() {
  return {"mha",   "lca",          "rwkv",      "rwkv_chunked",  "mamba2",  "mamba2_chunked",
          "bidir", "bidir_mamba2", "conformer", "conformer_mha", "encoder", "ctc"};
}

GradcheckReport gradcheck_fragment(const std::string& name, const GradcheckOptions& opt) {
  if (name == "rwkv") return recurrent_fragment(name, AttentionKind::kRwkv, 0, opt);
  if (name == "rwkv_chunked") return recurrent_fragment(name, AttentionKind::kRwkv, 3, opt);
  if (name == "mamba2") return recurrent_fragment(name, AttentionKind::kMamba2, 0, opt);
  if (name == "mamba2_chunked") return recurrent_fragment(name, AttentionKind::kMamba2, 3, opt);
  if (name == "bidir") return bidir_fragment(name, AttentionKind::kRwkv, opt);
  if (name == "bidir_mamba2") return bidir_fragment(name, AttentionKind::kMamba2, opt);
  if (name == "conformer") return conformer_fragment(name, AttentionKind::kRwkv, opt);
  if (name == "conformer_mha") return conformer_fragment(name, AttentionKind::kMha, opt);

  if (name == "mha" || name == "lca") {
    Rng rng(opt.seed + 5);
    const std::int64_t b = 2, t = 8, d = 16;
    const Lengths lens{t, t - 3};
    auto p = MhaParams<D>::init(d, 4, 3, rng);
    ParamList<D> params;
    Var<D> x = input({b, t, d}, rng);
    params.push_back({"input", x});
    p.collect(params, "");
    // learned bias starts at zero; give it structure so its gradient is exercised
    p.rel_bias.mutable_value() = normal_tensor<D>(p.rel_bias.shape(), 0.5, rng);
    const Tensor<D> w = normal_tensor<D>({b, t, d}, 1.0, rng);
    if (name == "mha") {
      auto loss = [&] { return sum(mul(mha_forward(p, x, false, lens), Var<D>(w))); };
      return gradcheck(name, params, loss, opt);
    }
    auto c = LcaConfig<D>::init(2, 1, 1, d, rng);
    c.collect(params, "");
    auto loss = [&] { return sum(mul(lca_gt_forward(p, c, x, lens), Var<D>(w))); };
    return gradcheck(name, params, loss, opt);
  }

  if (name == "encoder") {
    Rng rng(opt.seed + 29);
    EncoderConfig cfg = small_encoder(AttentionKind::kRwkv);
    cfg.n_layers = 2;
    auto model = EncoderParams<D>::init(cfg, opt.seed + 31);
    ParamList<D> params = model.params();
    Var<D> x = input({2, 16, cfg.d_in}, rng);
    params.insert(params.begin(), {"input", x});
    const Lengths lens{16, 12};
    const std::vector<std::vector<int>> labels{{1, 2, 2}, {3}};
    const LayerSchedule sched = LayerSchedule::parse("alt", 2);
    auto loss = [&] {
      EncoderOutput<D> enc = encoder_forward(model, x, lens, sched);
      return ctc_loss(ctc_logits(model, enc.hidden), labels, enc.lengths);
    };
    return gradcheck(name, params, loss, opt);
  }

  if (name == "ctc") {
    Rng rng(opt.seed + 37);
    Var<D> logits = input({3, 6, 4}, rng);
    const std::vector<std::vector<int>> labels{{1, 2, 2}, {3}, {}};
    const Lengths lens{6, 4, 5};
    ParamList<D> params{{"logits", logits}};
    auto loss = [&] { return ctc_loss(log_softmax_lastdim(logits), labels, lens); };
    return gradcheck(name, params, loss, opt);
  }
  throw Error("unknown gradcheck fragment '" + name + "'");
}

}  // namespace rala
