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
#include <functional>
#include <string>
#include <vector>

#include "rala/autograd.hpp"

namespace rala {

struct GradcheckOptions {
  double eps = 1e-6;             // central-difference step
  std::int64_t max_elems = 0;    // per group; 0 checks every element
  std::uint64_t seed = 1;        // picks elements when subsampling
};

// Per parameter group: rel_err = max|analytic - numeric| divided by the
// larger of max|analytic| and max|numeric| (floored at 1e-12).
struct GradcheckGroup {
  std::string name;
  std::int64_t checked = 0;
  double max_abs_err = 0;
  double max_rel_err = 0;
};

struct GradcheckReport {
  std::string fragment;
  std::vector<GradcheckGroup> groups;

  double max_rel_err() const;
  bool passed(double tol) const { return max_rel_err() < tol; }
};

// Compares backward() of a scalar loss against central differences for every
// tensor in `params`. The loss closure must rebuild the graph on each call.
GradcheckReport gradcheck(const std::string& fragment, const ParamList<double>& params,
                          const std::function<Var<double>()>& loss,
                          const GradcheckOptions& opt = {});

// Named layer fragments at t <= 8, d_model <= 16 (encoder: 16 input frames):
// mha, lca, rwkv, rwkv_chunked, mamba2, mamba2_chunked, bidir, bidir_mamba2,
// conformer, conformer_mha, encoder, ctc.
std::vector<std::string> gradcheck_fragments();
GradcheckReport gradcheck_fragment(const std::string& name, const GradcheckOptions& opt = {});

}  // namespace rala
