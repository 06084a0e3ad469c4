// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "layoutcorr/nn.hpp"

namespace gradcheck {

struct Result {
  int checked = 0;
  double worst_rel = 0.0;
  std::string worst_name;
};

// Central differences on `count` coordinates drawn from every parameter
// group in turn. `loss` must not touch the gradients; `grads` must hold the
// analytic gradient already.
inline Result run(layoutcorr::nn::ParamSet<double>& ps, const std::function<double()>& loss, int count,
                  layoutcorr::Rng& rng, double h = 1e-5) {
  Result r;
  const auto& groups = ps.all();
  std::vector<std::pair<std::size_t, Eigen::Index>> picks;
  for (int i = 0; i < count; ++i) {
    const std::size_t g = static_cast<std::size_t>(i) % groups.size();
    picks.emplace_back(g, static_cast<Eigen::Index>(rng.below(groups[g]->value.size())));
  }
  for (auto [g, idx] : picks) {
    auto& p = *groups[g];
    const double analytic = p.grad.data()[idx];
    const double saved = p.value.data()[idx];
    p.value.data()[idx] = saved + h;
    const double up = loss();
    p.value.data()[idx] = saved - h;
    const double down = loss();
    p.value.data()[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
    const double rel = std::abs(analytic - numeric) / denom;
    ++r.checked;
    if (rel > r.worst_rel) {
      r.worst_rel = rel;
      r.worst_name = p.name;
    }
  }
  return r;
}

}  // namespace gradcheck
