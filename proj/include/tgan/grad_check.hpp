// Copyright 2026 The Triple-GAN Toolkit Authors.
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
#include <numeric>
#include <span>
#include <vector>

#include "tgan/graph.hpp"
#include "tgan/rng.hpp"

namespace tgan::ad {

/// Builds a scalar loss on a fresh graph. Must bind every checked parameter
/// with Graph::param and be a deterministic function of the parameter values.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double h = 1e-5;
  /// Coordinates probed per tensor; 0 probes all of them.
  std::size_t max_coords_per_param = 0;
  std::uint64_t coord_seed = 0;
};

/// Max over probed coordinates of |autodiff - central FD| / max(1, |central FD|).
inline double grad_check(const LossBuilder& build, std::span<Tensor* const> params,
                         const GradCheckOptions& opt = {}) {
  auto eval = [&] {
    Graph g;
    return g.value(build(g)).item();
  };
  Graph g;
  const Var loss = build(g);
  const double base = g.value(loss).item();
  if (eval() != base) throw ContractError("grad_check: loss builder is not deterministic");
  const GradMap grads = g.backward(loss);

  RngStream pick(opt.coord_seed, "grad_check.coords");
  double worst = 0.0;
  for (Tensor* p : params) {
    auto it = grads.find(p);
    if (it == grads.end()) throw ContractError("grad_check: parameter not bound by builder");
    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_param && coords.size() > opt.max_coords_per_param) {
      // Partial Fisher-Yates shuffle picks a reproducible subset.
      for (std::size_t i = 0; i < opt.max_coords_per_param; ++i)
        std::swap(coords[i], coords[i + pick.uniform_int(coords.size() - i)]);
      coords.resize(opt.max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double saved = (*p)[i];
      (*p)[i] = saved + opt.h;
      const double up = eval();
      (*p)[i] = saved - opt.h;
      const double down = eval();
      (*p)[i] = saved;
      const double fd = (up - down) / (2.0 * opt.h);
      const double err = std::abs(it->second[i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace tgan::ad
