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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tgan/graph.hpp"
#include "tgan/tensor.hpp"

namespace tgan::ad {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<Tensor* const> params) : config(cfg) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Tensor* p : params) {
      m.emplace_back(p->shape(), 0.0, p->dtype());
      v.emplace_back(p->shape(), 0.0, p->dtype());
    }
  }
};

/// One bias-corrected Adam update. Parameters absent from `grads` are treated
/// as having zero gradient.
inline void adam_step(std::span<Tensor* const> params, const GradMap& grads, AdamState& state) {
  if (state.m.size() != params.size())
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  ++state.t;
  const auto& c = state.config;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    if (m.shape() != p.shape())
      throw DimensionError("adam_step: moment shape " + shape_str(m.shape()) + " vs param " +
                           shape_str(p.shape()));
    auto it = grads.find(params[k]);
    const Tensor* gr = it == grads.end() ? nullptr : &it->second;
    if (gr && gr->shape() != p.shape())
      throw DimensionError("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gr ? (*gr)[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    p.round_to_dtype();
    m.round_to_dtype();
    v.round_to_dtype();
  }
}

}  // namespace tgan::ad
