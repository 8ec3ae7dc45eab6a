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
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "tgan/adam.hpp"
#include "tgan/graph.hpp"
#include "tgan/rng.hpp"
#include "tgan/tensor.hpp"

// Exact finite-space version of the game. Joints are |X|×|Y| tables.
namespace tgan::oracle {

inline constexpr double kLn4 = 2.0 * std::numbers::ln2;

inline void require_joint(const Tensor& q, const char* op) {
  if (q.rank() != 2) throw DimensionError(std::string(op) + ": joint must be a matrix");
  double total = 0.0;
  for (double v : q.data()) {
    if (!(v >= 0.0)) throw ContractError(std::string(op) + ": negative or NaN probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError(std::string(op) + ": joint does not sum to 1");
}

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// Σ q1 ln(q1/q2); +inf when q2 = 0 somewhere q1 > 0.
inline double kl(const Tensor& q1, const Tensor& q2) {
  require_same(q1, q2, "kl");
  double s = 0.0;
  for (std::size_t i = 0; i < q1.size(); ++i) {
    if (q1[i] == 0.0) continue;
    if (q2[i] == 0.0) return std::numeric_limits<double>::infinity();
    s += q1[i] * std::log(q1[i] / q2[i]);
  }
  return std::max(s, 0.0);
}

inline double jsd(const Tensor& q1, const Tensor& q2) {
  require_same(q1, q2, "jsd");
  Tensor m = q1;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (q1[i] + q2[i]);
  return 0.5 * kl(q1, m) + 0.5 * kl(q2, m);
}

struct Marginals {
  std::vector<double> px;
  std::vector<double> py;
};

inline Marginals marginals(const Tensor& q) {
  Marginals m{std::vector<double>(q.rows(), 0.0), std::vector<double>(q.cols(), 0.0)};
  for (std::size_t x = 0; x < q.rows(); ++x)
    for (std::size_t y = 0; y < q.cols(); ++y) {
      m.px[x] += q.at(x, y);
      m.py[y] += q.at(x, y);
    }
  return m;
}

/// p_α = (1-α) p_g + α p_c.
inline Tensor mixture(const Tensor& p_c, const Tensor& p_g, double alpha) {
  require_same(p_c, p_g, "mixture");
  Tensor out = p_c;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - alpha) * p_g[i] + alpha * p_c[i];
  return out;
}

inline double max_abs(const Tensor& a, const Tensor& b) { return max_abs_diff(a, b); }

/// D* = p / (p + p_α); 0.5 where both vanish.
inline Tensor optimal_discriminator(const Tensor& p, const Tensor& p_c, const Tensor& p_g, double alpha) {
  require_same(p, p_c, "optimal_discriminator");
  const Tensor pa = mixture(p_c, p_g, alpha);
  Tensor d = p;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double den = p[i] + pa[i];
    d[i] = den == 0.0 ? 0.5 : p[i] / den;
  }
  return d;
}

struct UValue {
  double value = 0.0;
  /// False when a log of zero carries positive weight (value is then -inf).
  bool finite = true;
};

/// Σ p log D + p_α log(1-D) over a probability table D.
inline UValue exact_U(const Tensor& p, const Tensor& p_alpha, const Tensor& d) {
  require_same(p, p_alpha, "exact_U");
  require_same(p, d, "exact_U");
  UValue out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (d[i] <= 0.0) out.finite = false;
      else out.value += p[i] * std::log(d[i]);
    }
    if (p_alpha[i] > 0.0) {
      if (d[i] >= 1.0) out.finite = false;
      else out.value += p_alpha[i] * std::log1p(-d[i]);
    }
  }
  if (!out.finite) out.value = -std::numeric_limits<double>::infinity();
  return out;
}

/// Same objective parameterized by D logits, in log-sigmoid form.
inline double exact_U_logits(const Tensor& p, const Tensor& p_alpha, const Tensor& d_logits) {
  require_same(p, d_logits, "exact_U_logits");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    s -= p[i] * ad::detail::softplus(-d_logits[i]) + p_alpha[i] * ad::detail::softplus(d_logits[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Tabular game: conditionals are logit tables with softmax rows.

struct TabularGame {
  Tensor p;         // |X|×|Y|
  Tensor c_logits;  // |X|×|Y|, rows -> p_c(y|x)
  Tensor g_logits;  // |Y|×|X|, rows -> p_g(x|y)
  Tensor d_logits;  // |X|×|Y|
  double alpha = 0.5;

  std::size_t nx() const { return p.rows(); }
  std::size_t ny() const { return p.cols(); }
};

inline Tensor joint_from_classifier(const Tensor& p, const Tensor& c_logits) {
  const auto m = marginals(p);
  Tensor pc = ad::softmax_rows(c_logits);
  for (std::size_t x = 0; x < pc.rows(); ++x)
    for (std::size_t y = 0; y < pc.cols(); ++y) pc.at(x, y) *= m.px[x];
  return pc;
}

inline Tensor joint_from_generator(const Tensor& p, const Tensor& g_logits) {
  const auto m = marginals(p);
  const Tensor cond = ad::softmax_rows(g_logits);
  Tensor pg = Tensor::matrix(p.rows(), p.cols());
  for (std::size_t x = 0; x < p.rows(); ++x)
    for (std::size_t y = 0; y < p.cols(); ++y) pg.at(x, y) = m.py[y] * cond.at(y, x);
  return pg;
}

inline Tensor p_c(const TabularGame& g) { return joint_from_classifier(g.p, g.c_logits); }
inline Tensor p_g(const TabularGame& g) { return joint_from_generator(g.p, g.g_logits); }
inline Tensor p_alpha(const TabularGame& g) { return mixture(p_c(g), p_g(g), g.alpha); }

inline UValue exact_U(const TabularGame& g) {
  Tensor d = g.d_logits;
  for (double& v : d.data()) v = ad::detail::sigmoid(v);
  return exact_U(g.p, p_alpha(g), d);
}

/// Strictly positive random joint; entries uniform in [0.1, 1) before normalization.
inline Tensor random_joint(std::size_t nx, std::size_t ny, RngStream& rng) {
  Tensor q = Tensor::matrix(nx, ny);
  double total = 0.0;
  for (double& v : q.data()) total += (v = 0.1 + 0.9 * rng.uniform());
  for (double& v : q.data()) v /= total;
  return q;
}

inline Tensor random_logits(std::size_t r, std::size_t c, RngStream& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

inline TabularGame random_game(std::size_t nx, std::size_t ny, double alpha, RngStream& rng) {
  TabularGame g;
  g.p = random_joint(nx, ny, rng);
  g.c_logits = random_logits(nx, ny, rng);
  g.g_logits = random_logits(ny, nx, rng);
  g.d_logits = random_logits(nx, ny, rng);
  g.alpha = alpha;
  return g;
}

struct VResult {
  double plug_in = 0.0;  // exact_U at D*
  double jsd_form = 0.0;  // -ln 4 + 2 JSD(p ‖ p_α)
  double difference = 0.0;
};

inline VResult exact_V(const Tensor& p, const Tensor& p_c, const Tensor& p_g, double alpha) {
  const Tensor pa = mixture(p_c, p_g, alpha);
  VResult r;
  r.plug_in = exact_U(p, pa, optimal_discriminator(p, p_c, p_g, alpha)).value;
  r.jsd_form = -kLn4 + 2.0 * jsd(p, pa);
  r.difference = std::abs(r.plug_in - r.jsd_form);
  return r;
}

/// Maximizes exact_U over D logits by Adam ascent through the autodiff graph.
inline Tensor maximize_discriminator(const Tensor& p, const Tensor& p_alpha, std::size_t iters = 4000,
                                     double lr = 0.1) {
  Tensor logits(p.shape(), 0.0);
  std::vector<Tensor*> params{&logits};
  ad::AdamState st(ad::AdamConfig{lr, 0.9, 0.999, 1e-12}, params);
  for (std::size_t t = 0; t < iters; ++t) {
    ad::Graph g;
    ad::Var l = g.param(logits);
    ad::Var pos = ad::sum(g, ad::mul(g, g.constant(p), ad::softplus(g, ad::scale(g, l, -1.0))));
    ad::Var neg = ad::sum(g, ad::mul(g, g.constant(p_alpha), ad::softplus(g, l)));
    ad::Var loss = ad::add(g, pos, neg);  // = -U
    auto grads = g.backward(loss);
    st.config.lr = lr / (1.0 + 4.0 * static_cast<double>(t) / static_cast<double>(iters));
    ad::adam_step(params, grads, st);
  }
  for (double& v : logits.data()) v = ad::detail::sigmoid(v);
  return logits;
}

// ---------------------------------------------------------------------------
// R_P versus KL(p_g ‖ p_c)

struct RpKlReport {
  double grad_gap = 0.0;     // max |∇R_P - ∇KL| over c_logits
  double value_drift = 0.0;  // max change of R_P - KL under perturbations
  double r_p = 0.0;
  double kl = 0.0;
};

inline double r_p_value(const Tensor& pg, const Tensor& c_logits) {
  const Tensor ls = ad::detail::log_softmax_rows_value(c_logits);
  double s = 0.0;
  for (std::size_t i = 0; i < pg.size(); ++i) s -= pg[i] * ls[i];
  return s;
}

/// ∂R_P/∂c[x,y] = p_g(x)·p_c(y|x) - p_g(x,y).
inline Tensor r_p_grad_analytic(const Tensor& pg, const Tensor& c_logits) {
  const Tensor sm = ad::softmax_rows(c_logits);
  const auto m = marginals(pg);
  Tensor out = sm;
  for (std::size_t x = 0; x < sm.rows(); ++x)
    for (std::size_t y = 0; y < sm.cols(); ++y) out.at(x, y) = m.px[x] * sm.at(x, y) - pg.at(x, y);
  return out;
}

/// KL(p_g ‖ p(x)p_c(y|x)) differentiated by the autodiff graph.
inline Tensor kl_grad_autodiff(const Tensor& p, const Tensor& pg, const Tensor& c_logits, double* value) {
  const auto m = marginals(p);
  Tensor logpx = Tensor::matrix(p.rows(), p.cols());
  for (std::size_t x = 0; x < p.rows(); ++x)
    for (std::size_t y = 0; y < p.cols(); ++y) logpx.at(x, y) = std::log(m.px[x]);
  double ent = 0.0;
  for (double v : pg.data())
    if (v > 0.0) ent += v * std::log(v);
  ad::Graph g;
  ad::Var c = g.param(c_logits);
  ad::Var logq = ad::add(g, ad::log_softmax_rows(g, c), g.constant(logpx));
  ad::Var cross = ad::sum(g, ad::mul(g, g.constant(pg), logq));
  ad::Var loss = ad::sub(g, g.constant(Tensor::scalar(ent)), cross);
  if (value) *value = g.value(loss).item();
  return g.backward(loss).at(&c_logits);
}

inline RpKlReport rp_kl_equivalence_check(const TabularGame& game, RngStream& rng, std::size_t perturbations = 10) {
  RpKlReport r;
  const Tensor pg = p_g(game);
  double kl_val = 0.0;
  const Tensor ga = r_p_grad_analytic(pg, game.c_logits);
  const Tensor gk = kl_grad_autodiff(game.p, pg, game.c_logits, &kl_val);
  r.grad_gap = max_abs(ga, gk);
  r.r_p = r_p_value(pg, game.c_logits);
  r.kl = kl_val;
  const double base = r.r_p - r.kl;
  for (std::size_t k = 0; k < perturbations; ++k) {
    Tensor c = game.c_logits;
    for (double& v : c.data()) v += rng.normal();
    double kv = 0.0;
    const Tensor gk2 = kl_grad_autodiff(game.p, pg, c, &kv);
    r.grad_gap = std::max(r.grad_gap, max_abs(r_p_grad_analytic(pg, c), gk2));
    r.value_drift = std::max(r.value_drift, std::abs((r_p_value(pg, c) - kv) - base));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Equilibrium search: D analytic each round, gradient descent on C and G.

struct EquilibriumOptions {
  std::size_t iters = 5000;
  double step = 0.5;
  /// Include R_C; the pure adversarial game drops it together with R_P.
  bool include_rc = true;
  /// Weight of the added KL(p_c ‖ p_g) term.
  double lambda_extra = 0.0;
  /// Start from p_c = p_g = p instead of random logits.
  bool init_at_target = false;
  std::size_t divergence_window = 50;
};

struct RoundDistances {
  double dist_c = 0.0;
  double dist_g = 0.0;
  double dist_alpha = 0.0;
};

struct EquilibriumResult {
  Tensor p_c;
  Tensor p_g;
  Tensor c_logits;
  Tensor g_logits;
  std::vector<RoundDistances> trajectory;
  bool diverged = false;

  const RoundDistances& final_distances() const { return trajectory.back(); }
};

namespace detail {

inline Tensor row_broadcast(const std::vector<double>& v, std::size_t cols, bool log_values) {
  Tensor t = Tensor::matrix(v.size(), cols);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) t.at(i, j) = log_values ? std::log(v[i]) : v[i];
  return t;
}

inline Tensor col_broadcast(const std::vector<double>& v, std::size_t rows, bool log_values) {
  Tensor t = Tensor::matrix(rows, v.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < v.size(); ++j) t.at(i, j) = log_values ? std::log(v[j]) : v[j];
  return t;
}

inline Tensor safe_log(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data()) v = std::log(std::max(v, 1e-300));
  return out;
}

}  // namespace detail

/// C descends U + R_C + α_P R_P (+ λ KL(p_c‖p_g)); G descends U (+ λ KL(p_c‖p_g)).
inline EquilibriumResult solve_equilibrium(const Tensor& p, double alpha, double alpha_p, RngStream& rng,
                                           const EquilibriumOptions& opt = {}) {
  require_joint(p, "solve_equilibrium");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("solve_equilibrium: alpha must lie in (0,1)");
  if (alpha_p < 0.0 || opt.lambda_extra < 0.0) throw ContractError("solve_equilibrium: negative weight");
  const std::size_t nx = p.rows(), ny = p.cols();
  const auto m = marginals(p);
  const Tensor px = detail::row_broadcast(m.px, ny, false);
  const Tensor log_px = detail::row_broadcast(m.px, ny, true);
  const Tensor py = detail::col_broadcast(m.py, nx, false);
  const Tensor log_py = detail::col_broadcast(m.py, nx, true);

  EquilibriumResult r;
  if (opt.init_at_target) {
    r.c_logits = detail::safe_log(ad::softmax_rows(detail::safe_log(p)));
    Tensor pt = Tensor::matrix(ny, nx);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) pt.at(y, x) = p.at(x, y) / m.py[y];
    r.g_logits = detail::safe_log(pt);
  } else {
    r.c_logits = random_logits(nx, ny, rng);
    r.g_logits = random_logits(ny, nx, rng);
  }

  auto record = [&] {
    r.p_c = joint_from_classifier(p, r.c_logits);
    r.p_g = joint_from_generator(p, r.g_logits);
    r.trajectory.push_back({max_abs(r.p_c, p), max_abs(r.p_g, p), max_abs(mixture(r.p_c, r.p_g, alpha), p)});
  };
  record();

  std::size_t growing = 0;
  for (std::size_t t = 0; t < opt.iters; ++t) {
    const Tensor d = optimal_discriminator(p, r.p_c, r.p_g, alpha);
    Tensor log1m_d = d;
    for (double& v : log1m_d.data()) v = std::log1p(-v);
    const Tensor log_pc = detail::safe_log(r.p_c);
    const Tensor log_pg = detail::safe_log(r.p_g);

    Tensor gc, gg;
    {
      ad::Graph g;
      ad::Var c = g.param(r.c_logits);
      ad::Var ls = ad::log_softmax_rows(g, c);
      ad::Var pc = ad::mul(g, ad::softmax_rows(g, c), g.constant(px));
      ad::Var loss = ad::scale(g, ad::sum(g, ad::mul(g, pc, g.constant(log1m_d))), alpha);
      if (opt.include_rc)
        loss = ad::sub(g, loss, ad::sum(g, ad::mul(g, g.constant(p), ls)));
      if (alpha_p > 0.0)
        loss = ad::sub(g, loss, ad::scale(g, ad::sum(g, ad::mul(g, g.constant(r.p_g), ls)), alpha_p));
      if (opt.lambda_extra > 0.0) {
        ad::Var logq = ad::sub(g, ad::add(g, ls, g.constant(log_px)), g.constant(log_pg));
        loss = ad::add(g, loss, ad::scale(g, ad::sum(g, ad::mul(g, pc, logq)), opt.lambda_extra));
      }
      gc = g.backward(loss).at(&r.c_logits);
    }
    {
      ad::Graph g;
      ad::Var gl = g.param(r.g_logits);
      ad::Var ls_t = ad::transpose(g, ad::log_softmax_rows(g, gl));
      ad::Var pg = ad::mul(g, ad::transpose(g, ad::softmax_rows(g, gl)), g.constant(py));
      ad::Var loss = ad::scale(g, ad::sum(g, ad::mul(g, pg, g.constant(log1m_d))), 1.0 - alpha);
      if (opt.lambda_extra > 0.0) {
        ad::Var logpg = ad::add(g, ls_t, g.constant(log_py));
        loss = ad::sub(g, loss, ad::scale(g, ad::sum(g, ad::mul(g, g.constant(r.p_c), logpg)), opt.lambda_extra));
      }
      gg = g.backward(loss).at(&r.g_logits);
    }
    for (std::size_t i = 0; i < gc.size(); ++i) r.c_logits[i] -= opt.step * gc[i];
    for (std::size_t i = 0; i < gg.size(); ++i) r.g_logits[i] -= opt.step * gg[i];

    const RoundDistances prev = r.trajectory.back();
    record();
    const RoundDistances& now = r.trajectory.back();
    const bool grew = std::max(now.dist_c, now.dist_g) > std::max(prev.dist_c, prev.dist_g) &&
                      now.dist_alpha > prev.dist_alpha;
    growing = grew ? growing + 1 : 0;
    if (growing >= opt.divergence_window) {
      r.diverged = true;
      break;
    }
  }
  return r;
}

struct InvarianceReport {
  EquilibriumResult base;
  EquilibriumResult regularized;
};

/// Same seed for both runs, so λ = 0 reproduces the base trajectory exactly.
inline InvarianceReport regularizer_invariance_check(const Tensor& p, double alpha, double alpha_p,
                                                     double lambda_extra, std::uint64_t seed,
                                                     EquilibriumOptions opt = {}) {
  if (lambda_extra < 0.0) throw ContractError("regularizer_invariance_check: lambda must be >= 0");
  InvarianceReport r;
  RngStream a(seed, "oracle.equilibrium"), b(seed, "oracle.equilibrium");
  opt.lambda_extra = 0.0;
  r.base = solve_equilibrium(p, alpha, alpha_p, a, opt);
  opt.lambda_extra = lambda_extra;
  r.regularized = solve_equilibrium(p, alpha, alpha_p, b, opt);
  return r;
}

/// Constructed game with p_α = p: p_g = p + εE, p_c = p - ((1-α)/α)εE with E
/// double-centered, then both rebuilt from their conditional factorizations.
struct ConstructedGame {
  Tensor p;
  Tensor p_c;
  Tensor p_g;
  double alpha = 0.5;
};

inline ConstructedGame construct_matched_game(std::size_t nx, std::size_t ny, double alpha, RngStream& rng) {
  ConstructedGame out;
  out.alpha = alpha;
  out.p = random_joint(nx, ny, rng);
  Tensor e = random_logits(nx, ny, rng);
  const auto me = marginals(e);
  double grand = 0.0;
  for (double v : e.data()) grand += v;
  grand /= static_cast<double>(nx * ny);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y)
      e.at(x, y) -= me.px[x] / static_cast<double>(ny) + me.py[y] / static_cast<double>(nx) - grand;
  double emax = 0.0, pmin = 1.0;
  for (double v : e.data()) emax = std::max(emax, std::abs(v));
  for (double v : out.p.data()) pmin = std::min(pmin, v);
  const double ratio = (1.0 - alpha) / alpha;
  const double eps = 0.5 * pmin / (emax * std::max(1.0, ratio));
  Tensor pg = out.p, pc = out.p;
  for (std::size_t i = 0; i < pg.size(); ++i) {
    pg[i] += eps * e[i];
    pc[i] -= ratio * eps * e[i];
  }
  const auto m = marginals(out.p);
  Tensor c_logits = pc, g_logits = Tensor::matrix(ny, nx);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      c_logits.at(x, y) = std::log(pc.at(x, y) / m.px[x]);
      g_logits.at(y, x) = std::log(pg.at(x, y) / m.py[y]);
    }
  out.p_c = joint_from_classifier(out.p, c_logits);
  out.p_g = joint_from_generator(out.p, g_logits);
  return out;
}

inline double marginal_gap(const Tensor& a, const Tensor& b) {
  const auto ma = marginals(a), mb = marginals(b);
  double gap = 0.0;
  for (std::size_t i = 0; i < ma.px.size(); ++i) gap = std::max(gap, std::abs(ma.px[i] - mb.px[i]));
  for (std::size_t i = 0; i < ma.py.size(); ++i) gap = std::max(gap, std::abs(ma.py[i] - mb.py[i]));
  return gap;
}

// ---------------------------------------------------------------------------
// Verification suite shared by the CLI and the acceptance runner.

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline CheckResult check_lemma1(std::size_t games, std::size_t perturbations, std::uint64_t seed) {
  RngStream rng(seed, "oracle.lemma1");
  double worst = 0.0;
  bool maximal = true;
  for (std::size_t k = 0; k < games; ++k) {
    TabularGame g = random_game(4, 3, 0.5, rng);
    const Tensor pc = p_c(g), pg = p_g(g), pa = mixture(pc, pg, g.alpha);
    const Tensor dstar = optimal_discriminator(g.p, pc, pg, g.alpha);
    worst = std::max(worst, max_abs(maximize_discriminator(g.p, pa), dstar));
    const double best = exact_U(g.p, pa, dstar).value;
    for (std::size_t j = 0; j < perturbations; ++j) {
      Tensor d = dstar;
      for (double& v : d.data()) {
        const double l = std::log(v / (1.0 - v)) + 0.5 * rng.normal();
        v = ad::detail::sigmoid(l);
      }
      if (exact_U(g.p, pa, d).value > best) maximal = false;
    }
  }
  return {"lemma1", worst < 1e-3 && maximal,
          "max |D_opt - D*| = " + sci(worst) + (maximal ? ", D* maximal" : ", D* beaten")};
}

inline CheckResult check_lemma2(std::size_t games, std::uint64_t seed) {
  RngStream rng(seed, "oracle.lemma2");
  double worst = 0.0, worst_eq = 0.0;
  bool bounded = true;
  for (std::size_t k = 0; k < games; ++k) {
    TabularGame g = random_game(4, 3, 0.5, rng);
    const VResult v = exact_V(g.p, p_c(g), p_g(g), g.alpha);
    worst = std::max(worst, v.difference);
    if (v.plug_in < -kLn4 - 1e-12) bounded = false;
    const VResult eq = exact_V(g.p, g.p, g.p, g.alpha);
    worst_eq = std::max(worst_eq, std::abs(eq.plug_in + kLn4));
  }
  return {"lemma2", worst < 1e-10 && worst_eq < 1e-9 && bounded,
          "max identity gap = " + sci(worst) + ", max |V + ln4| at p_alpha = p: " +
              sci(worst_eq)};
}

inline CheckResult check_marginals(std::size_t games, std::uint64_t seed) {
  RngStream rng(seed, "oracle.marginals");
  double worst = 0.0, worst_mix = 0.0;
  for (std::size_t k = 0; k < games; ++k) {
    const double alpha = 0.2 + 0.6 * rng.uniform();
    ConstructedGame g = construct_matched_game(4, 3, alpha, rng);
    worst_mix = std::max(worst_mix, max_abs(mixture(g.p_c, g.p_g, alpha), g.p));
    worst = std::max({worst, marginal_gap(g.p, g.p_c), marginal_gap(g.p, g.p_g)});
  }
  return {"marginals", worst < 1e-10 && worst_mix < 1e-10,
          "max marginal gap = " + sci(worst) + ", max |p_alpha - p| = " + sci(worst_mix)};
}

inline CheckResult check_rp_kl(std::size_t games, std::uint64_t seed) {
  RngStream rng(seed, "oracle.rp_kl");
  double gap = 0.0, drift = 0.0;
  for (std::size_t k = 0; k < games; ++k) {
    TabularGame g = random_game(4, 3, 0.5, rng);
    RpKlReport r = rp_kl_equivalence_check(g, rng);
    gap = std::max(gap, r.grad_gap);
    drift = std::max(drift, r.value_drift);
  }
  return {"rp_kl", gap < 1e-10 && drift < 1e-10,
          "max grad gap = " + sci(gap) + ", max value drift = " + sci(drift)};
}

struct EquilibriumSweep {
  double worst_c = 0.0;
  double worst_g = 0.0;
  bool any_diverged = false;
};

inline EquilibriumSweep sweep_equilibrium(std::size_t targets, std::size_t seeds, double alpha_p, double lambda,
                                          std::uint64_t seed, const EquilibriumOptions& base = {}) {
  EquilibriumSweep s;
  RngStream target_rng(seed, "oracle.targets");
  for (std::size_t t = 0; t < targets; ++t) {
    const Tensor p = random_joint(4, 3, target_rng);
    for (std::size_t k = 0; k < seeds; ++k) {
      EquilibriumOptions opt = base;
      opt.lambda_extra = lambda;
      RngStream rng = RngStream(seed, "oracle.equilibrium").derive(t * seeds + k);
      EquilibriumResult r = solve_equilibrium(p, 0.5, alpha_p, rng, opt);
      s.worst_c = std::max(s.worst_c, r.final_distances().dist_c);
      s.worst_g = std::max(s.worst_g, r.final_distances().dist_g);
      s.any_diverged = s.any_diverged || r.diverged;
    }
  }
  return s;
}

inline CheckResult check_theorem(std::size_t targets, std::size_t seeds, std::uint64_t seed) {
  const EquilibriumSweep s = sweep_equilibrium(targets, seeds, 0.5, 0.0, seed);
  const bool converged = s.worst_c < 0.02 && s.worst_g < 0.02;

  // Pure adversarial game: any p_α = p is optimal, so p_c need not reach p.
  EquilibriumOptions pure;
  pure.include_rc = false;
  RngStream target_rng(seed, "oracle.targets");
  bool witnessed = false;
  double witness_c = 0.0, witness_alpha = 0.0;
  for (std::size_t t = 0; t < targets && !witnessed; ++t) {
    const Tensor p = random_joint(4, 3, target_rng);
    for (std::size_t k = 0; k < seeds && !witnessed; ++k) {
      RngStream rng = RngStream(seed, "oracle.equilibrium.pure").derive(t * seeds + k);
      const auto d = solve_equilibrium(p, 0.5, 0.0, rng, pure).final_distances();
      if (d.dist_alpha < 1e-3 && d.dist_c > 0.02) {
        witnessed = true;
        witness_c = d.dist_c;
        witness_alpha = d.dist_alpha;
      }
    }
  }
  return {"theorem", converged && witnessed,
          "alpha_P=0.5: max|p_c-p| = " + sci(s.worst_c) + ", max|p_g-p| = " +
              sci(s.worst_g) + "; alpha_P=0 witness: " +
              (witnessed ? "|p-p_alpha| = " + sci(witness_alpha) +
                               ", max|p_c-p| = " + sci(witness_c)
                         : std::string("none"))};
}

inline CheckResult check_regularizer_invariance(std::size_t targets, std::size_t seeds, std::uint64_t seed) {
  const EquilibriumSweep s = sweep_equilibrium(targets, seeds, 0.5, 0.1, seed);
  return {"regularizer_invariance", s.worst_c < 0.02 && s.worst_g < 0.02,
          "with 0.1*KL(p_c||p_g): max|p_c-p| = " + sci(s.worst_c) +
              ", max|p_g-p| = " + sci(s.worst_g)};
}

}  // namespace tgan::oracle
