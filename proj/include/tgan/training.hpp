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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tgan/checkpoint.hpp"
#include "tgan/config.hpp"
#include "tgan/eval.hpp"
#include "tgan/game.hpp"

namespace tgan::train {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Datasets {
  data::Dataset train;
  data::Dataset val;
  data::Dataset test;
};

inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t k) {
  return k == 0 ? seed : tgan::detail::mix64(seed ^ (k * RngStream::kGamma));
}

inline data::Dataset make_dataset(const cfg::DataConfig& d, std::size_t n, std::uint64_t seed, data::SplitTag tag) {
  switch (d.kind) {
    case data::Kind::mixture:
      return data::make_mixture(d.classes, n, d.radius, d.sigma, seed, d.dim, tag);
    case data::Kind::moons:
      return data::make_moons(n, d.sigma, seed, tag);
    case data::Kind::rings:
      return data::make_rings(d.classes, n, d.sigma, seed, tag);
  }
  throw ContractError("unknown dataset kind");
}

inline Datasets make_datasets(const cfg::DataConfig& d) {
  return {make_dataset(d, d.n_per_class, split_seed(d.seed, 0), data::SplitTag::train),
          make_dataset(d, d.val_per_class, split_seed(d.seed, 1), data::SplitTag::val),
          make_dataset(d, d.test_per_class, split_seed(d.seed, 2), data::SplitTag::test)};
}

inline game::ModelShape model_shape(const cfg::Config& c) {
  game::ModelShape s;
  s.input_dim = c.data.dim;
  s.classes = c.data.classes;
  s.classifier_hidden = c.model.classifier_hidden;
  s.generator_hidden = c.model.generator_hidden;
  s.disc_trunk = c.model.disc_trunk;
  s.latent = c.model.latent;
  s.variant = c.model.disc_variant;
  s.input_noise = c.model.input_noise;
  s.dropout = c.model.dropout;
  return s;
}

inline game::TrainState init_state(cfg::Config c, const Datasets& d) {
  cfg::resolve(c);
  const data::SemiSplit split =
      data::split_semi(d.train, c.data.labels_per_class, c.data.seed, c.data.regime == cfg::Regime::low_data);
  game::TripleGanModel model = game::make_model(model_shape(c), RngStream(c.run.seed, "init"));
  game::TrainState s = game::make_train_state(c.game, std::move(model), c.optim.adam, split, c.run.seed, c.run.dtype);
  s.augment = c.data.augment;
  s.augment_sigma = c.data.augment_sigma;
  s.linear_lr_decay = c.optim.lr_decay == cfg::LrDecay::linear;
  return s;
}

// ---------------------------------------------------------------------------
// State <-> checkpoint entries

inline std::vector<ckpt::Entry> state_entries(game::TrainState& s, const std::string& config_text) {
  std::vector<ckpt::Entry> out;
  out.push_back({"__config__", ckpt::text_tensor(config_text)});
  const std::uint64_t it = s.iter;
  out.push_back({"state.iter", ckpt::u64_tensor(std::span(&it, 1))});
  for (auto& [name, t] : s.model.named()) out.push_back({name, *t});
  for (auto [who, st] : {std::pair{"c", &s.adam_c}, {"d", &s.adam_d}, {"g", &s.adam_g}}) {
    const std::string p = std::string("adam.") + who;
    out.push_back({p + ".t", ckpt::u64_tensor(std::span(&st->t, 1))});
    for (std::size_t i = 0; i < st->m.size(); ++i) {
      out.push_back({p + ".m." + std::to_string(i), st->m[i]});
      out.push_back({p + ".v." + std::to_string(i), st->v[i]});
    }
  }
  for (auto& [name, r] : s.rng.named()) {
    const std::uint64_t v[3]{r->seed(), r->stream(), r->counter()};
    out.push_back({"rng." + name, ckpt::u64_tensor(v)});
  }
  for (auto [name, b] : {std::pair{"labeled", &s.labeled}, {"unlabeled", &s.unlabeled}}) {
    const std::uint64_t v[2]{b->epoch(), b->position()};
    out.push_back({std::string("batcher.") + name, ckpt::u64_tensor(v)});
  }
  return out;
}

inline void copy_into(Tensor& dst, const ckpt::Entry& e) {
  if (dst.shape() != e.tensor.shape())
    throw ckpt::CheckpointError("entry '" + e.name + "' has shape " + shape_str(e.tensor.shape()) +
                                ", model expects " + shape_str(dst.shape()));
  const Dtype d = dst.dtype();
  dst = e.tensor;
  dst.set_dtype(d);
}

inline void restore_state(game::TrainState& s, std::span<const ckpt::Entry> entries) {
  s.iter = ckpt::tensor_u64(ckpt::find(entries, "state.iter").tensor).at(0);
  for (auto& [name, t] : s.model.named()) copy_into(*t, ckpt::find(entries, name));
  for (auto [who, st] : {std::pair{"c", &s.adam_c}, {"d", &s.adam_d}, {"g", &s.adam_g}}) {
    const std::string p = std::string("adam.") + who;
    st->t = ckpt::tensor_u64(ckpt::find(entries, p + ".t").tensor).at(0);
    for (std::size_t i = 0; i < st->m.size(); ++i) {
      copy_into(st->m[i], ckpt::find(entries, p + ".m." + std::to_string(i)));
      copy_into(st->v[i], ckpt::find(entries, p + ".v." + std::to_string(i)));
    }
  }
  for (auto& [name, r] : s.rng.named()) {
    const auto v = ckpt::tensor_u64(ckpt::find(entries, "rng." + name).tensor);
    if (v.size() != 3) throw ckpt::CheckpointError("bad rng entry " + name);
    *r = RngStream(v[0], v[1], v[2]);
  }
  for (auto [name, b] : {std::pair{"labeled", &s.labeled}, {"unlabeled", &s.unlabeled}}) {
    const auto v = ckpt::tensor_u64(ckpt::find(entries, std::string("batcher.") + name).tensor);
    if (v.size() != 2) throw ckpt::CheckpointError(std::string("bad batcher entry ") + name);
    b->seek(v[0], static_cast<std::size_t>(v[1]));
  }
}

inline std::string checkpoint_config(std::span<const ckpt::Entry> entries) {
  return ckpt::tensor_text(ckpt::find(entries, "__config__").tensor);
}

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char* kMetricsHeader =
    "iter,loss_d,loss_g,loss_c_adv,r_c,r_p,r_u,err_val_student,err_val_teacher,alpha_p_eff,alpha_u_eff,time_ms";

struct MetricsRow {
  std::uint64_t iter = 0;
  double loss_d = 0, loss_g = 0, loss_c_adv = 0, r_c = 0, r_p = 0, r_u = 0;
  double err_val_student = 0, err_val_teacher = 0;
  double alpha_p_eff = 0, alpha_u_eff = 0, time_ms = 0;

  std::string csv() const {
    auto f = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    return std::to_string(iter) + "," + f(loss_d) + "," + f(loss_g) + "," + f(loss_c_adv) + "," + f(r_c) + "," +
           f(r_p) + "," + f(r_u) + "," + f(err_val_student) + "," + f(err_val_teacher) + "," + f(alpha_p_eff) +
           "," + f(alpha_u_eff) + "," + f(time_ms);
  }
};

/// Append-only writer that flushes after each row. Opening with `keep_upto`
/// drops existing rows past that iteration (used when resuming).
class MetricsWriter {
 public:
  MetricsWriter(const fs::path& path, std::optional<std::uint64_t> keep_upto) : path_(path) {
    std::vector<std::string> kept;
    if (keep_upto && fs::exists(path)) {
      std::ifstream in(path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) <= *keep_upto) kept.push_back(line);
      }
    }
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_ << kMetricsHeader << "\n";
    for (const auto& l : kept) out_ << l << "\n";
    out_.flush();
  }

  void write(const MetricsRow& r) {
    out_ << r.csv() << "\n";
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Driver

struct RunOptions {
  /// Stop (with a checkpoint) once this many iterations are done.
  std::optional<std::uint64_t> stop_at;
  bool verbose = false;
};

struct RunResult {
  game::TrainState state;
  fs::path out_dir;
  fs::path final_checkpoint;
  fs::path metrics;
};

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + p.string());
}

inline std::string read_text(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Pretrain C, then the full game; checkpoints and metrics land in `out`.
/// With `resume`, the embedded config and state of that checkpoint are used.
inline RunResult run_training(cfg::Config c, const fs::path& out, const std::optional<fs::path>& resume = {},
                              const RunOptions& opt = {}) {
  std::vector<ckpt::Entry> resume_entries;
  if (resume) {
    resume_entries = ckpt::load(*resume);
    c = cfg::parse_config(checkpoint_config(resume_entries));
  }
  c.run.out_dir = out.string();
  cfg::resolve(c);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  const std::string config_text = cfg::echo(c);
  write_text(out / "config.ini", config_text);

  const Datasets d = make_datasets(c.data);
  RunResult res{init_state(c, d), out, out / "final.tgan", out / "metrics.csv"};
  game::TrainState& s = res.state;
  if (resume) restore_state(s, resume_entries);
  MetricsWriter metrics(res.metrics, resume ? std::optional(s.iter) : std::nullopt);

  auto save = [&](const fs::path& p) { ckpt::save(p, state_entries(s, config_text)); };
  while (s.iter < c.run.iters) {
    const game::StepMetrics m = game::train_step(s, d.train);
    if (s.iter % c.run.metrics_interval == 0 || s.iter == c.run.iters) {
      MetricsRow row{m.iter, m.loss_d, m.loss_g, m.loss_c_adv, m.r_c, m.r_p, m.r_u,
                     eval::error_rate(s.model.classifier, d.val), eval::error_rate(s.model.teacher.net, d.val),
                     m.alpha_p_eff, m.alpha_u_eff, c.run.serial ? 0.0 : m.time_ms};
      metrics.write(row);
      if (opt.verbose)
        std::fprintf(stderr, "iter %llu  loss_d %.4f  loss_g %.4f  err_val %.4f/%.4f\n",
                     static_cast<unsigned long long>(m.iter), m.loss_d, m.loss_g, row.err_val_student,
                     row.err_val_teacher);
    }
    if (c.run.checkpoint_interval && s.iter % c.run.checkpoint_interval == 0)
      save(out / ("checkpoint_" + std::to_string(s.iter) + ".tgan"));
    if (opt.stop_at && s.iter >= *opt.stop_at) {
      res.final_checkpoint = out / ("checkpoint_" + std::to_string(s.iter) + ".tgan");
      save(res.final_checkpoint);
      return res;
    }
  }
  save(res.final_checkpoint);
  return res;
}

/// Rebuilds config, datasets and trained state from a checkpoint file.
struct LoadedRun {
  cfg::Config config;
  Datasets data;
  game::TrainState state;
};

inline LoadedRun load_run(const fs::path& checkpoint) {
  const auto entries = ckpt::load(checkpoint);
  cfg::Config c = cfg::parse_config(checkpoint_config(entries));
  Datasets d = make_datasets(c.data);
  game::TrainState s = init_state(c, d);
  restore_state(s, entries);
  return {std::move(c), std::move(d), std::move(s)};
}

}  // namespace tgan::train
