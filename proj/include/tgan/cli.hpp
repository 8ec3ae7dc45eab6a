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

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "tgan/grad_suite.hpp"
#include "tgan/oracle.hpp"
#include "tgan/training.hpp"

namespace tgan::cli {

inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kUsage = 2;

namespace detail {

inline cfg::Config load_config(const std::string& path, std::optional<std::uint64_t> seed, bool serial) {
  std::string text;
  try {
    text = train::read_text(path);
  } catch (const train::IoError& e) {
    throw cfg::ConfigError(e.what());
  }
  cfg::Config c = cfg::parse_config(text);
  if (seed) {
    c.run.seed = *seed;
    c.data.seed = *seed;
  }
  if (serial) c.run.serial = true;
  return c;
}

inline void write_dataset_csv(const std::filesystem::path& p, const data::Dataset& d,
                              const std::vector<bool>* labeled = nullptr) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw train::IoError("cannot open " + p.string() + " for writing");
  f << "label";
  if (labeled) f << ",labeled";
  for (std::size_t j = 0; j < d.dim(); ++j) f << ",x" << j;
  f << "\n";
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    f << d.labels[i];
    if (labeled) f << "," << ((*labeled)[i] ? 1 : 0);
    for (std::size_t j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features.at(i, j));
      f << "," << buf;
    }
    f << "\n";
  }
  if (!f) throw train::IoError("write failed: " + p.string());
}

inline void write_points_csv(std::ofstream& f, std::size_t label, const Tensor& x, std::size_t offset_col) {
  char buf[32];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    f << label;
    if (offset_col != static_cast<std::size_t>(-1)) f << "," << i;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", x.at(i, j));
      f << "," << buf;
    }
    f << "\n";
  }
}

}  // namespace detail

/// Parses argv and dispatches to a subcommand. Returns the process exit code.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Triple-GAN toolkit: three-player training, exact tabular oracle, evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_path, checkpoint_path;
  std::optional<std::uint64_t> seed, stop_at;
  bool serial = false, verbose = false;
  std::size_t oracle_seeds = 5, samples = 200, interp_steps = 11, grad_coords = 24;

  auto* train_cmd = app.add_subcommand("train", "run pretraining then the three-player game");
  train_cmd->add_option("--config", config_path, "INI config file");
  train_cmd->add_option("--out", out_dir, "output directory (default: run.out_dir)");
  train_cmd->add_option("--seed", seed, "overrides data.seed and run.seed");
  train_cmd->add_option("--resume", resume_path, "checkpoint to continue from");
  train_cmd->add_option("--stop-at", stop_at, "stop after this many iterations with a checkpoint");
  train_cmd->add_flag("--serial", serial, "force the deterministic serial mode");
  train_cmd->add_flag("-v,--verbose", verbose, "log progress at each metrics row");

  auto* eval_cmd = app.add_subcommand("eval", "test error, conditional fidelity and MMD of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--seed", seed, "evaluation seed");

  auto* sample_cmd = app.add_subcommand("sample", "per-class samples and latent interpolations as CSV");
  sample_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  sample_cmd->add_option("--out", out_dir, "output directory")->required();
  sample_cmd->add_option("--n", samples, "samples per class");
  sample_cmd->add_option("--steps", interp_steps, "interpolation points");
  sample_cmd->add_option("--seed", seed, "sampling seed");

  auto* data_cmd = app.add_subcommand("data-gen", "write the train/val/test splits as CSV");
  data_cmd->add_option("--config", config_path, "INI config file")->required();
  data_cmd->add_option("--out", out_dir, "output directory")->required();
  data_cmd->add_option("--seed", seed, "overrides data.seed");

  auto* oracle_cmd = app.add_subcommand("verify-oracle", "check the tabular game identities");
  oracle_cmd->add_option("--seeds", oracle_seeds, "seeds per target in the equilibrium sweeps");
  oracle_cmd->add_option("--seed", seed, "base seed");

  auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference check of every composite loss");
  grad_cmd->add_option("--coords", grad_coords, "coordinates probed per parameter tensor (0 = all)");
  grad_cmd->add_option("--seed", seed, "seed for networks and batches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) {
      if (config_path.empty() && resume_path.empty()) {
        err << "error: train needs --config (or --resume)\n";
        return kUsage;
      }
      cfg::Config c = config_path.empty() ? cfg::Config{} : detail::load_config(config_path, seed, serial);
      std::optional<std::filesystem::path> resume;
      if (!resume_path.empty()) resume = resume_path;
      if (resume && out_dir.empty()) out_dir = std::filesystem::path(resume_path).parent_path().string();
      if (out_dir.empty()) out_dir = c.run.out_dir;
      train::RunOptions opt;
      opt.stop_at = stop_at;
      opt.verbose = verbose;
      const auto r = train::run_training(c, out_dir, resume, opt);
      out << "iterations " << r.state.iter << "\n";
      out << "checkpoint " << r.final_checkpoint.string() << "\n";
      out << "metrics " << r.metrics.string() << "\n";
      return kOk;
    }
    if (eval_cmd->parsed()) {
      train::LoadedRun run = train::load_run(checkpoint_path);
      const auto& m = run.state.model;
      const std::uint64_t s = seed.value_or(run.config.run.seed);
      const auto judge = eval::train_oracle_classifier(run.data.train, s);
      const auto q = eval::generation_quality(m.generator, run.data.train, judge, s);
      char buf[256];
      std::snprintf(buf, sizeof buf, "test_error_student %.6f\ntest_error_teacher %.6f\njudge_test_error %.6f\n",
                    eval::error_rate(m.classifier, run.data.test), eval::error_rate(m.teacher.net, run.data.test),
                    eval::error_rate(judge, run.data.test));
      out << buf;
      std::snprintf(buf, sizeof buf, "fidelity %.6f\nmmd2_generated_mean %.6e\nmmd2_reference_mean %.6e\n",
                    q.fidelity.overall, q.mean_generated(), q.mean_reference());
      out << buf;
      for (std::size_t c = 0; c < q.mmd2_generated.size(); ++c) {
        std::snprintf(buf, sizeof buf, "class %zu fidelity %.4f mmd2 %.6e reference %.6e\n", c,
                      q.fidelity.per_class[c], q.mmd2_generated[c], q.mmd2_reference[c]);
        out << buf;
      }
      return kOk;
    }
    if (sample_cmd->parsed()) {
      train::LoadedRun run = train::load_run(checkpoint_path);
      const auto& g = run.state.model.generator;
      RngStream rng(seed.value_or(run.config.run.seed), "cli.sample");
      std::filesystem::create_directories(out_dir);
      const auto sp = std::filesystem::path(out_dir) / "samples.csv";
      const auto ip = std::filesystem::path(out_dir) / "interpolation.csv";
      std::ofstream fs(sp, std::ios::trunc), fi(ip, std::ios::trunc);
      if (!fs) throw train::IoError("cannot open " + sp.string() + " for writing");
      if (!fi) throw train::IoError("cannot open " + ip.string() + " for writing");
      fs << "label";
      fi << "label,step";
      for (std::size_t j = 0; j < g.output_dim(); ++j) {
        fs << ",x" << j;
        fi << ",x" << j;
      }
      fs << "\n";
      fi << "\n";
      for (std::size_t c = 0; c < g.classes; ++c) {
        std::vector<ad::Label> y(samples, static_cast<ad::Label>(c));
        detail::write_points_csv(fs, c, nn::generate(g, y, nn::sample_latent(samples, g.latent, rng)),
                                 static_cast<std::size_t>(-1));
      }
      const Tensor ends = nn::sample_latent(2, g.latent, rng);
      for (std::size_t c = 0; c < g.classes; ++c)
        detail::write_points_csv(
            fi, c, eval::latent_interpolation(g, static_cast<ad::Label>(c), ends.row(0), ends.row(1), interp_steps),
            0);
      if (!fs || !fi) throw train::IoError("write failed in " + out_dir);
      out << "wrote " << sp.string() << " and " << ip.string() << "\n";
      return kOk;
    }
    if (data_cmd->parsed()) {
      cfg::Config c = detail::load_config(config_path, std::nullopt, false);
      if (seed) c.data.seed = *seed;
      const train::Datasets d = train::make_datasets(c.data);
      const auto split = data::split_semi(d.train, c.data.labels_per_class, c.data.seed,
                                          c.data.regime == cfg::Regime::low_data);
      std::vector<bool> labeled(d.train.size(), false);
      for (std::size_t i : split.labeled) labeled[i] = true;
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path o(out_dir);
      detail::write_dataset_csv(o / "train.csv", d.train, &labeled);
      detail::write_dataset_csv(o / "val.csv", d.val);
      detail::write_dataset_csv(o / "test.csv", d.test);
      out << "wrote train.csv val.csv test.csv to " << out_dir << "\n";
      return kOk;
    }
    if (oracle_cmd->parsed()) {
      if (oracle_seeds == 0) {
        err << "error: --seeds must be >= 1\n";
        return kUsage;
      }
      const std::uint64_t s = seed.value_or(0);
      const oracle::CheckResult checks[] = {
          oracle::check_lemma1(20, 100, s),
          oracle::check_lemma2(100, s),
          oracle::check_marginals(20, s),
          oracle::check_rp_kl(20, s),
          oracle::check_theorem(5, oracle_seeds, s),
          oracle::check_regularizer_invariance(5, oracle_seeds, s),
      };
      bool ok = true;
      for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.passed;
      }
      return ok ? kOk : kFailed;
    }
    if (grad_cmd->parsed()) {
      gradsuite::Options opt;
      opt.coords = grad_coords;
      if (seed) opt.seed = *seed;
      const auto cases = gradsuite::run(opt);
      char buf[160];
      for (const auto& c : cases) {
        std::snprintf(buf, sizeof buf, "%-34s max rel error %.3e  (%.2fs)\n", c.name.c_str(), c.max_rel_error,
                      c.seconds);
        out << buf;
      }
      const double w = gradsuite::worst(cases);
      std::snprintf(buf, sizeof buf, "max relative error %.3e (threshold 1e-4)\n", w);
      out << buf;
      return w < 1e-4 ? kOk : kFailed;
    }
  } catch (const cfg::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}

}  // namespace tgan::cli
