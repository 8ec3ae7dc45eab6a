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

// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tgan/eval.hpp"
#include "tgan/grad_suite.hpp"
#include "tgan/oracle.hpp"
#include "tgan/training.hpp"

namespace {

using namespace tgan;
namespace fs = std::filesystem;

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};
constexpr std::uint64_t kOracleSeed = 2026;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.passed) ++failures;
  std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.passed ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

Outcome timed_check(const oracle::CheckResult& r, double secs, double limit) {
  const bool fast = secs < limit;
  return {r.passed && fast, r.detail + "; runtime " + fmt("%.2f", secs) + "s (limit " + fmt("%.0f", limit) + "s)"};
}

// ---------------------------------------------------------------------------
// Toy benchmark

cfg::Config benchmark_config() {
  return cfg::parse_config(train::read_text(fs::path(TGAN_SOURCE_DIR) / "configs" / "benchmark.ini"));
}

struct SeedRun {
  double err_student = 0.0;
  double err_teacher = 0.0;
  eval::GenerationQuality quality;
};

/// Trains one paired seed; the baseline runs the whole budget as classifier pretraining.
SeedRun run_seed(cfg::Config c, std::uint64_t seed, bool baseline, bool score_generator) {
  c.data.seed = seed;
  c.run.seed = seed;
  if (baseline) c.run.pretrain_iters = c.run.iters;
  cfg::resolve(c);
  const train::Datasets d = train::make_datasets(c.data);
  game::TrainState s = train::init_state(c, d);
  while (s.iter < c.run.iters) game::train_step(s, d.train);
  SeedRun r;
  r.err_student = eval::error_rate(s.model.classifier, d.test);
  r.err_teacher = eval::error_rate(s.model.teacher.net, d.test);
  if (score_generator) {
    const nn::ClassifierParams judge = eval::train_oracle_classifier(d.train, seed);
    r.quality = eval::generation_quality(s.model.generator, d.train, judge, seed);
  }
  return r;
}

struct Arm {
  std::vector<SeedRun> runs;
  double seconds = 0.0;

  double mean_error() const {
    double s = 0.0;
    for (const auto& r : runs) s += r.err_student;
    return s / static_cast<double>(runs.size());
  }
  std::string errors() const {
    std::string out;
    for (const auto& r : runs) out += (out.empty() ? "" : ",") + fmt("%.4f", r.err_student);
    return out;
  }
  /// Per-class means over seeds.
  std::vector<double> mmd_generated() const { return per_class(&eval::GenerationQuality::mmd2_generated); }
  std::vector<double> mmd_reference() const { return per_class(&eval::GenerationQuality::mmd2_reference); }
  double mean_mmd_generated() const { return eval::GenerationQuality::mean(mmd_generated()); }

 private:
  std::vector<double> per_class(std::vector<double> eval::GenerationQuality::*field) const {
    std::vector<double> out((runs.front().quality.*field).size(), 0.0);
    for (const auto& r : runs)
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += (r.quality.*field)[k] / static_cast<double>(runs.size());
    return out;
  }
};

Arm run_arm(const cfg::Config& c, bool baseline, bool score_generator) {
  const auto t0 = std::chrono::steady_clock::now();
  Arm a;
  for (std::uint64_t s : kSeeds) a.runs.push_back(run_seed(c, s, baseline, score_generator));
  a.seconds = seconds_since(t0);
  return a;
}

// ---------------------------------------------------------------------------
// Determinism

bool same_file(const fs::path& a, const fs::path& b) { return train::read_text(a) == train::read_text(b); }

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "tgan_acceptance_determinism";
  fs::remove_all(root);
  cfg::Config c = benchmark_config();
  c.run.iters = 300;
  c.run.pretrain_iters = 30;
  c.run.metrics_interval = 25;
  c.game.alpha_p.start = 100;
  c.run.seed = c.data.seed = 11;
  const fs::path run = root / "run";

  train::run_training(c, run);
  fs::create_directories(root / "first");
  fs::copy_file(run / "metrics.csv", root / "first" / "metrics.csv");
  fs::copy_file(run / "final.tgan", root / "first" / "final.tgan");
  fs::remove_all(run);

  train::run_training(c, run);
  const bool csv_same = same_file(run / "metrics.csv", root / "first" / "metrics.csv");
  fs::remove_all(run);

  train::RunOptions stop;
  stop.stop_at = 150;
  train::run_training(c, run, std::nullopt, stop);
  const bool partial = !fs::exists(run / "final.tgan");
  train::run_training(c, run, run / "checkpoint_150.tgan");
  const bool resume_csv = same_file(run / "metrics.csv", root / "first" / "metrics.csv");
  const bool resume_ckpt = same_file(run / "final.tgan", root / "first" / "final.tgan");
  fs::remove_all(root);
  auto yn = [](bool b) { return b ? std::string("identical") : std::string("DIFFERENT"); };
  return {csv_same && partial && resume_csv && resume_ckpt,
          "repeat-run metrics " + yn(csv_same) + "; resume@150 metrics " + yn(resume_csv) + ", final checkpoint " +
              yn(resume_ckpt)};
}

}  // namespace

int main() {
  std::printf("Triple-GAN toolkit acceptance run (serial, f64)\n");

  report(1, "gradient suite", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cases = gradsuite::run();
    const double secs = seconds_since(t0), worst = gradsuite::worst(cases);
    return Outcome{worst < 1e-4 && secs < 30.0, std::to_string(cases.size()) + " losses, max rel err " +
                                                    oracle::sci(worst) + ", runtime " + fmt("%.2f", secs) + "s"};
  });

  auto oracle_check = [](auto fn, double limit) {
    return [fn, limit] {
      const auto t0 = std::chrono::steady_clock::now();
      const oracle::CheckResult r = fn();
      return timed_check(r, seconds_since(t0), limit);
    };
  };
  report(2, "optimal discriminator", oracle_check([] { return oracle::check_lemma1(20, 100, kOracleSeed); }, 10.0));
  report(3, "value identity", oracle_check([] { return oracle::check_lemma2(100, kOracleSeed); }, 5.0));
  report(4, "shared marginals", [] {
    const oracle::CheckResult r = oracle::check_marginals(20, kOracleSeed);
    return Outcome{r.passed, r.detail};
  });
  report(5, "R_P / KL identity", [] {
    const oracle::CheckResult r = oracle::check_rp_kl(20, kOracleSeed);
    return Outcome{r.passed, r.detail};
  });
  report(6, "unique equilibrium", oracle_check([] { return oracle::check_theorem(5, 5, kOracleSeed); }, 60.0));
  report(7, "regularizer invariance", [] {
    const oracle::CheckResult r = oracle::check_regularizer_invariance(5, 5, kOracleSeed);
    return Outcome{r.passed, r.detail};
  });

  const cfg::Config semi = benchmark_config();
  Arm tgan_semi, base_semi;
  report(8, "semi-supervised benchmark", [&] {
    tgan_semi = run_arm(semi, false, true);
    base_semi = run_arm(semi, true, false);
    const double secs = tgan_semi.seconds + base_semi.seconds;
    const double et = tgan_semi.mean_error(), eb = base_semi.mean_error();
    return Outcome{et < eb && secs < 300.0,
                   "mean test error triple-gan " + fmt("%.4f", et) + " [" + tgan_semi.errors() + "] vs baseline " +
                       fmt("%.4f", eb) + " [" + base_semi.errors() + "], need strictly lower; training " +
                       fmt("%.1f", secs) + "s (limit 300s)"};
  });

  report(9, "conditional generation", [&] {
    if (tgan_semi.runs.empty()) return Outcome{false, "criterion 8 training did not complete"};
    double min_fid = 1.0;
    for (const auto& r : tgan_semi.runs) min_fid = std::min(min_fid, r.quality.fidelity.overall);
    const auto gen = tgan_semi.mmd_generated(), ref = tgan_semi.mmd_reference();
    bool below = true;
    double worst_ratio = 0.0;
    for (std::size_t k = 0; k < gen.size(); ++k) {
      below = below && gen[k] < 3.0 * ref[k];
      worst_ratio = std::max(worst_ratio, gen[k] / ref[k]);
    }
    return Outcome{min_fid >= 0.90 && below, "min fidelity over seeds " + fmt("%.4f", min_fid) +
                                                 " (need >= 0.90); worst per-class MMD2 ratio gen/ref " +
                                                 fmt("%.2f", worst_ratio) + " (need < 3); mean MMD2 " +
                                                 oracle::sci(tgan_semi.mean_mmd_generated())};
  });

  report(10, "extreme low data", [&] {
    cfg::Config low = semi;
    low.data.regime = cfg::Regime::low_data;
    const Arm t = run_arm(low, false, true), b = run_arm(low, true, false);
    const double et = t.mean_error(), eb = b.mean_error();
    const double mmd_low = t.mean_mmd_generated();
    const double mmd_semi = tgan_semi.runs.empty() ? 0.0 : tgan_semi.mean_mmd_generated();
    const bool degrade = !tgan_semi.runs.empty() && mmd_low > mmd_semi;
    return Outcome{et <= eb && degrade, "mean test error triple-gan " + fmt("%.4f", et) + " [" + t.errors() +
                                            "] vs supervised " + fmt("%.4f", eb) + " [" + b.errors() +
                                            "]; mean MMD2 " + oracle::sci(mmd_low) + " vs semi " +
                                            oracle::sci(mmd_semi)};
  });

  report(11, "determinism and persistence", determinism);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
