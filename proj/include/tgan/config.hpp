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

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgan/data.hpp"
#include "tgan/game.hpp"

namespace tgan::cfg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Regime { semi, low_data };
enum class LrDecay { none, linear };

struct DataConfig {
  data::Kind kind = data::Kind::mixture;
  std::size_t classes = 8;
  std::size_t dim = 2;
  std::size_t n_per_class = 250;
  std::size_t val_per_class = 100;
  std::size_t test_per_class = 100;
  double radius = 0.75;
  double sigma = 0.08;
  std::size_t labels_per_class = 4;
  std::uint64_t seed = 0;
  Regime regime = Regime::semi;
  data::AugmentPolicy augment = data::AugmentPolicy::none;
  double augment_sigma = 0.0;
};

struct ModelConfig {
  std::vector<std::size_t> classifier_hidden{128, 128};
  std::vector<std::size_t> generator_hidden{128, 128};
  std::vector<std::size_t> disc_trunk{128, 64};
  std::size_t latent = 16;
  nn::DiscVariant disc_variant = nn::DiscVariant::projection;
  double input_noise = 0.15;
  double dropout = 0.0;
};

struct OptimConfig {
  game::AdamConfigs adam;
  LrDecay lr_decay = LrDecay::none;
};

struct RunConfig {
  std::uint64_t iters = 3000;
  /// Unset means 10% of iters.
  std::optional<std::uint64_t> pretrain_iters;
  std::uint64_t checkpoint_interval = 0;
  std::uint64_t metrics_interval = 100;
  std::string out_dir = "runs/default";
  bool serial = true;
  Dtype dtype = Dtype::f64;
  std::uint64_t seed = 0;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  game::GameHyperparams game;
  OptimConfig optim;
  RunConfig run;

  std::uint64_t resolved_pretrain() const { return run.pretrain_iters.value_or(run.iters / 10); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": cannot parse '" + v + "' as a number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline std::string list_str(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, const std::vector<std::pair<const char*, E>>& opts) {
  std::string names;
  for (const auto& [n, e] : opts) {
    if (v == n) return e;
    names += std::string(names.empty() ? "" : ", ") + n;
  }
  throw ConfigError(key + ": '" + v + "' is not one of {" + names + "}");
}

template <typename E>
const char* enum_name(E e, const std::vector<std::pair<const char*, E>>& opts) {
  for (const auto& [n, x] : opts)
    if (x == e) return n;
  return "?";
}

}  // namespace detail

/// Table of every key: parser and printer bound to one Config field.
struct KeyBinding {
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

inline const std::vector<std::pair<std::string, std::map<std::string, KeyBinding>>>& schema() {
  using namespace detail;
  using game::Regularizer;
  using game::Schedule;
  static const auto table = [] {
    auto num = [](auto member) {
      return KeyBinding{[member](Config& c, const std::string& k, const std::string& v) {
                          auto& ref = member(c);
                          ref = parse_number<std::remove_reference_t<decltype(ref)>>(k, v);
                        },
                        [member](const Config& c) {
                          const auto& ref = member(const_cast<Config&>(c));
                          if constexpr (std::is_floating_point_v<std::remove_cvref_t<decltype(ref)>>)
                            return fmt_double(ref);
                          else
                            return std::to_string(ref);
                        }};
    };
    auto flag = [](auto member) {
      return KeyBinding{[member](Config& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); },
                        [member](const Config& c) { return std::string(member(const_cast<Config&>(c)) ? "true" : "false"); }};
    };
    auto list = [](auto member) {
      return KeyBinding{[member](Config& c, const std::string& k, const std::string& v) { member(c) = parse_list(k, v); },
                        [member](const Config& c) { return list_str(member(const_cast<Config&>(c))); }};
    };
    auto choice = [](auto member, auto opts) {
      return KeyBinding{[member, opts](Config& c, const std::string& k, const std::string& v) {
                          member(c) = parse_enum(k, v, opts);
                        },
                        [member, opts](const Config& c) { return std::string(enum_name(member(const_cast<Config&>(c)), opts)); }};
    };
    auto schedule_kind = std::vector<std::pair<const char*, Schedule::Kind>>{
        {"constant", Schedule::Kind::constant}, {"sigmoid_rampup", Schedule::Kind::sigmoid_rampup}};
    auto adam = [&](auto pick, std::map<std::string, KeyBinding>& m, const std::string& who) {
      m["lr_" + who] = num([pick](Config& c) -> double& { return pick(c).lr; });
      m["beta1_" + who] = num([pick](Config& c) -> double& { return pick(c).beta1; });
      m["beta2_" + who] = num([pick](Config& c) -> double& { return pick(c).beta2; });
      m["eps_" + who] = num([pick](Config& c) -> double& { return pick(c).eps; });
    };

    std::map<std::string, KeyBinding> d, mo, g, o, r;
    d["kind"] = choice([](Config& c) -> data::Kind& { return c.data.kind; },
                       std::vector<std::pair<const char*, data::Kind>>{
                           {"mixture", data::Kind::mixture}, {"moons", data::Kind::moons}, {"rings", data::Kind::rings}});
    d["classes"] = num([](Config& c) -> std::size_t& { return c.data.classes; });
    d["dim"] = num([](Config& c) -> std::size_t& { return c.data.dim; });
    d["n_per_class"] = num([](Config& c) -> std::size_t& { return c.data.n_per_class; });
    d["val_per_class"] = num([](Config& c) -> std::size_t& { return c.data.val_per_class; });
    d["test_per_class"] = num([](Config& c) -> std::size_t& { return c.data.test_per_class; });
    d["radius"] = num([](Config& c) -> double& { return c.data.radius; });
    d["sigma"] = num([](Config& c) -> double& { return c.data.sigma; });
    d["labels_per_class"] = num([](Config& c) -> std::size_t& { return c.data.labels_per_class; });
    d["seed"] = num([](Config& c) -> std::uint64_t& { return c.data.seed; });
    d["regime"] = choice([](Config& c) -> Regime& { return c.data.regime; },
                         std::vector<std::pair<const char*, Regime>>{{"semi", Regime::semi},
                                                                               {"low_data", Regime::low_data}});
    d["augment"] = choice([](Config& c) -> data::AugmentPolicy& { return c.data.augment; },
                          std::vector<std::pair<const char*, data::AugmentPolicy>>{
                              {"none", data::AugmentPolicy::none}, {"jitter", data::AugmentPolicy::jitter}});
    d["augment_sigma"] = num([](Config& c) -> double& { return c.data.augment_sigma; });

    mo["classifier_hidden"] = list([](Config& c) -> std::vector<std::size_t>& { return c.model.classifier_hidden; });
    mo["generator_hidden"] = list([](Config& c) -> std::vector<std::size_t>& { return c.model.generator_hidden; });
    mo["disc_trunk"] = list([](Config& c) -> std::vector<std::size_t>& { return c.model.disc_trunk; });
    mo["latent"] = num([](Config& c) -> std::size_t& { return c.model.latent; });
    mo["disc_variant"] = choice([](Config& c) -> nn::DiscVariant& { return c.model.disc_variant; },
                                std::vector<std::pair<const char*, nn::DiscVariant>>{
                                    {"projection", nn::DiscVariant::projection}, {"concat", nn::DiscVariant::concat}});
    mo["input_noise"] = num([](Config& c) -> double& { return c.model.input_noise; });
    mo["dropout"] = num([](Config& c) -> double& { return c.model.dropout; });

    g["alpha"] = num([](Config& c) -> double& { return c.game.alpha; });
    g["alpha_p_kind"] = choice([](Config& c) -> Schedule::Kind& { return c.game.alpha_p.kind; }, schedule_kind);
    g["alpha_p_max"] = num([](Config& c) -> double& { return c.game.alpha_p.max; });
    g["alpha_p_rampup"] = num([](Config& c) -> std::uint64_t& { return c.game.alpha_p.rampup; });
    g["alpha_p_start"] = num([](Config& c) -> std::uint64_t& { return c.game.alpha_p.start; });
    g["alpha_u_kind"] = choice([](Config& c) -> Schedule::Kind& { return c.game.alpha_u.kind; }, schedule_kind);
    g["alpha_u_max"] = num([](Config& c) -> double& { return c.game.alpha_u.max; });
    g["alpha_u_rampup"] = num([](Config& c) -> std::uint64_t& { return c.game.alpha_u.rampup; });
    g["alpha_u_start"] = num([](Config& c) -> std::uint64_t& { return c.game.alpha_u.start; });
    g["regularizer"] = choice([](Config& c) -> Regularizer& { return c.game.regularizer; },
                              std::vector<std::pair<const char*, Regularizer>>{
                                  {"none", Regularizer::none},
                                  {"entropy", Regularizer::entropy},
                                  {"consistency", Regularizer::consistency},
                                  {"mean_teacher", Regularizer::mean_teacher}});
    g["ema_decay"] = num([](Config& c) -> double& { return c.game.ema_decay; });
    g["pseudo_fraction"] = num([](Config& c) -> double& { return c.game.pseudo_fraction; });
    g["teacher_labels"] = flag([](Config& c) -> bool& { return c.game.teacher_labels; });
    g["m_d"] = num([](Config& c) -> std::size_t& { return c.game.m_d; });
    g["m_c"] = num([](Config& c) -> std::size_t& { return c.game.m_c; });
    g["m_g"] = num([](Config& c) -> std::size_t& { return c.game.m_g; });
    g["generator_loss"] = choice([](Config& c) -> game::GeneratorLoss& { return c.game.generator_loss; },
                                 std::vector<std::pair<const char*, game::GeneratorLoss>>{
                                     {"minimax", game::GeneratorLoss::minimax},
                                     {"nonsaturating", game::GeneratorLoss::nonsaturating}});

    adam([](Config& c) -> ad::AdamConfig& { return c.optim.adam.c; }, o, "c");
    adam([](Config& c) -> ad::AdamConfig& { return c.optim.adam.d; }, o, "d");
    adam([](Config& c) -> ad::AdamConfig& { return c.optim.adam.g; }, o, "g");
    o["lr_decay"] = choice([](Config& c) -> LrDecay& { return c.optim.lr_decay; },
                           std::vector<std::pair<const char*, LrDecay>>{{"none", LrDecay::none},
                                                                                  {"linear", LrDecay::linear}});

    r["iters"] = num([](Config& c) -> std::uint64_t& { return c.run.iters; });
    r["pretrain_iters"] = KeyBinding{
        [](Config& c, const std::string& k, const std::string& v) {
          c.run.pretrain_iters = parse_number<std::uint64_t>(k, v);
        },
        [](const Config& c) { return std::to_string(c.resolved_pretrain()); }};
    r["checkpoint_interval"] = num([](Config& c) -> std::uint64_t& { return c.run.checkpoint_interval; });
    r["metrics_interval"] = num([](Config& c) -> std::uint64_t& { return c.run.metrics_interval; });
    r["out_dir"] = KeyBinding{[](Config& c, const std::string&, const std::string& v) { c.run.out_dir = v; },
                              [](const Config& c) { return c.run.out_dir; }};
    r["serial"] = flag([](Config& c) -> bool& { return c.run.serial; });
    r["dtype"] = choice([](Config& c) -> Dtype& { return c.run.dtype; },
                        std::vector<std::pair<const char*, Dtype>>{{"f32", Dtype::f32}, {"f64", Dtype::f64}});
    r["seed"] = num([](Config& c) -> std::uint64_t& { return c.run.seed; });

    return std::vector<std::pair<std::string, std::map<std::string, KeyBinding>>>{
        {"data", d}, {"model", mo}, {"game", g}, {"optim", o}, {"run", r}};
  }();
  return table;
}

inline void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError("invalid value for " + key + ": " + constraint);
}

/// Checks every value against the invariants of its target type.
inline void validate(const Config& c) {
  require(c.data.classes >= 2, "data.classes", "K >= 2");
  require(c.data.kind != data::Kind::moons || c.data.classes == 2, "data.classes", "moons has K = 2");
  require(c.data.dim >= 2, "data.dim", "d >= 2");
  require(c.data.kind == data::Kind::mixture || c.data.dim == 2, "data.dim", "moons and rings are 2-d");
  require(c.data.n_per_class >= 1, "data.n_per_class", ">= 1");
  require(c.data.val_per_class >= 1, "data.val_per_class", ">= 1");
  require(c.data.test_per_class >= 1, "data.test_per_class", ">= 1");
  require(c.data.sigma >= 0.0, "data.sigma", "σ >= 0");
  require(c.data.radius > 0.0, "data.radius", "> 0");
  require(c.data.labels_per_class >= 1 && c.data.labels_per_class <= c.data.n_per_class,
          "data.labels_per_class", "1 <= labels_per_class <= n_per_class");
  require(c.data.augment_sigma >= 0.0, "data.augment_sigma", "σ_a >= 0");
  for (auto* l : {&c.model.classifier_hidden, &c.model.generator_hidden, &c.model.disc_trunk})
    for (std::size_t w : *l) require(w >= 1, "model widths", "every width >= 1");
  require(c.model.latent >= 1, "model.latent", "L >= 1");
  require(c.model.input_noise >= 0.0, "model.input_noise", "σ >= 0");
  require(c.model.dropout >= 0.0 && c.model.dropout < 1.0, "model.dropout", "rate ∈ [0,1)");
  require(c.game.alpha > 0.0 && c.game.alpha < 1.0, "game.alpha", "α ∈ (0,1)");
  require(c.game.alpha_p.max >= 0.0, "game.alpha_p_max", ">= 0");
  require(c.game.alpha_u.max >= 0.0, "game.alpha_u_max", ">= 0");
  require(c.game.ema_decay >= 0.0 && c.game.ema_decay < 1.0, "game.ema_decay", "δ ∈ [0,1)");
  require(c.game.pseudo_fraction >= 0.0 && c.game.pseudo_fraction <= 1.0, "game.pseudo_fraction", "ρ ∈ [0,1]");
  require(c.game.m_d >= 1, "game.m_d", ">= 1");
  require(c.game.m_c >= 1, "game.m_c", ">= 1");
  require(c.game.m_g >= 1, "game.m_g", ">= 1");
  for (const auto* a : {&c.optim.adam.c, &c.optim.adam.d, &c.optim.adam.g}) {
    require(a->lr >= 0.0, "optim.lr_*", "lr >= 0");
    require(a->beta1 >= 0.0 && a->beta1 < 1.0, "optim.beta1_*", "β1 ∈ [0,1)");
    require(a->beta2 >= 0.0 && a->beta2 < 1.0, "optim.beta2_*", "β2 ∈ [0,1)");
    require(a->eps > 0.0, "optim.eps_*", "ε > 0");
  }
  require(c.run.iters >= 1, "run.iters", ">= 1");
  require(c.resolved_pretrain() <= c.run.iters, "run.pretrain_iters", "pretrain_iters <= iters");
  require(c.run.metrics_interval >= 1, "run.metrics_interval", ">= 1");
}

/// Validates and copies run-level iteration counts into the game settings.
inline void resolve(Config& c) {
  validate(c);
  c.game.iters = c.run.iters;
  c.game.pretrain_iters = c.resolved_pretrain();
}

/// INI text: `[section]`, `key = value`, `#` comments. Unknown sections and
/// keys are errors.
inline Config parse_config(const std::string& text) {
  Config c;
  const auto& tab = schema();
  const std::map<std::string, KeyBinding>* section = nullptr;
  std::string section_name;
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section_name = detail::trim(line.substr(1, line.size() - 2));
      section = nullptr;
      for (const auto& [n, keys] : tab)
        if (n == section_name) section = &keys;
      if (!section) throw ConfigError(where + "unknown section [" + section_name + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (!section) throw ConfigError(where + "key outside of any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto it = section->find(key);
    if (it == section->end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section_name + "]");
    try {
      it->second.set(c, section_name + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  resolve(c);
  return c;
}

/// Fully resolved config; parse_config(echo(c)) reproduces c.
inline std::string echo(const Config& c) {
  std::string out;
  for (const auto& [name, keys] : schema()) {
    out += "[" + name + "]\n";
    for (const auto& [k, b] : keys) out += k + " = " + b.get(c) + "\n";
    out += "\n";
  }
  return out;
}

}  // namespace tgan::cfg
