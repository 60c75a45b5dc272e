#ifndef PROACTIVE_CONFIG_HPP
#define PROACTIVE_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "proactive/error.hpp"

namespace proactive {

enum class Variant { kBase, kPlus };
enum class FeedForwardMode { kPrefixSum, kPositionWise };

inline const char* to_string(Variant v) { return v == Variant::kBase ? "base" : "plus"; }
inline const char* to_string(FeedForwardMode m) { return m == FeedForwardMode::kPrefixSum ? "prefix_sum" : "position_wise"; }

namespace config_detail {

[[noreturn]] inline void fail(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

/// Reads `key` from `j` into `out` when present; type errors name the key.
template <typename T>
void read(const nlohmann::json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(std::string(section) + "." + key + ": wrong type (" + j.at(key).dump() + ")");
  }
}

inline void reject_unknown(const nlohmann::json& j, const char* section, std::initializer_list<const char*> known) {
  if (!j.is_object()) fail(std::string(section) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) fail(std::string(section) + ": unknown key '" + key + "'");
  }
}

}  // namespace config_detail

struct EncoderConfig {
  std::size_t dim = 16;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t max_len = 0;  // 0: derived from the training corpus
  FeedForwardMode feed_forward = FeedForwardMode::kPrefixSum;

  void validate() const {
    if (dim == 0 || heads == 0 || dim % heads != 0) config_detail::fail("model: D must be a positive multiple of heads");
    if (blocks == 0) config_detail::fail("model: blocks must be positive");
  }
};

/// Architecture plus the corpus-derived sizes needed to rebuild a model.
struct ModelConfig {
  EncoderConfig encoder;
  std::size_t clusters = 8;
  Variant variant = Variant::kBase;
  double alpha_mark = 0.1;
  double alpha_time = 0.1;
  double alpha_goal = 0.1;
  std::uint64_t init_seed = 0;

  // Filled in from data at training time.
  std::size_t marks = 0;  // including EOS
  std::size_t goals = 0;
  double time_scale = 1.0;
  double eos_gap = 1.0;
  std::size_t max_generation_length = 0;

  void validate() const {
    encoder.validate();
    if (clusters == 0) config_detail::fail("model: M must be positive");
    for (double a : {alpha_mark, alpha_time, alpha_goal})
      if (!std::isfinite(a)) config_detail::fail("model: alpha must be finite");
    if (!(time_scale > 0.0) || !std::isfinite(time_scale)) config_detail::fail("model: time_scale must be positive");
    if (!(eos_gap > 0.0) || !std::isfinite(eos_gap)) config_detail::fail("model: eos_gap must be positive");
  }

  void validate_sized() const {
    validate();
    if (marks < 2 || goals < 1 || encoder.max_len < 2) {
      config_detail::fail("model: marks/goals/max_len not initialised from data");
    }
  }

  nlohmann::json to_json() const {
    return {{"D", encoder.dim},
            {"heads", encoder.heads},
            {"blocks", encoder.blocks},
            {"max_len", encoder.max_len},
            {"feed_forward", to_string(encoder.feed_forward)},
            {"M", clusters},
            {"variant", to_string(variant)},
            {"alpha_mark", alpha_mark},
            {"alpha_time", alpha_time},
            {"alpha_goal", alpha_goal},
            {"init_seed", init_seed},
            {"marks", marks},
            {"goals", goals},
            {"time_scale", time_scale},
            {"eos_gap", eos_gap},
            {"max_generation_length", max_generation_length}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    using namespace config_detail;
    reject_unknown(j, "model",
                   {"D", "heads", "blocks", "max_len", "feed_forward", "M", "variant", "alpha_mark", "alpha_time",
                    "alpha_goal", "init_seed", "marks", "goals", "time_scale", "eos_gap", "max_generation_length"});
    ModelConfig c;
    read(j, "model", "D", c.encoder.dim);
    read(j, "model", "heads", c.encoder.heads);
    read(j, "model", "blocks", c.encoder.blocks);
    read(j, "model", "max_len", c.encoder.max_len);
    std::string ff = to_string(c.encoder.feed_forward);
    read(j, "model", "feed_forward", ff);
    if (ff == "prefix_sum") c.encoder.feed_forward = FeedForwardMode::kPrefixSum;
    else if (ff == "position_wise") c.encoder.feed_forward = FeedForwardMode::kPositionWise;
    else fail("model.feed_forward: expected prefix_sum or position_wise, got '" + ff + "'");
    read(j, "model", "M", c.clusters);
    std::string variant = to_string(c.variant);
    read(j, "model", "variant", variant);
    if (variant == "base") c.variant = Variant::kBase;
    else if (variant == "plus" || variant == "++") c.variant = Variant::kPlus;
    else fail("model.variant: expected base or plus, got '" + variant + "'");
    read(j, "model", "alpha_mark", c.alpha_mark);
    read(j, "model", "alpha_time", c.alpha_time);
    read(j, "model", "alpha_goal", c.alpha_goal);
    read(j, "model", "init_seed", c.init_seed);
    read(j, "model", "marks", c.marks);
    read(j, "model", "goals", c.goals);
    read(j, "model", "time_scale", c.time_scale);
    read(j, "model", "eos_gap", c.eos_gap);
    read(j, "model", "max_generation_length", c.max_generation_length);
    c.validate();
    return c;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double margin_weight = 0.1;
  double l2_coeff = 0.001;
  double gamma = 0.9;
  bool eos_time_term = true;
  bool margins_in_plus = true;
  double lr_decay = 1.0;              // per-epoch multiplicative factor; 1 disables the schedule
  std::size_t early_stop_patience = 0;  // epochs without improvement; 0 disables
  std::size_t workers = 1;

  void validate() const {
    using config_detail::fail;
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("train.lr must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("train: betas must lie in [0,1)");
    if (!(epsilon > 0.0)) fail("train.epsilon must be positive");
    if (epochs == 0) fail("train.epochs must be at least 1");
    if (batch_size == 0) fail("train.batch_size must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("train.gamma must lie in [0,1]");
    if (!(margin_weight >= 0.0) || !(l2_coeff >= 0.0)) fail("train: loss weights must be non-negative");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("train.lr_decay must lie in (0,1]");
    if (workers == 0) fail("train.workers must be positive");
  }

  nlohmann::json to_json() const {
    return {{"lr", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"seed", seed},
            {"margin_weight", margin_weight},
            {"l2_coeff", l2_coeff},
            {"gamma", gamma},
            {"eos_time_term", eos_time_term},
            {"margins_in_plus", margins_in_plus},
            {"lr_decay", lr_decay},
            {"early_stop_patience", early_stop_patience},
            {"workers", workers}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    using namespace config_detail;
    reject_unknown(j, "train",
                   {"lr", "beta1", "beta2", "epsilon", "epochs", "batch_size", "seed", "margin_weight", "l2_coeff",
                    "gamma", "eos_time_term", "margins_in_plus", "lr_decay", "early_stop_patience", "workers"});
    TrainConfig c;
    read(j, "train", "lr", c.learning_rate);
    read(j, "train", "beta1", c.beta1);
    read(j, "train", "beta2", c.beta2);
    read(j, "train", "epsilon", c.epsilon);
    read(j, "train", "epochs", c.epochs);
    read(j, "train", "batch_size", c.batch_size);
    read(j, "train", "seed", c.seed);
    read(j, "train", "margin_weight", c.margin_weight);
    read(j, "train", "l2_coeff", c.l2_coeff);
    read(j, "train", "gamma", c.gamma);
    read(j, "train", "eos_time_term", c.eos_time_term);
    read(j, "train", "margins_in_plus", c.margins_in_plus);
    read(j, "train", "lr_decay", c.lr_decay);
    read(j, "train", "early_stop_patience", c.early_stop_patience);
    read(j, "train", "workers", c.workers);
    c.validate();
    return c;
  }
};

struct DataConfig {
  std::string path;
  bool split = true;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  double eos_gap = 0.0;  // 0: median inter-action gap of the training split
  std::uint64_t cluster_seed = 0;

  void validate() const {
    if (split && !(train_fraction > 0.0 && train_fraction < 1.0)) config_detail::fail("data.train_fraction must lie in (0,1)");
    if (eos_gap < 0.0 || !std::isfinite(eos_gap)) config_detail::fail("data.eos_gap must be non-negative");
  }

  nlohmann::json to_json() const {
    return {{"path", path},         {"split", split},     {"train_fraction", train_fraction},
            {"split_seed", split_seed}, {"eos_gap", eos_gap}, {"cluster_seed", cluster_seed}};
  }

  static DataConfig from_json(const nlohmann::json& j) {
    using namespace config_detail;
    reject_unknown(j, "data", {"path", "split", "train_fraction", "split_seed", "eos_gap", "cluster_seed"});
    DataConfig c;
    read(j, "data", "path", c.path);
    read(j, "data", "split", c.split);
    read(j, "data", "train_fraction", c.train_fraction);
    read(j, "data", "split_seed", c.split_seed);
    read(j, "data", "eos_gap", c.eos_gap);
    read(j, "data", "cluster_seed", c.cluster_seed);
    c.validate();
    return c;
  }
};

struct EvalConfig {
  std::vector<double> prefixes{0.3, 0.6, 1.0};
  std::uint64_t seed = 0;
  bool generation = true;
  bool greedy = false;
  std::size_t workers = 1;

  void validate() const {
    if (prefixes.empty()) config_detail::fail("eval.prefixes must not be empty");
    for (double f : prefixes)
      if (!(f > 0.0 && f <= 1.0)) config_detail::fail("eval.prefixes must lie in (0,1]");
    if (workers == 0) config_detail::fail("eval.workers must be positive");
  }

  nlohmann::json to_json() const {
    return {{"prefixes", prefixes}, {"seed", seed}, {"generation", generation}, {"greedy", greedy}, {"workers", workers}};
  }

  static EvalConfig from_json(const nlohmann::json& j) {
    using namespace config_detail;
    reject_unknown(j, "eval", {"prefixes", "seed", "generation", "greedy", "workers"});
    EvalConfig c;
    read(j, "eval", "prefixes", c.prefixes);
    read(j, "eval", "seed", c.seed);
    read(j, "eval", "generation", c.generation);
    read(j, "eval", "greedy", c.greedy);
    read(j, "eval", "workers", c.workers);
    c.validate();
    return c;
  }
};

/// Everything one CLI run needs, loaded from a single JSON document.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;

  nlohmann::json to_json() const {
    return {{"model", model.to_json()}, {"train", train.to_json()}, {"data", data.to_json()}, {"eval", eval.to_json()}};
  }

  static RunConfig from_json(const nlohmann::json& j) {
    config_detail::reject_unknown(j, "config", {"model", "train", "data", "eval"});
    RunConfig c;
    c.model = ModelConfig::from_json(j.value("model", nlohmann::json::object()));
    c.train = TrainConfig::from_json(j.value("train", nlohmann::json::object()));
    c.data = DataConfig::from_json(j.value("data", nlohmann::json::object()));
    c.eval = EvalConfig::from_json(j.value("eval", nlohmann::json::object()));
    return c;
  }
};

/// Applies "section.key=value" overrides; value is parsed as JSON, falling
/// back to a plain string.
inline nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      config_detail::fail("override '" + item + "' is not of the form section.key=value");
    }
    const std::string section = item.substr(0, dot);
    const std::string key = item.substr(dot + 1, eq - dot - 1);
    const std::string raw = item.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    base[section][key] = value;
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kConfig, "config '" + path + "': " + e.what());
    }
  }
  return RunConfig::from_json(apply_overrides(std::move(j), overrides));
}

}  // namespace proactive

#endif  // PROACTIVE_CONFIG_HPP
