#ifndef PROACTIVE_TRAINING_HPP
#define PROACTIVE_TRAINING_HPP

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/error.hpp"
#include "proactive/model.hpp"
#include "proactive/objectives.hpp"
#include "proactive/parallel.hpp"

namespace proactive::training {

using numerics::Gradients;

namespace detail {

inline nlohmann::json tensors_to_json(const std::vector<Tensor>& ts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : ts) out.push_back(std::vector<double>(t.values().begin(), t.values().end()));
  return out;
}

}  // namespace detail

/// Adam with bias-corrected moments.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const ParamStore& store) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      m_.push_back(Tensor::zeros_like(store.value(i)));
      v_.push_back(Tensor::zeros_like(store.value(i)));
    }
  }

  std::size_t steps() const noexcept { return step_; }

  void step(ParamStore& params, const Gradients& g, const TrainConfig& cfg, double lr) {
    if (g.size() != params.size() || m_.size() != params.size()) {
      throw Error(ErrorCode::kDimension, "adam: state does not match parameter store");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto theta = params.value(p).values();
      const auto grad = g[p].values();
      auto m = m_[p].values();
      auto v = v_[p].values();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
      }
    }
  }

  nlohmann::json to_json() const {
    return {{"step", step_}, {"m", detail::tensors_to_json(m_)}, {"v", detail::tensors_to_json(v_)}};
  }

  static Adam from_json(const nlohmann::json& j, const ParamStore& store) {
    Adam a(store);
    a.step_ = j.at("step").get<std::size_t>();
    const auto& m = j.at("m");
    const auto& v = j.at("v");
    if (m.size() != store.size() || v.size() != store.size()) throw Error(ErrorCode::kParse, "adam: moment count mismatch");
    for (std::size_t p = 0; p < store.size(); ++p) {
      const auto mv = m[p].get<std::vector<double>>();
      const auto vv = v[p].get<std::vector<double>>();
      if (mv.size() != a.m_[p].size() || vv.size() != a.v_[p].size()) {
        throw Error(ErrorCode::kParse, "adam: moment shape mismatch for " + store.name(p));
      }
      std::copy(mv.begin(), mv.end(), a.m_[p].values().begin());
      std::copy(vv.begin(), vv.end(), a.v_[p].values().begin());
    }
    return a;
  }

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  std::vector<Tensor> m_, v_;
  std::size_t step_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  objectives::LossBreakdown loss;
  double seconds = 0.0;

  std::string to_line() const {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["nll"] = loss.nll;
    j["goal_ce"] = loss.goal_ce;
    j["margin_goal"] = loss.margin_goal;
    j["margin_action"] = loss.margin_action;
    j["l2"] = loss.l2;
    j["total"] = loss.total;
    j["seconds"] = seconds;
    return j.dump();
  }
};

/// Everything needed to continue training where it stopped.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  Model model;
  TrainConfig train;
  Adam adam;
  std::size_t epoch = 0;  // completed epochs
  double best_total = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale_epochs = 0;

  static Checkpoint fresh(Model model, const TrainConfig& train) {
    Checkpoint c;
    c.adam = Adam(model.params);
    c.model = std::move(model);
    c.train = train;
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"format", "proactive.checkpoint"},
                     {"version", kFormatVersion},
                     {"model_config", model.config.to_json()},
                     {"train_config", train.to_json()},
                     {"vocab", model.vocab.to_json()},
                     {"clusters", model.clusters.to_json()},
                     {"params", model.params.to_json()},
                     {"adam", adam.to_json()},
                     {"epoch", epoch},
                     {"best_epoch", best_epoch},
                     {"stale_epochs", stale_epochs}};
    if (std::isfinite(best_total)) j["best_total"] = best_total;
    return j;
  }

  static Checkpoint from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "proactive.checkpoint") {
      throw Error(ErrorCode::kParse, "checkpoint: not a proactive.checkpoint document");
    }
    if (j.value("version", 0) != kFormatVersion) {
      throw Error(ErrorCode::kParse, "checkpoint: unsupported version " + std::to_string(j.value("version", 0)));
    }
    Checkpoint c;
    try {
      c.model.config = ModelConfig::from_json(j.at("model_config"));
      c.train = TrainConfig::from_json(j.at("train_config"));
      c.model.vocab = data::Vocab::from_json(j.at("vocab"));
      c.model.clusters = data::ClusterMap::from_json(j.at("clusters"));
      c.model.params = ParamStore::from_json(j.at("params"));
      c.adam = Adam::from_json(j.at("adam"), c.model.params);
      c.epoch = j.at("epoch").get<std::size_t>();
      c.best_epoch = j.value("best_epoch", std::size_t{0});
      c.stale_epochs = j.value("stale_epochs", std::size_t{0});
      if (j.contains("best_total")) c.best_total = j.at("best_total").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
    }
    // the parameter layout must match what the config would build
    c.model.config.validate_sized();
    const ParamStore expected = init_params(c.model.config);
    if (expected.size() != c.model.params.size()) throw Error(ErrorCode::kParse, "checkpoint: parameter set does not match config");
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (expected.name(i) != c.model.params.name(i) || expected.value(i).shape() != c.model.params.value(i).shape()) {
        throw Error(ErrorCode::kParse, "checkpoint: parameter '" + c.model.params.name(i) + "' does not match config");
      }
    }
    return c;
  }
};

namespace files {
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kBest = "best.json";
inline constexpr const char* kLog = "train_log.jsonl";
}  // namespace files

/// Writes `text` to `path` through a temporary file, so a crash never leaves a
/// half-written file behind.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { write_atomic(path, c.to_json().dump()); }

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNoCheckpoint, "no checkpoint at '" + path.string() + "'");
  try {
    return Checkpoint::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, "checkpoint '" + path.string() + "': " + e.what());
  }
}

/// Accepts either a checkpoint directory or a checkpoint file.
inline Model load_model(const std::filesystem::path& where) {
  std::filesystem::path file = where;
  if (std::filesystem::is_directory(where)) file = where / files::kCheckpoint;
  if (!std::filesystem::exists(file)) throw Error(ErrorCode::kNoCheckpoint, "no checkpoint at '" + where.string() + "'");
  return load_checkpoint(file).model;
}

/// Called after every epoch with the state to persist; `improved` is true
/// when this epoch set a new best training loss.
using EpochCallback = std::function<void(const Checkpoint&, const EpochRecord&, bool improved)>;

struct TrainOutcome {
  Checkpoint state;
  std::vector<EpochRecord> log;
  bool early_stopped = false;
};

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                  static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(s);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Runs epochs state.epoch+1 .. train.epochs. The batch order of epoch e is a
/// function of (seed, e) alone, so resuming from a saved state reproduces an
/// uninterrupted run. Per-sequence gradients are reduced in batch order, so
/// the worker count never changes the result.
inline TrainOutcome train(Checkpoint state, const data::Corpus& corpus, const EpochCallback& on_epoch = {}) {
  const TrainConfig& cfg = state.train;
  cfg.validate();
  if (corpus.empty()) throw Error(ErrorCode::kData, "train: empty training corpus");
  for (const auto& seq : corpus) {
    if (seq.actions.size() < 2) throw Error(ErrorCode::kData, "train: sequence '" + seq.id + "' has fewer than 2 actions");
  }
  TrainOutcome out;
  ParamStore& params = state.model.params;
  std::vector<Gradients> per_seq(std::min(cfg.batch_size, corpus.size()), Gradients(params));
  std::vector<objectives::LossBreakdown> parts(per_seq.size());
  Gradients total(params);

  while (state.epoch < cfg.epochs) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t epoch = state.epoch;
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
    const auto order = epoch_order(corpus.size(), cfg.seed, epoch);
    objectives::LossBreakdown sums;
    double l2_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      const double weight = 1.0 / static_cast<double>(count);
      try {
        parallel_for(count, cfg.workers, [&](std::size_t i) {
          const data::Ctas& seq = corpus[order[begin + i]];
          per_seq[i].zero();
          parts[i] = {};
          Tape tape(&params);
          const Var loss = objectives::sequence_loss(tape, state.model, seq, cfg, weight, &parts[i]);
          tape.backward(loss, per_seq[i]);
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumeric) throw;
        throw Error(ErrorCode::kDiverged, "epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      total.zero();
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto g = total[p].values();
        const auto theta = params.value(p).values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * cfg.l2_coeff * theta[k];
      }
      for (std::size_t i = 0; i < count; ++i) {
        total += per_seq[i];
        sums.nll += parts[i].nll;
        sums.goal_ce += parts[i].goal_ce;
        sums.margin_goal += parts[i].margin_goal;
        sums.margin_action += parts[i].margin_action;
      }
      l2_sum += cfg.l2_coeff * params.squared_norm();
      ++batches;
      state.adam.step(params, total, cfg, lr);
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params.value(p).all_finite()) {
          throw Error(ErrorCode::kDiverged, "epoch " + std::to_string(epoch + 1) + ": parameter '" + params.name(p) +
                                                "' became non-finite");
        }
      }
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    try {
      rec.loss = objectives::total_loss(sums, corpus.size(), l2_sum / static_cast<double>(batches), cfg);
    } catch (const Error& e) {
      throw Error(ErrorCode::kDiverged, "epoch " + std::to_string(epoch + 1) + ": " + e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.epoch = epoch + 1;
    const bool improved = rec.loss.total < state.best_total;
    if (improved) {
      state.best_total = rec.loss.total;
      state.best_epoch = state.epoch;
      state.stale_epochs = 0;
    } else {
      ++state.stale_epochs;
    }
    out.log.push_back(rec);
    if (on_epoch) on_epoch(state, rec, improved);
    if (cfg.early_stop_patience > 0 && state.stale_epochs >= cfg.early_stop_patience) {
      out.early_stopped = true;
      break;
    }
  }
  out.state = std::move(state);
  return out;
}

/// Persists the latest state, the best-by-training-loss state, and the epoch
/// log into a run directory.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir_.string() + "': " + ec.message());
  }

  const std::filesystem::path& path() const noexcept { return dir_; }

  /// Starts a fresh log, or keeps the first `epochs` lines when resuming.
  void reset_log(std::size_t epochs) {
    std::vector<std::string> kept;
    std::ifstream in(dir_ / files::kLog);
    std::string line;
    while (kept.size() < epochs && std::getline(in, line))
      if (!line.empty()) kept.push_back(line);
    std::string text;
    for (const auto& l : kept) text += l + "\n";
    write_atomic(dir_ / files::kLog, text);
  }

  void record(const Checkpoint& state, const EpochRecord& rec, bool improved) {
    save_checkpoint(dir_ / files::kCheckpoint, state);
    if (improved) save_checkpoint(dir_ / files::kBest, state);
    std::ofstream log(dir_ / files::kLog, std::ios::app);
    if (!log) throw Error(ErrorCode::kIo, "cannot append to training log in '" + dir_.string() + "'");
    log << rec.to_line() << "\n";
  }

  EpochCallback callback() {
    return [this](const Checkpoint& s, const EpochRecord& r, bool improved) { record(s, r, improved); };
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace proactive::training

#endif  // PROACTIVE_TRAINING_HPP
