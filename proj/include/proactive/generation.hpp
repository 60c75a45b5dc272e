#ifndef PROACTIVE_GENERATION_HPP
#define PROACTIVE_GENERATION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "proactive/error.hpp"
#include "proactive/heads.hpp"
#include "proactive/model.hpp"

namespace proactive::generation {

enum class StopReason { kGoalMismatch, kEosSampled, kMaxLen };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kGoalMismatch: return "goal_mismatch";
    case StopReason::kEosSampled: return "eos_sampled";
    case StopReason::kMaxLen: return "max_len";
  }
  return "unknown";
}

struct GenRequest {
  std::size_t goal = 0;
  data::Action first;
  std::size_t max_len = 0;  // 0: the model's max_generation_length
  std::uint64_t seed = 0;
  bool greedy = false;
};

struct Generated {
  data::Ctas sequence;  // ends in EOS
  StopReason reason = StopReason::kMaxLen;

  /// Number of actions, not counting the trailing EOS.
  std::size_t length() const { return sequence.actions.empty() ? 0 : sequence.actions.size() - 1; }
};

/// Lowest index wins ties.
inline std::size_t argmax_row(const Tensor& m, std::size_t row) {
  const std::size_t cols = m.cols();
  std::size_t best = 0;
  for (std::size_t c = 1; c < cols; ++c)
    if (m.at(row, c) > m.at(row, best)) best = c;
  return best;
}

inline std::size_t sample_row(const Tensor& logp, std::size_t row, std::mt19937_64& rng) {
  const std::size_t cols = logp.cols();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng), acc = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    acc += std::exp(logp.at(row, c));
    if (r < acc) return c;
  }
  return cols - 1;
}

/// Goal-conditioned rollout from a first action. The goal head is consulted
/// on e1 and after every appended action; a different argmax goal ends the
/// rollout. Re-encodes the whole prefix at each step.
inline Generated generate(const Model& model, const GenRequest& req) {
  const auto& vocab = model.vocab;
  if (req.goal >= vocab.goal_count()) throw Error(ErrorCode::kVocab, "generate: goal id out of range");
  if (req.first.mark >= vocab.mark_count()) throw Error(ErrorCode::kVocab, "generate: first mark must be a real action");
  if (!std::isfinite(req.first.time) || req.first.time < 0.0) throw Error(ErrorCode::kData, "generate: bad first time");
  const std::size_t max_len = req.max_len ? req.max_len : model.config.max_generation_length;
  if (max_len < 2) throw Error(ErrorCode::kContract, "generate: max_len must be at least 2");
  if (max_len > model.config.encoder.max_len) {
    throw Error(ErrorCode::kContract, "generate: max_len " + std::to_string(max_len) + " exceeds the positional table (" +
                                          std::to_string(model.config.encoder.max_len) + ")");
  }
  const std::size_t eos = vocab.eos();
  std::mt19937_64 rng(req.seed);

  Generated out;
  out.sequence.id = "generated";
  out.sequence.goal = req.goal;
  auto& actions = out.sequence.actions;
  actions.push_back(req.first);

  const auto finish = [&](StopReason reason, double eos_time) {
    actions.push_back({eos, eos_time});
    out.reason = reason;
    return out;
  };
  const auto next_time = [](double t, double delta) {
    const double next = t + delta;
    return next > t ? next : std::nextafter(t, std::numeric_limits<double>::infinity());
  };

  while (true) {
    Tape tape(&model.params, false);
    const Forward f = forward(tape, model.config, model.clusters, actions);
    const std::size_t k = f.n - 1;
    const double t = actions.back().time;
    if (argmax_row(f.goal_logp.value(), k) != req.goal) {
      return finish(StopReason::kGoalMismatch, next_time(t, model.config.eos_gap));
    }
    if (actions.size() >= max_len) return finish(StopReason::kMaxLen, next_time(t, model.config.eos_gap));
    const std::size_t mark = req.greedy ? argmax_row(f.mark_logp.value(), k) : sample_row(f.mark_logp.value(), k, rng);
    const heads::TimeDensity d = heads::density_at(f.time, k);
    const double delta = req.greedy ? heads::point_time(d) : heads::sample_time(d, rng);
    if (mark == eos) return finish(StopReason::kEosSampled, next_time(t, delta));
    actions.push_back({mark, next_time(t, delta)});
  }
}

}  // namespace proactive::generation

#endif  // PROACTIVE_GENERATION_HPP
