#ifndef PROACTIVE_OBJECTIVES_HPP
#define PROACTIVE_OBJECTIVES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/error.hpp"
#include "proactive/model.hpp"
#include "proactive/numerics/ops.hpp"

namespace proactive::objectives {

/// Batch-mean loss components. `l2` already carries its coefficient, so
/// total = nll + goal_ce + margin_weight·(margin_goal + margin_action) + l2.
struct LossBreakdown {
  double nll = 0.0;
  double goal_ce = 0.0;
  double margin_goal = 0.0;
  double margin_action = 0.0;
  double l2 = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const {
    return {{"nll", nll},     {"goal_ce", goal_ce}, {"margin_goal", margin_goal}, {"margin_action", margin_action},
            {"l2", l2},       {"total", total}};
  }
};

/// Best-so-far value and its position within one sequence.
class RunningMax {
 public:
  bool empty() const noexcept { return empty_; }
  double value() const noexcept { return empty_ ? 0.0 : best_; }
  std::size_t index() const noexcept { return index_; }

  void observe(double v, std::size_t at) {
    if (empty_ || v > best_) {
      best_ = v;
      index_ = at;
      empty_ = false;
    }
  }

 private:
  bool empty_ = true;
  double best_ = 0.0;
  std::size_t index_ = 0;
};

/// −Σ_k [log P(c_{k+1}|s_k) + log ρ(Δ_{k+1}|s_k)] over the transitions of
/// `seq`. Row k−1 of the forward outputs must hold the state after action k.
inline Var nll(const Forward& f, const data::Ctas& seq, std::size_t eos, bool eos_time_term = true) {
  using namespace numerics;
  const std::size_t n = seq.actions.size();
  if (n < 2) throw Error(ErrorCode::kContract, "nll: sequence '" + seq.id + "' has no transition");
  if (f.n < n - 1) throw Error(ErrorCode::kDimension, "nll: forward pass shorter than the transitions");
  const std::size_t width = f.mark_logp.value().cols();
  std::vector<std::size_t> mark_idx(n - 1);
  std::vector<double> gaps;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto next = seq.actions[k + 1].mark;
    if (next >= width) throw Error(ErrorCode::kVocab, "nll: mark id out of range in '" + seq.id + "'");
    mark_idx[k] = k * width + next;
    if (next != eos || eos_time_term) gaps.push_back(seq.actions[k + 1].time - seq.actions[k].time);
  }
  Var log_lik = sum(take(f.mark_logp, mark_idx));
  if (!gaps.empty()) {
    heads::TimeParams p = f.time;
    if (p.mu.value().rows() != gaps.size()) {
      p.mu = slice_rows(p.mu, 0, gaps.size());
      p.var = slice_rows(p.var, 0, gaps.size());
    }
    log_lik = log_lik + sum(heads::log_density(p, gaps));
  }
  return scale(log_lik, -1.0);
}

/// Σ_{k=1..steps} γ^k · (−log p_k(goal)).
inline Var discounted_goal_ce(const Var& goal_logp, std::size_t goal, std::size_t steps, double gamma) {
  using namespace numerics;
  const std::size_t width = goal_logp.value().cols();
  if (goal >= width) throw Error(ErrorCode::kVocab, "discounted_goal_ce: goal id out of range");
  if (steps == 0 || steps > goal_logp.value().rows()) throw Error(ErrorCode::kDimension, "discounted_goal_ce: bad step count");
  std::vector<std::size_t> idx(steps);
  Tensor weights({steps}, 0.0);
  double w = 1.0;
  for (std::size_t k = 0; k < steps; ++k) {
    idx[k] = k * width + goal;
    w *= gamma;
    weights[k] = w;
  }
  Tape& tape = goal_logp.tape();
  return scale(sum(tape.constant(std::move(weights)) * take(goal_logp, idx)), -1.0);
}

/// Σ_col Σ_{k≥2} max(0, p*_k − p_k) for probabilities `probs` (rows = steps),
/// where p*_k is the largest probability of that column at steps before k.
inline Var margin_over_columns(const Var& probs, const std::vector<std::size_t>& columns, std::size_t steps) {
  using namespace numerics;
  const std::size_t width = probs.value().cols();
  if (steps > probs.value().rows()) throw Error(ErrorCode::kDimension, "margin: more steps than rows");
  std::vector<std::size_t> best_idx, cur_idx;
  for (std::size_t c : columns) {
    if (c >= width) throw Error(ErrorCode::kDimension, "margin: column out of range");
    RunningMax best;
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t at = k * width + c;
      if (!best.empty()) {
        best_idx.push_back(best.index());
        cur_idx.push_back(at);
      }
      best.observe(probs.value()[at], at);
    }
  }
  Tape& tape = probs.tape();
  if (cur_idx.empty()) return tape.constant(Tensor::scalar(0.0));
  return sum(relu(take(probs, best_idx) - take(probs, cur_idx)));
}

inline Var margin_goal(const Var& goal_logp, std::size_t goal, std::size_t steps) {
  return margin_over_columns(numerics::exp(goal_logp), {goal}, steps);
}

inline Var margin_action(const Var& mark_logp, const std::vector<std::size_t>& goal_actions, std::size_t steps) {
  return margin_over_columns(numerics::exp(mark_logp), goal_actions, steps);
}

/// Differentiable terms of one sequence, each unweighted.
struct SequenceTerms {
  Var nll;
  Var goal_ce;
  Var margin_goal;
  Var margin_action;
};

inline SequenceTerms sequence_terms(Tape& tape, const Model& model, const data::Ctas& seq, const TrainConfig& train) {
  const std::size_t eos = model.vocab.eos();
  const auto inputs = encoder_inputs(seq, eos);
  const Forward f = forward(tape, model.config, model.clusters, inputs);
  const std::size_t steps = inputs.size();
  SequenceTerms t;
  t.nll = nll(f, seq, eos, train.eos_time_term);
  t.goal_ce = discounted_goal_ce(f.goal_logp, seq.goal, steps, train.gamma);
  const bool margins = model.config.variant == Variant::kBase || train.margins_in_plus;
  if (margins) {
    t.margin_goal = margin_goal(f.goal_logp, seq.goal, steps);
    t.margin_action = margin_action(f.mark_logp, model.vocab.goal_actions(seq.goal), steps);
  } else {
    t.margin_goal = tape.constant(Tensor::scalar(0.0));
    t.margin_action = tape.constant(Tensor::scalar(0.0));
  }
  return t;
}

inline void require_finite(double v, const char* component, const std::string& seq_id) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNumeric, std::string("loss component ") + component + " is non-finite for sequence '" + seq_id + "'");
  }
}

/// Weighted per-sequence objective, scaled by `weight` (1/batch size during
/// training). Component values are added, unscaled, to `acc`.
inline Var sequence_loss(Tape& tape, const Model& model, const data::Ctas& seq, const TrainConfig& train, double weight,
                         LossBreakdown* acc = nullptr) {
  const SequenceTerms t = sequence_terms(tape, model, seq, train);
  require_finite(t.nll.item(), "nll", seq.id);
  require_finite(t.goal_ce.item(), "goal_ce", seq.id);
  require_finite(t.margin_goal.item(), "margin_goal", seq.id);
  require_finite(t.margin_action.item(), "margin_action", seq.id);
  if (acc) {
    acc->nll += t.nll.item();
    acc->goal_ce += t.goal_ce.item();
    acc->margin_goal += t.margin_goal.item();
    acc->margin_action += t.margin_action.item();
  }
  using numerics::scale;
  const Var margins = scale(t.margin_goal + t.margin_action, train.margin_weight);
  return scale(t.nll + t.goal_ce + margins, weight);
}

/// l2_coeff · ‖θ‖² over every parameter.
inline Var l2_penalty(Tape& tape, double coeff) {
  using namespace numerics;
  const ParamStore* store = tape.store();
  if (!store || store->empty()) return tape.constant(Tensor::scalar(0.0));
  Var acc = tape.constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < store->size(); ++i) {
    const Var p = tape.param(i);
    acc = acc + sum(p * p);
  }
  return scale(acc, coeff);
}

/// Combines batch-summed components into the batch-mean breakdown.
inline LossBreakdown total_loss(LossBreakdown sums, std::size_t batch, double l2_term, const TrainConfig& train) {
  if (batch == 0) throw Error(ErrorCode::kContract, "total_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(batch);
  LossBreakdown b;
  b.nll = sums.nll * inv;
  b.goal_ce = sums.goal_ce * inv;
  b.margin_goal = sums.margin_goal * inv;
  b.margin_action = sums.margin_action * inv;
  b.l2 = l2_term;
  b.total = b.nll + b.goal_ce + train.margin_weight * (b.margin_goal + b.margin_action) + b.l2;
  require_finite(b.l2, "l2", "<batch>");
  require_finite(b.total, "total", "<batch>");
  return b;
}

/// Differentiable full objective over `batch` on one tape; used for gradient
/// checks and small evaluations.
inline Var batch_loss(Tape& tape, const Model& model, const data::Corpus& batch, const TrainConfig& train,
                      LossBreakdown* breakdown = nullptr) {
  if (batch.empty()) throw Error(ErrorCode::kContract, "batch_loss: empty batch");
  LossBreakdown sums;
  const double w = 1.0 / static_cast<double>(batch.size());
  Var total = l2_penalty(tape, train.l2_coeff);
  const double l2 = total.item();
  for (const auto& seq : batch) total = total + sequence_loss(tape, model, seq, train, w, &sums);
  if (breakdown) *breakdown = total_loss(sums, batch.size(), l2, train);
  return total;
}

}  // namespace proactive::objectives

#endif  // PROACTIVE_OBJECTIVES_HPP
