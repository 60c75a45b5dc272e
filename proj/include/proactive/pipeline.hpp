#ifndef PROACTIVE_PIPELINE_HPP
#define PROACTIVE_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <utility>

#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/model.hpp"
#include "proactive/training.hpp"

namespace proactive::pipeline {

/// Train/test split of a raw corpus plus a model sized for it.
struct Prepared {
  data::Corpus train;      // raw, without EOS
  data::Corpus test;       // raw, without EOS; empty when splitting is off
  data::Corpus train_eos;  // what the optimiser sees
  Model model;
};

inline std::size_t longest(const data::Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& s : corpus) n = std::max(n, s.actions.size());
  return n;
}

/// Splits, builds C*_g and duration clusters from the training side only,
/// appends EOS, and initialises parameters.
inline Prepared prepare(const RunConfig& cfg, data::LoadedCorpus corpus) {
  cfg.data.validate();
  if (corpus.sequences.empty()) throw Error(ErrorCode::kData, "corpus is empty");
  Prepared p;
  if (cfg.data.split) {
    std::tie(p.train, p.test) = data::split_by_goal(corpus.sequences, cfg.data.train_fraction, cfg.data.split_seed);
  } else {
    p.train = std::move(corpus.sequences);
  }
  for (const auto& seq : p.train)
    if (seq.actions.size() < 2) throw Error(ErrorCode::kData, "training sequence '" + seq.id + "' has fewer than 2 actions");

  Model& m = p.model;
  m.vocab = std::move(corpus.vocab);
  m.vocab.set_goal_actions(p.train);
  for (std::size_t g = 0; g < m.vocab.goal_count(); ++g) m.vocab.goal_actions(g);  // every goal needs training data

  const std::size_t eos = m.vocab.eos();
  const double median = data::median_gap(p.train, eos);
  if (!(median > 0.0)) throw Error(ErrorCode::kData, "median inter-action time of the training split is zero");

  ModelConfig mc = cfg.model;
  mc.marks = m.vocab.marks_with_eos();
  mc.goals = m.vocab.goal_count();
  mc.time_scale = median;
  mc.eos_gap = cfg.data.eos_gap > 0.0 ? cfg.data.eos_gap : median;
  const std::size_t max_train = longest(p.train);
  if (mc.max_generation_length == 0) {
    mc.max_generation_length = static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(max_train) - 1e-9));
  }
  mc.max_generation_length = std::max<std::size_t>(mc.max_generation_length, 2);
  // the encoder must also hold the longest generated prefix
  mc.encoder.max_len = std::max({mc.encoder.max_len, max_train + 1, mc.max_generation_length + 1});
  mc.validate_sized();

  m.clusters = data::build_clusters(p.train, m.vocab, mc.clusters, cfg.data.cluster_seed);
  m.config = mc;
  m.params = init_params(mc);
  p.train_eos = data::append_eos(p.train, eos, mc.eos_gap);
  return p;
}

/// Fresh training run over a prepared split.
inline training::TrainOutcome fit(const RunConfig& cfg, Prepared& p, const training::EpochCallback& on_epoch = {}) {
  auto state = training::Checkpoint::fresh(p.model, cfg.train);
  auto outcome = training::train(std::move(state), p.train_eos, on_epoch);
  p.model = outcome.state.model;
  return outcome;
}

}  // namespace proactive::pipeline

#endif  // PROACTIVE_PIPELINE_HPP
