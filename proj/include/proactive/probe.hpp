#ifndef PROACTIVE_PROBE_HPP
#define PROACTIVE_PROBE_HPP

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "proactive/model.hpp"
#include "proactive/numerics/gradcheck.hpp"
#include "proactive/objectives.hpp"

namespace proactive::probe {

/// A randomly initialised model over marks m0..m{marks-1} and goals
/// g0..g{goals-1}, with marks assigned to clusters round-robin.
inline Model random_model(ModelConfig cfg, std::size_t marks, std::size_t goals) {
  Model m;
  for (std::size_t i = 0; i < marks; ++i) m.vocab.intern_mark("m" + std::to_string(i));
  for (std::size_t g = 0; g < goals; ++g) m.vocab.intern_goal("g" + std::to_string(g));
  cfg.marks = m.vocab.marks_with_eos();
  cfg.goals = goals;
  if (cfg.encoder.max_len == 0) cfg.encoder.max_len = 16;
  m.clusters.clusters = cfg.clusters;
  for (std::size_t i = 0; i <= marks; ++i) m.clusters.assignment.push_back(i % cfg.clusters);
  m.config = cfg;
  m.params = init_params(cfg);
  return m;
}

/// `length` actions with random marks and gaps in [0.2, 3); optionally ends in
/// EOS (counted in `length`).
inline data::Ctas random_sequence(const Model& m, std::size_t length, std::mt19937_64& rng, bool eos = false,
                                  std::size_t goal = 0) {
  std::uniform_int_distribution<std::size_t> mark(0, m.vocab.mark_count() - 1);
  std::uniform_real_distribution<double> gap(0.2, 3.0);
  data::Ctas seq{"probe", goal, {}};
  double t = 0.1;
  for (std::size_t k = 0; k < length; ++k) {
    const bool last_eos = eos && k + 1 == length;
    seq.actions.push_back({last_eos ? m.vocab.eos() : mark(rng), t});
    t += gap(rng);
  }
  return seq;
}

/// Finite-difference check of the full training objective on one random
/// sequence of `length` actions. Every parameter is jittered away from its
/// initial value first: zero biases leave ReLU units sitting exactly on their
/// kink, where one-sided and central differences disagree.
inline numerics::GradCheckReport gradient_check(const ModelConfig& cfg, std::size_t length, std::uint64_t seed,
                                                TrainConfig train = {}, double h = 1e-5, double abs_floor = 1e-5) {
  const std::size_t marks = std::max<std::size_t>(cfg.clusters, 6);
  Model m = random_model(cfg, marks, 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (std::size_t i = 0; i < m.params.size(); ++i)
    for (double& v : m.params.value(i).values()) v += jitter(rng);
  data::Corpus batch{random_sequence(m, length, rng, true, 0)};
  m.vocab.set_goal_actions(batch);
  const auto objective = [&](numerics::Tape& tape, const numerics::ParamStore&) {
    return objectives::batch_loss(tape, m, batch, train);
  };
  return numerics::finite_difference_check(objective, m.params, h, abs_floor);
}

}  // namespace proactive::probe

#endif  // PROACTIVE_PROBE_HPP
