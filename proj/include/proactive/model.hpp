#ifndef PROACTIVE_MODEL_HPP
#define PROACTIVE_MODEL_HPP

#include <optional>
#include <random>
#include <vector>

#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/encoder.hpp"
#include "proactive/heads.hpp"

namespace proactive {

using numerics::ParamStore;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

/// A trained (or freshly initialised) model with everything needed to decode
/// its inputs and outputs.
struct Model {
  ModelConfig config;
  ParamStore params;
  data::Vocab vocab;
  data::ClusterMap clusters;
};

inline ParamStore init_params(const ModelConfig& cfg) {
  cfg.validate_sized();
  std::mt19937_64 rng(cfg.init_seed);
  ParamStore store;
  encoder::init_params(store, cfg.encoder, cfg.marks, cfg.variant == Variant::kPlus, rng);
  heads::init_params(store, cfg.encoder.dim, cfg.marks, cfg.goals, cfg.clusters, rng);
  return store;
}

/// All per-position outputs for one prefix. Row k of each matrix belongs to
/// the state after action k.
struct Forward {
  Var y;                 // action embeddings, before positions
  Var s;                 // history embeddings
  std::optional<Var> x;  // set embeddings (plus variant)
  Var mark_logp;         // n × |C|+1
  heads::TimeParams time;
  Var goal_logp;  // n × |G|
  std::size_t n = 0;
};

inline Forward forward(Tape& tape, const ModelConfig& cfg, const data::ClusterMap& clusters,
                       const std::vector<data::Action>& inputs) {
  Forward f;
  f.n = inputs.size();
  f.y = encoder::embed_actions(tape, inputs, cfg.time_scale);
  f.s = encoder::encode(encoder::positional_add(f.y), cfg.encoder);
  if (cfg.variant == Variant::kPlus) f.x = encoder::set_embed(f.y);
  const Var* x = f.x ? &*f.x : nullptr;
  std::vector<std::size_t> cluster_ids(f.n);
  for (std::size_t k = 0; k < f.n; ++k) cluster_ids[k] = clusters.cluster_of(inputs[k].mark);
  f.mark_logp = heads::mark_log_probs(heads::fuse(f.s, x, cfg.alpha_mark));
  f.time = heads::time_params(heads::fuse(f.s, x, cfg.alpha_time), cluster_ids);
  f.goal_logp = heads::goal_log_probs(heads::fuse(f.s, x, cfg.alpha_goal));
  return f;
}

/// Actions the encoder sees for a training sequence: everything except a
/// trailing EOS.
inline std::vector<data::Action> encoder_inputs(const data::Ctas& seq, std::size_t eos) {
  std::vector<data::Action> out = seq.actions;
  if (!out.empty() && out.back().mark == eos) out.pop_back();
  return out;
}

}  // namespace proactive

#endif  // PROACTIVE_MODEL_HPP
