#ifndef PROACTIVE_SYNTH_HPP
#define PROACTIVE_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "proactive/data.hpp"
#include "proactive/error.hpp"

namespace proactive::synth {

struct GapParams {
  double mu = 0.0;     // log-scale location; the median gap is e^mu
  double sigma = 0.5;  // log-scale spread
};

struct GoalGrammar {
  std::string name;
  std::vector<std::string> actions;  // emitted in order
  std::vector<std::pair<std::size_t, std::size_t>> swap_pairs;
};

/// Ground-truth generator parameters. The gap following an action is drawn
/// from that action's lognormal.
struct SynthSpec {
  std::vector<GoalGrammar> goals;
  std::map<std::string, GapParams> gaps;
  double swap_probability = 0.0;
  std::size_t sequences = 100;
  std::uint64_t seed = 0;
  double min_start = 0.05;
  double max_start = 0.5;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, "synth spec: " + msg); };
    if (goals.empty()) fail("no goals");
    if (sequences == 0) fail("sequences must be positive");
    if (!(swap_probability >= 0.0 && swap_probability <= 1.0)) fail("swap_probability outside [0,1]");
    if (!(min_start > 0.0 && min_start <= max_start && std::isfinite(max_start))) fail("bad start offset range");
    for (const auto& g : goals) {
      if (g.actions.empty()) fail("goal '" + g.name + "' has an empty template");
      for (const auto& a : g.actions)
        if (!gaps.count(a)) fail("action '" + a + "' has no gap parameters");
      for (const auto& [i, j] : g.swap_pairs)
        if (i >= g.actions.size() || j >= g.actions.size()) fail("swap pair out of range in goal '" + g.name + "'");
    }
    for (const auto& [name, p] : gaps)
      if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !(p.sigma > 0.0)) fail("bad gap parameters for '" + name + "'");
  }

  static SynthSpec from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"goals", "actions", "swap_probability", "sequences",
                                                   "seed",  "start_offset"};
    for (const auto& [key, _] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw Error(ErrorCode::kConfig, "synth spec: unknown key '" + key + "'");
    SynthSpec s;
    try {
      for (const auto& g : j.at("goals")) {
        GoalGrammar grammar{g.at("name").get<std::string>(), g.at("template").get<std::vector<std::string>>(), {}};
        for (const auto& p : g.value("swap_pairs", nlohmann::json::array()))
          grammar.swap_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
        s.goals.push_back(std::move(grammar));
      }
      for (const auto& [name, p] : j.at("actions").items())
        s.gaps[name] = GapParams{p.at("mu").get<double>(), p.at("sigma").get<double>()};
      s.swap_probability = j.value("swap_probability", 0.0);
      s.sequences = j.value("sequences", std::size_t{100});
      s.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("start_offset")) {
        s.min_start = j["start_offset"].at(0).get<double>();
        s.max_start = j["start_offset"].at(1).get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json goals_json = nlohmann::json::array();
    for (const auto& g : goals) goals_json.push_back({{"name", g.name}, {"template", g.actions}, {"swap_pairs", g.swap_pairs}});
    nlohmann::json actions = nlohmann::json::object();
    for (const auto& [name, p] : gaps) actions[name] = {{"mu", p.mu}, {"sigma", p.sigma}};
    return {{"goals", goals_json},     {"actions", actions}, {"swap_probability", swap_probability},
            {"sequences", sequences}, {"seed", seed},       {"start_offset", {min_start, max_start}}};
  }
};

inline SynthSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return SynthSpec::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, "synth spec: " + std::string(e.what()));
  }
}

/// Draws `spec.sequences` sequences. Sequence i uses its own generator seeded
/// from (seed, i), so output is a pure function of the spec.
inline data::LoadedCorpus generate(const SynthSpec& spec) {
  spec.validate();
  data::LoadedCorpus out;
  for (const auto& g : spec.goals) {
    out.vocab.intern_goal(g.name);
    for (const auto& a : g.actions) out.vocab.intern_mark(a);
  }
  out.sequences.reserve(spec.sequences);
  for (std::size_t i = 0; i < spec.sequences; ++i) {
    std::seed_seq seq_seed{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                           static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(seq_seed);
    std::uniform_int_distribution<std::size_t> pick_goal(0, spec.goals.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto goal_index = pick_goal(rng);
    const GoalGrammar& grammar = spec.goals[goal_index];
    std::vector<std::string> marks = grammar.actions;
    for (const auto& [a, b] : grammar.swap_pairs)
      if (unit(rng) < spec.swap_probability) std::swap(marks[a], marks[b]);

    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", i);
    data::Ctas seq{id, out.vocab.goal_id(grammar.name), {}};
    double t = spec.min_start + (spec.max_start - spec.min_start) * unit(rng);
    for (std::size_t k = 0; k < marks.size(); ++k) {
      seq.actions.push_back({out.vocab.mark_id(marks[k]), t});
      const GapParams& p = spec.gaps.at(marks[k]);
      t += std::exp(p.mu + p.sigma * normal(rng));
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace proactive::synth

#endif  // PROACTIVE_SYNTH_HPP
