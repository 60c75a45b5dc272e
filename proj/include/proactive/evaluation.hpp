#ifndef PROACTIVE_EVALUATION_HPP
#define PROACTIVE_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "proactive/config.hpp"
#include "proactive/generation.hpp"
#include "proactive/heads.hpp"
#include "proactive/model.hpp"
#include "proactive/parallel.hpp"

namespace proactive::evaluation {

/// Canonical text for a prefix fraction, e.g. "0.3".
inline std::string fraction_key(double f) { return nlohmann::json(f).dump(); }

/// Number of actions fed for prefix fraction f of an n-action sequence.
inline std::size_t prefix_length(double f, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

/// FNV-1a, for seeds that depend on a sequence id rather than its position.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t sequence_seed(std::uint64_t seed, const std::string& id) {
  const std::uint64_t h = stable_hash(id);
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(h),
                  static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(s);
  return rng();
}

struct NextActionRecord {
  std::size_t transitions = 0;
  std::size_t correct = 0;
  double abs_error = 0.0;  // summed over transitions
};

struct GenerationRecord {
  std::size_t length = 0;  // excluding EOS
  std::string reason;
  std::size_t compared = 0;  // true positions 2..|S|
  std::size_t correct = 0;
  std::size_t timed = 0;  // positions present in both
  double abs_error = 0.0;
};

struct SequenceRecord {
  std::string id;
  std::size_t goal = 0;
  std::size_t length = 0;
  NextActionRecord next;
  std::vector<std::size_t> predicted_goal;  // one per prefix fraction
  bool has_generation = false;
  GenerationRecord gen;

  nlohmann::json to_json(const std::vector<double>& prefixes) const {
    nlohmann::json j{{"id", id},
                     {"goal", goal},
                     {"length", length},
                     {"transitions", next.transitions},
                     {"correct_marks", next.correct},
                     {"abs_time_error", next.abs_error}};
    nlohmann::json goals = nlohmann::json::object();
    for (std::size_t i = 0; i < prefixes.size(); ++i) goals[fraction_key(prefixes[i])] = predicted_goal[i];
    j["predicted_goal"] = goals;
    if (has_generation) {
      j["generation"] = {{"length", gen.length},     {"reason", gen.reason},   {"compared", gen.compared},
                         {"correct", gen.correct},   {"timed", gen.timed},     {"abs_time_error", gen.abs_error}};
    }
    return j;
  }
};

/// Teacher-forced one-step-ahead prediction on a raw (EOS-free) sequence.
inline NextActionRecord next_action(const Model& model, const data::Ctas& seq) {
  NextActionRecord r;
  if (seq.actions.size() < 2) return r;
  Tape tape(&model.params, false);
  const Forward f = forward(tape, model.config, model.clusters, seq.actions);
  for (std::size_t k = 0; k + 1 < seq.actions.size(); ++k) {
    ++r.transitions;
    if (generation::argmax_row(f.mark_logp.value(), k) == seq.actions[k + 1].mark) ++r.correct;
    const double predicted = seq.actions[k].time + heads::point_time(heads::density_at(f.time, k));
    r.abs_error += std::abs(seq.actions[k + 1].time - predicted);
  }
  return r;
}

/// Argmax goal after ⌈f·n⌉ actions, for each fraction.
inline std::vector<std::size_t> goal_predictions(const Model& model, const data::Ctas& seq, const std::vector<double>& prefixes) {
  std::vector<std::size_t> out;
  for (double f : prefixes) {
    const std::size_t k = prefix_length(f, seq.actions.size());
    Tape tape(&model.params, false);
    const std::vector<data::Action> prefix(seq.actions.begin(), seq.actions.begin() + static_cast<std::ptrdiff_t>(k));
    const Forward fw = forward(tape, model.config, model.clusters, prefix);
    out.push_back(generation::argmax_row(fw.goal_logp.value(), k - 1));
  }
  return out;
}

/// Rollout from the true goal and first action, compared with the truth on
/// positions 2..|S|. Missing generated positions count as wrong marks and
/// are left out of the time error.
inline GenerationRecord generation_compare(const data::Ctas& truth, const generation::Generated& g) {
  GenerationRecord r;
  r.length = g.length();
  r.reason = generation::to_string(g.reason);
  for (std::size_t i = 1; i < truth.actions.size(); ++i) {
    ++r.compared;
    if (i >= r.length) continue;
    ++r.timed;
    if (g.sequence.actions[i].mark == truth.actions[i].mark) ++r.correct;
    r.abs_error += std::abs(g.sequence.actions[i].time - truth.actions[i].time);
  }
  return r;
}

inline GenerationRecord generation_record(const Model& model, const data::Ctas& seq, std::uint64_t seed, bool greedy) {
  generation::GenRequest req;
  req.goal = seq.goal;
  req.first = seq.actions.front();
  req.seed = sequence_seed(seed, seq.id);
  req.greedy = greedy;
  return generation_compare(seq, generation::generate(model, req));
}

struct EvalReport {
  double apa = 0.0;
  double mae = 0.0;
  std::size_t transitions = 0;
  std::map<std::string, double> gpa_at;
  bool has_generation = false;
  double gen_apa = 0.0;
  double gen_mae = 0.0;
  double cl = 0.0;
  std::map<std::string, std::size_t> reasons;
  std::vector<SequenceRecord> records;  // sorted by id
  EvalConfig config;

  nlohmann::json to_json() const {
    nlohmann::json echoed = config.to_json();
    echoed.erase("workers");  // report bytes must not depend on threading
    nlohmann::json j{{"format", "proactive.eval_report"},
                     {"version", 1},
                     {"seed", config.seed},
                     {"config", echoed},
                     {"sequences", records.size()},
                     {"apa", apa},
                     {"mae", mae},
                     {"transitions", transitions},
                     {"gpa_at", gpa_at}};
    if (has_generation) {
      j["cl"] = cl;
      j["generation"] = {{"apa", gen_apa}, {"mae", gen_mae}, {"cl", cl}, {"reasons", reasons}};
    } else {
      j["cl"] = nullptr;
    }
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) recs.push_back(r.to_json(config.prefixes));
    j["records"] = recs;
    return j;
  }
};

inline double ratio(double num, std::size_t den) { return den ? num / static_cast<double>(den) : 0.0; }

/// Recomputes every summary figure from the per-sequence records.
inline void summarise(EvalReport& r) {
  std::size_t correct = 0, trans = 0, gen_correct = 0, gen_compared = 0, gen_timed = 0, lengths_ok = 0;
  double err = 0.0, gen_err = 0.0;
  std::vector<std::size_t> hits(r.config.prefixes.size(), 0);
  r.reasons.clear();
  for (const auto& s : r.records) {
    correct += s.next.correct;
    trans += s.next.transitions;
    err += s.next.abs_error;
    for (std::size_t i = 0; i < hits.size(); ++i)
      if (s.predicted_goal[i] == s.goal) ++hits[i];
    if (s.has_generation) {
      gen_correct += s.gen.correct;
      gen_compared += s.gen.compared;
      gen_timed += s.gen.timed;
      gen_err += s.gen.abs_error;
      if (s.gen.length == s.length) ++lengths_ok;
      ++r.reasons[s.gen.reason];
    }
  }
  r.transitions = trans;
  r.apa = ratio(static_cast<double>(correct), trans);
  r.mae = ratio(err, trans);
  r.gpa_at.clear();
  for (std::size_t i = 0; i < hits.size(); ++i)
    r.gpa_at[fraction_key(r.config.prefixes[i])] = ratio(static_cast<double>(hits[i]), r.records.size());
  if (r.has_generation) {
    r.gen_apa = ratio(static_cast<double>(gen_correct), gen_compared);
    r.gen_mae = ratio(gen_err, gen_timed);
    r.cl = ratio(static_cast<double>(lengths_ok), r.records.size());
  }
}

/// Full report over a raw test corpus. Sequences are processed in parallel and
/// assembled in id order.
inline EvalReport evaluate(const Model& model, const data::Corpus& test, const EvalConfig& cfg) {
  cfg.validate();
  EvalReport report;
  report.config = cfg;
  report.has_generation = cfg.generation;
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return test[a].id < test[b].id; });
  report.records.resize(test.size());
  parallel_for(test.size(), cfg.workers, [&](std::size_t i) {
    const data::Ctas& seq = test[order[i]];
    if (seq.actions.empty()) throw Error(ErrorCode::kData, "evaluate: sequence '" + seq.id + "' is empty");
    if (data::ends_in_eos(seq, model.vocab.eos())) throw Error(ErrorCode::kData, "evaluate: sequence '" + seq.id + "' ends in EOS");
    SequenceRecord& rec = report.records[i];
    rec.id = seq.id;
    rec.goal = seq.goal;
    rec.length = seq.actions.size();
    rec.next = next_action(model, seq);
    rec.predicted_goal = goal_predictions(model, seq, cfg.prefixes);
    if (cfg.generation) {
      rec.has_generation = true;
      rec.gen = generation_record(model, seq, cfg.seed, cfg.greedy);
    }
  });
  summarise(report);
  return report;
}

}  // namespace proactive::evaluation

#endif  // PROACTIVE_EVALUATION_HPP
