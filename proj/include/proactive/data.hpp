#ifndef PROACTIVE_DATA_HPP
#define PROACTIVE_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "proactive/error.hpp"
#include "proactive/log.hpp"

namespace proactive::data {

inline constexpr const char* kEosName = "<EOS>";

struct Action {
  std::size_t mark = 0;
  double time = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

/// One goal-labelled continuous-time action sequence.
struct Ctas {
  std::string id;
  std::size_t goal = 0;
  std::vector<Action> actions;

  std::size_t size() const noexcept { return actions.size(); }
  friend bool operator==(const Ctas&, const Ctas&) = default;
};

using Corpus = std::vector<Ctas>;

/// Mark and goal name tables. Mark ids are 0..|C|-1 in order of first
/// appearance; id |C| is reserved for the end-of-sequence mark.
class Vocab {
 public:
  static constexpr int kFormatVersion = 1;

  std::size_t mark_count() const noexcept { return marks_.size(); }
  std::size_t marks_with_eos() const noexcept { return marks_.size() + 1; }
  std::size_t goal_count() const noexcept { return goals_.size(); }
  std::size_t eos() const noexcept { return marks_.size(); }

  std::size_t intern_mark(const std::string& name) {
    if (name == kEosName) throw Error(ErrorCode::kData, "vocab: '" + name + "' is reserved");
    auto [it, inserted] = mark_ids_.emplace(name, marks_.size());
    if (inserted) marks_.push_back(name);
    return it->second;
  }

  std::size_t intern_goal(const std::string& name) {
    auto [it, inserted] = goal_ids_.emplace(name, goals_.size());
    if (inserted) {
      goals_.push_back(name);
      goal_actions_.emplace_back();
    }
    return it->second;
  }

  std::size_t mark_id(const std::string& name) const {
    if (name == kEosName) return eos();
    auto it = mark_ids_.find(name);
    if (it == mark_ids_.end()) throw Error(ErrorCode::kVocab, "vocab: unknown mark '" + name + "'");
    return it->second;
  }

  std::size_t goal_id(const std::string& name) const {
    auto it = goal_ids_.find(name);
    if (it == goal_ids_.end()) throw Error(ErrorCode::kVocab, "vocab: unknown goal '" + name + "'");
    return it->second;
  }

  const std::string& mark_name(std::size_t id) const {
    static const std::string eos_name = kEosName;
    if (id == eos()) return eos_name;
    if (id > eos()) throw Error(ErrorCode::kVocab, "vocab: mark id " + std::to_string(id) + " out of range");
    return marks_[id];
  }

  const std::string& goal_name(std::size_t id) const {
    if (id >= goals_.size()) throw Error(ErrorCode::kVocab, "vocab: goal id " + std::to_string(id) + " out of range");
    return goals_[id];
  }

  /// Rebuilds C*_g from the given (training) sequences; EOS is never included.
  void set_goal_actions(const Corpus& train) {
    std::vector<std::set<std::size_t>> sets(goals_.size());
    for (const auto& seq : train)
      for (const auto& a : seq.actions)
        if (a.mark != eos()) sets.at(seq.goal).insert(a.mark);
    goal_actions_.assign(goals_.size(), {});
    for (std::size_t g = 0; g < sets.size(); ++g) goal_actions_[g].assign(sets[g].begin(), sets[g].end());
  }

  const std::vector<std::size_t>& goal_actions(std::size_t goal) const {
    if (goal >= goal_actions_.size() || goal_actions_[goal].empty()) {
      throw Error(ErrorCode::kVocab, "vocab: goal " + std::to_string(goal) + " has no training actions");
    }
    return goal_actions_[goal];
  }

  nlohmann::json to_json() const {
    return {{"format", "proactive.vocab"},
            {"version", kFormatVersion},
            {"marks", marks_},
            {"goals", goals_},
            {"goal_actions", goal_actions_}};
  }

  static Vocab from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "proactive.vocab" || j.value("version", 0) != kFormatVersion) {
      throw Error(ErrorCode::kParse, "vocab: not a version-1 proactive.vocab document");
    }
    Vocab v;
    for (const auto& m : j.at("marks")) v.intern_mark(m.get<std::string>());
    for (const auto& g : j.at("goals")) v.intern_goal(g.get<std::string>());
    v.goal_actions_ = j.at("goal_actions").get<std::vector<std::vector<std::size_t>>>();
    if (v.goal_actions_.size() != v.goals_.size()) throw Error(ErrorCode::kParse, "vocab: goal_actions size mismatch");
    return v;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.marks_ == b.marks_ && a.goals_ == b.goals_ && a.goal_actions_ == b.goal_actions_;
  }

 private:
  std::vector<std::string> marks_;
  std::vector<std::string> goals_;
  std::map<std::string, std::size_t> mark_ids_;
  std::map<std::string, std::size_t> goal_ids_;
  std::vector<std::vector<std::size_t>> goal_actions_;
};

/// Checks the per-sequence invariants; `where` prefixes error messages.
inline void validate(const Ctas& seq, const Vocab& vocab, const std::string& where = "") {
  const std::string prefix = where.empty() ? "" : where + ": ";
  if (seq.actions.empty()) throw Error(ErrorCode::kData, prefix + "sequence '" + seq.id + "' has no actions");
  if (seq.goal >= vocab.goal_count()) throw Error(ErrorCode::kData, prefix + "sequence '" + seq.id + "' goal out of range");
  for (std::size_t i = 0; i < seq.actions.size(); ++i) {
    const Action& a = seq.actions[i];
    if (a.mark > vocab.eos()) throw Error(ErrorCode::kData, prefix + "sequence '" + seq.id + "' mark out of range");
    if (!std::isfinite(a.time) || a.time < 0.0) {
      throw Error(ErrorCode::kData, prefix + "sequence '" + seq.id + "' action " + std::to_string(i) +
                                        " has invalid time");
    }
    if (i > 0 && !(seq.actions[i - 1].time < a.time)) {
      throw Error(ErrorCode::kData, prefix + "sequence '" + seq.id + "' times not strictly increasing at index " +
                                        std::to_string(i));
    }
  }
}

struct LoadedCorpus {
  Corpus sequences;
  Vocab vocab;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, std::size_t line,
                         const char* what) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what + " must be a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }) == allowed.end()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": unknown field '" + key + "' in " + what);
    }
  }
  for (const char* k : allowed) {
    if (!obj.contains(k)) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": missing field '" + k + "' in " + what);
    }
  }
}

// Parses one line into `seq`; `grow` decides whether new names are interned.
inline Ctas parse_line(const std::string& text, std::size_t line, Vocab& vocab, bool grow) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + e.what());
  }
  require_keys(j, {"id", "goal", "actions"}, line, "record");
  try {
    Ctas seq;
    seq.id = j.at("id").get<std::string>();
    const auto goal = j.at("goal").get<std::string>();
    seq.goal = grow ? vocab.intern_goal(goal) : vocab.goal_id(goal);
    if (!j.at("actions").is_array()) throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": actions must be an array");
    for (const auto& a : j.at("actions")) {
      require_keys(a, {"mark", "t"}, line, "action");
      const auto mark = a.at("mark").get<std::string>();
      if (mark == kEosName) throw Error(ErrorCode::kData, "line " + std::to_string(line) + ": reserved mark " + mark);
      seq.actions.push_back({grow ? vocab.intern_mark(mark) : vocab.mark_id(mark), a.at("t").get<double>()});
    }
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kVocab) throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what());
    throw;
  }
}

inline Corpus read_lines(std::istream& in, Vocab& vocab, bool grow) {
  Corpus corpus;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Ctas seq = parse_line(text, line, vocab, grow);
    validate(seq, vocab, "line " + std::to_string(line));
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

}  // namespace detail

/// Reads a JSONL corpus, assigning mark and goal ids by first appearance.
inline LoadedCorpus read_corpus(std::istream& in) {
  LoadedCorpus out;
  out.sequences = detail::read_lines(in, out.vocab, true);
  return out;
}

/// Reads a JSONL corpus against a fixed vocabulary; unseen names are errors.
inline Corpus read_corpus(std::istream& in, const Vocab& vocab) {
  Vocab copy = vocab;
  return detail::read_lines(in, copy, false);
}

inline LoadedCorpus load_corpus(const std::string& path) {
  auto in = detail::open_input(path);
  return read_corpus(in);
}

inline Corpus load_corpus(const std::string& path, const Vocab& vocab) {
  auto in = detail::open_input(path);
  return read_corpus(in, vocab);
}

/// Writes one JSON record per line. EOS actions are written only when
/// `keep_eos` is set, since raw corpus files never carry them.
inline void write_corpus(std::ostream& out, const Corpus& corpus, const Vocab& vocab, bool keep_eos = false) {
  for (const auto& seq : corpus) {
    nlohmann::ordered_json actions = nlohmann::ordered_json::array();
    for (const auto& a : seq.actions) {
      if (a.mark == vocab.eos() && !keep_eos) continue;
      actions.push_back({{"mark", vocab.mark_name(a.mark)}, {"t", a.time}});
    }
    nlohmann::ordered_json rec;
    rec["id"] = seq.id;
    rec["goal"] = vocab.goal_name(seq.goal);
    rec["actions"] = std::move(actions);
    out << rec.dump() << '\n';
  }
}

inline void save_corpus(const std::string& path, const Corpus& corpus, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  write_corpus(out, corpus, vocab);
}

/// Per-goal shuffled split: min(ceil(f * n_g), n_g - 1) sequences of each goal
/// go to train, the rest to test. Both sides keep the input's relative order.
inline std::pair<Corpus, Corpus> split_by_goal(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kContract, "split_by_goal: train_fraction must lie in (0, 1) so both sides are non-empty");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_goal;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_goal[corpus[i].goal].push_back(i);

  std::string singletons;
  for (const auto& [goal, members] : by_goal)
    if (members.size() < 2) singletons += (singletons.empty() ? "" : ",") + std::to_string(goal);
  if (!singletons.empty()) {
    throw Error(ErrorCode::kData, "split_by_goal: goals with fewer than 2 sequences: " + singletons);
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(corpus.size(), false);
  for (auto& [goal, members] : by_goal) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = members.size();
    auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = true;
  }
  std::pair<Corpus, Corpus> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) (in_train[i] ? out.first : out.second).push_back(corpus[i]);
  return out;
}

/// Returns a copy of `seq` with an EOS action `eos_gap` after the last action.
inline Ctas append_eos(const Ctas& seq, std::size_t eos_mark, double eos_gap) {
  if (!(eos_gap > 0.0)) throw Error(ErrorCode::kContract, "append_eos: eos_gap must be positive");
  if (seq.actions.empty()) throw Error(ErrorCode::kContract, "append_eos: sequence '" + seq.id + "' is empty");
  if (seq.actions.back().mark == eos_mark) {
    throw Error(ErrorCode::kContract, "append_eos: sequence '" + seq.id + "' already ends in EOS");
  }
  Ctas out = seq;
  out.actions.push_back({eos_mark, seq.actions.back().time + eos_gap});
  return out;
}

inline Corpus append_eos(const Corpus& corpus, std::size_t eos_mark, double eos_gap) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& seq : corpus) out.push_back(append_eos(seq, eos_mark, eos_gap));
  return out;
}

inline bool ends_in_eos(const Ctas& seq, std::size_t eos_mark) {
  return !seq.actions.empty() && seq.actions.back().mark == eos_mark;
}

/// Strips a trailing EOS action, if any.
inline Ctas without_eos(const Ctas& seq, std::size_t eos_mark) {
  Ctas out = seq;
  if (ends_in_eos(out, eos_mark)) out.actions.pop_back();
  return out;
}

/// Median of all consecutive start-time gaps between non-EOS actions.
inline double median_gap(const Corpus& corpus, std::size_t eos_mark) {
  std::vector<double> gaps;
  for (const auto& seq : corpus)
    for (std::size_t i = 1; i < seq.actions.size(); ++i)
      if (seq.actions[i].mark != eos_mark) gaps.push_back(seq.actions[i].time - seq.actions[i - 1].time);
  if (gaps.empty()) throw Error(ErrorCode::kData, "median_gap: corpus has no transitions");
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();
  return n % 2 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

/// Mark -> duration cluster. The EOS mark shares the cluster of the most
/// frequent training mark.
struct ClusterMap {
  static constexpr int kFormatVersion = 1;

  std::size_t clusters = 1;
  std::vector<std::size_t> assignment;  // indexed by mark id, EOS last
  std::vector<double> proxy;            // mean gap to the next action, per non-EOS mark
  std::vector<double> centers;          // ascending

  std::size_t cluster_of(std::size_t mark) const {
    if (mark >= assignment.size()) {
      throw Error(ErrorCode::kData, "cluster map: no cluster for mark " + std::to_string(mark));
    }
    return assignment[mark];
  }

  nlohmann::json to_json() const {
    return {{"format", "proactive.cluster_map"}, {"version", kFormatVersion}, {"clusters", clusters},
            {"assignment", assignment},          {"proxy", proxy},            {"centers", centers}};
  }

  static ClusterMap from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "proactive.cluster_map" || j.value("version", 0) != kFormatVersion) {
      throw Error(ErrorCode::kParse, "cluster map: not a version-1 proactive.cluster_map document");
    }
    ClusterMap m;
    m.clusters = j.at("clusters").get<std::size_t>();
    m.assignment = j.at("assignment").get<std::vector<std::size_t>>();
    m.proxy = j.at("proxy").get<std::vector<double>>();
    m.centers = j.at("centers").get<std::vector<double>>();
    return m;
  }

  friend bool operator==(const ClusterMap&, const ClusterMap&) = default;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<double> centers;
};

namespace detail {

inline KMeansResult lloyd_1d(const std::vector<double>& points, std::size_t k, std::mt19937_64& rng,
                             int iterations) {
  std::vector<double> centers;
  std::vector<bool> chosen(points.size(), false);
  {
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    const std::size_t first = pick(rng);
    centers.push_back(points[first]);
    chosen[first] = true;
  }
  while (centers.size() < k) {
    std::vector<double> d2(points.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (points[i] - c) * (points[i] - c));
      d2[i] = chosen[i] ? 0.0 : best;
      total += d2[i];
    }
    std::size_t next = 0;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> pick(d2.begin(), d2.end());
      next = pick(rng);
    } else {
      // Every remaining point coincides with a center; take the first unused one.
      while (chosen[next]) ++next;
    }
    chosen[next] = true;
    centers.push_back(points[next]);
  }

  std::vector<std::size_t> assignment(points.size(), 0);
  auto assign = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if (std::abs(points[i] - centers[c]) < std::abs(points[i] - centers[best])) best = c;
      changed = changed || best != assignment[i];
      assignment[i] = best;
    }
    return changed;
  };
  assign();
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> sums(k, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[assignment[i]] += points[i];
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c]) centers[c] = sums[c] / static_cast<double>(counts[c]);
    if (!assign()) break;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
  std::vector<std::size_t> relabel(k);
  KMeansResult out;
  for (std::size_t r = 0; r < k; ++r) {
    relabel[order[r]] = r;
    out.centers.push_back(centers[order[r]]);
  }
  for (std::size_t a : assignment) out.assignment.push_back(relabel[a]);
  return out;
}

inline double within_sse(const std::vector<double>& points, const KMeansResult& r) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = points[i] - r.centers[r.assignment[i]];
    sse += d * d;
  }
  return sse;
}

}  // namespace detail

/// Lloyd's algorithm on scalars with k-means++ seeding, restarted `restarts`
/// times from one seeded stream; the lowest within-cluster SSE wins (earliest
/// on ties). Clusters are relabelled by ascending center.
inline KMeansResult kmeans_1d(const std::vector<double>& points, std::size_t k, std::uint64_t seed,
                              int iterations = 100, int restarts = 10) {
  if (k == 0 || k > points.size()) {
    throw Error(ErrorCode::kContract, "kmeans_1d: need 1 <= k <= " + std::to_string(points.size()));
  }
  std::mt19937_64 rng(seed);
  KMeansResult best = detail::lloyd_1d(points, k, rng, iterations);
  double best_sse = detail::within_sse(points, best);
  for (int r = 1; r < restarts; ++r) {
    KMeansResult candidate = detail::lloyd_1d(points, k, rng, iterations);
    const double sse = detail::within_sse(points, candidate);
    if (sse < best_sse) {
      best_sse = sse;
      best = std::move(candidate);
    }
  }
  return best;
}

/// Groups marks into `clusters` duration clusters by the mean gap from each
/// occurrence to the next action's start (transitions into EOS are ignored).
inline ClusterMap build_clusters(const Corpus& train, const Vocab& vocab, std::size_t clusters, std::uint64_t seed) {
  const std::size_t marks = vocab.mark_count();
  if (clusters < 1 || clusters > marks) {
    throw Error(ErrorCode::kContract, "build_clusters: M=" + std::to_string(clusters) + " but only " +
                                          std::to_string(marks) + " distinct marks");
  }
  const std::size_t eos = vocab.eos();
  std::vector<double> sums(marks, 0.0);
  std::vector<std::size_t> counts(marks, 0), frequency(marks, 0);
  double global_sum = 0.0;
  std::size_t global_count = 0;
  for (const auto& seq : train) {
    for (std::size_t i = 0; i < seq.actions.size(); ++i) {
      const auto mark = seq.actions[i].mark;
      if (mark == eos) continue;
      ++frequency.at(mark);
      if (i + 1 < seq.actions.size() && seq.actions[i + 1].mark != eos) {
        const double gap = seq.actions[i + 1].time - seq.actions[i].time;
        sums[mark] += gap;
        ++counts[mark];
        global_sum += gap;
        ++global_count;
      }
    }
  }
  if (global_count == 0) throw Error(ErrorCode::kData, "build_clusters: training corpus has no transitions");
  const double global_mean = global_sum / static_cast<double>(global_count);

  ClusterMap map;
  map.clusters = clusters;
  map.proxy.resize(marks);
  for (std::size_t m = 0; m < marks; ++m) {
    if (counts[m]) {
      map.proxy[m] = sums[m] / static_cast<double>(counts[m]);
    } else {
      map.proxy[m] = global_mean;
      warn("build_clusters: mark '" + vocab.mark_name(m) + "' has no observed successor; using global mean gap");
    }
  }
  const KMeansResult km = kmeans_1d(map.proxy, clusters, seed);
  map.assignment = km.assignment;
  map.centers = km.centers;
  const auto most_frequent =
      static_cast<std::size_t>(std::max_element(frequency.begin(), frequency.end()) - frequency.begin());
  map.assignment.push_back(map.assignment[most_frequent]);
  return map;
}

/// Removes floor(fraction * n) uniformly chosen actions from each sequence,
/// never the first. Sequences left with fewer than two actions are dropped.
inline Corpus delete_random(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kContract, "delete_random: fraction must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  Corpus out;
  for (const auto& seq : corpus) {
    const std::size_t n = seq.actions.size();
    const auto remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    std::vector<std::size_t> candidates(n > 0 ? n - 1 : 0);
    std::iota(candidates.begin(), candidates.end(), 1);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<bool> drop(n, false);
    for (std::size_t k = 0; k < std::min(remove, candidates.size()); ++k) drop[candidates[k]] = true;
    Ctas kept{seq.id, seq.goal, {}};
    for (std::size_t i = 0; i < n; ++i)
      if (!drop[i]) kept.actions.push_back(seq.actions[i]);
    if (kept.actions.size() < 2) {
      warn("delete_random: dropping sequence '" + seq.id + "' (fewer than 2 actions remain)");
      continue;
    }
    out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace proactive::data

#endif  // PROACTIVE_DATA_HPP
