#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "proactive/data.hpp"

using namespace proactive;
using namespace proactive::data;

namespace {

LoadedCorpus parse(const std::string& text) {
  std::istringstream in(text);
  return read_corpus(in);
}

// Builds a corpus of `n` sequences per goal with `len` actions and marks drawn
// from a small per-goal alphabet.
LoadedCorpus make_corpus(std::size_t goals, std::size_t per_goal, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(0.1, 2.0);
  LoadedCorpus out;
  for (std::size_t g = 0; g < goals; ++g) {
    const auto goal = out.vocab.intern_goal("goal" + std::to_string(g));
    for (std::size_t s = 0; s < per_goal; ++s) {
      Ctas seq{"g" + std::to_string(g) + "s" + std::to_string(s), goal, {}};
      double t = 0.5;
      for (std::size_t i = 0; i < len; ++i) {
        seq.actions.push_back({out.vocab.intern_mark("m" + std::to_string((g * 3 + i) % 5)), t});
        t += gap(rng);
      }
      out.sequences.push_back(seq);
    }
  }
  return out;
}

Corpus doubled_marks(Vocab& vocab, const std::vector<std::pair<std::string, double>>& marks) {
  Corpus corpus;
  const auto goal = vocab.intern_goal("g");
  for (const auto& [name, gap] : marks) {
    const auto id = vocab.intern_mark(name);
    corpus.push_back({name, goal, {{id, 0.0}, {id, gap}}});
  }
  return corpus;
}

// Exhaustive search over all 2^n labelings into k = 2 non-empty groups.
std::vector<std::size_t> best_two_partition(const std::vector<double>& x) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_labels;
  const std::size_t n = x.size();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    double sse = 0.0;
    for (std::size_t side = 0; side < 2; ++side) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1) == side) sum += x[i], ++count;
      const double mean = sum / static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1) == side) sse += (x[i] - mean) * (x[i] - mean);
    }
    if (sse < best) {
      best = sse;
      best_labels.clear();
      for (std::size_t i = 0; i < n; ++i) best_labels.push_back((mask >> i) & 1);
    }
  }
  return best_labels;
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

bool is_subsequence(const Ctas& small, const Ctas& big) {
  std::size_t j = 0;
  for (const auto& a : big.actions)
    if (j < small.actions.size() && small.actions[j] == a) ++j;
  return j == small.actions.size();
}

}  // namespace

TEST(LoadCorpus, TwoValidLines) {
  const auto loaded = parse(
      R"({"id":"s1","goal":"coffee","actions":[{"mark":"cup","t":0.5},{"mark":"pour","t":1.5}]})"
      "\n"
      R"({"id":"s2","goal":"tea","actions":[{"mark":"cup","t":0.0},{"mark":"bag","t":2.0},{"mark":"stir","t":3}]})"
      "\n");
  ASSERT_EQ(loaded.sequences.size(), 2u);
  EXPECT_EQ(loaded.vocab.mark_count(), 4u);
  EXPECT_EQ(loaded.vocab.goal_count(), 2u);
  EXPECT_EQ(loaded.vocab.eos(), 4u);
  EXPECT_EQ(loaded.sequences[1].actions[1].mark, loaded.vocab.mark_id("bag"));
  EXPECT_EQ(loaded.vocab.mark_id("cup"), 0u);
}

TEST(LoadCorpus, EqualTimesRejectedAtLine) {
  try {
    parse(R"({"id":"ok","goal":"g","actions":[{"mark":"a","t":0.5}]})"
          "\n"
          R"({"id":"bad","goal":"g","actions":[{"mark":"a","t":1.0},{"mark":"b","t":1.0}]})");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_EQ(e.code(), ErrorCode::kData);
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bad"), std::string::npos) << msg;
    EXPECT_NE(msg.find("index 1"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, UnknownFieldIsParseErrorWithLine) {
  try {
    parse("\n" R"({"id":"x","goal":"g","extra":1,"actions":[{"mark":"a","t":0.5}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse(R"({"id":"x","goal":"g","actions":[{"mark":"a","t":0.5,"dur":2}]})"), Error);
  EXPECT_THROW(parse(R"({"id":"x","goal":"g","actions":[]})"), Error);
  EXPECT_THROW(parse(R"({"id":"x","goal":"g","actions":[{"mark":"<EOS>","t":0.5}]})"), Error);
  EXPECT_THROW(parse("not json"), Error);
}

TEST(LoadCorpus, WriteThenLoadRoundTrips) {
  const auto original = make_corpus(3, 4, 6, 1);
  std::ostringstream out;
  write_corpus(out, original.sequences, original.vocab);
  std::istringstream in(out.str());
  const auto back = read_corpus(in);
  EXPECT_EQ(back.sequences, original.sequences);
  EXPECT_EQ(back.vocab, original.vocab);
}

TEST(LoadCorpus, FixedVocabRejectsUnknownMark) {
  const auto loaded = parse(R"({"id":"a","goal":"g","actions":[{"mark":"x","t":0.5}]})");
  std::istringstream in(R"({"id":"b","goal":"g","actions":[{"mark":"y","t":0.5}]})");
  try {
    read_corpus(in, loaded.vocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVocab);
  }
}

TEST(Vocab, JsonRoundTrip) {
  auto loaded = make_corpus(2, 3, 4, 5);
  loaded.vocab.set_goal_actions(loaded.sequences);
  EXPECT_EQ(Vocab::from_json(nlohmann::json::parse(loaded.vocab.to_json().dump())), loaded.vocab);
  EXPECT_EQ(loaded.vocab.goal_actions(0).size(), 4u);
}

TEST(Split, TenSequencesOneGoal) {
  const auto c = make_corpus(1, 10, 3, 2);
  const auto [train, test] = split_by_goal(c.sequences, 0.8, 42);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
}

TEST(Split, FiveEachOfTwoGoals) {
  const auto c = make_corpus(2, 5, 3, 2);
  const auto [train, test] = split_by_goal(c.sequences, 0.8, 42);
  std::size_t train_g0 = 0, test_g0 = 0;
  for (const auto& s : train) train_g0 += s.goal == 0;
  for (const auto& s : test) test_g0 += s.goal == 0;
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(train_g0, 4u);
  EXPECT_EQ(test_g0, 1u);
}

TEST(Split, GuardsAndSingletons) {
  const auto c = make_corpus(2, 5, 3, 2);
  EXPECT_THROW(split_by_goal(c.sequences, 1.0, 1), Error);
  EXPECT_THROW(split_by_goal(c.sequences, 0.0, 1), Error);
  auto lonely = c.sequences;
  lonely.push_back({"solo", 2, {{0, 1.0}}});
  try {
    split_by_goal(lonely, 0.8, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Split, IsAPartitionWithBothSidesPerGoal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t per_goal = 2 + seed % 9;
    const auto c = make_corpus(3, per_goal, 2, seed);
    const auto [train, test] = split_by_goal(c.sequences, 0.8, seed);
    std::multiset<std::string> ids;
    for (const auto& s : train) ids.insert(s.id);
    for (const auto& s : test) ids.insert(s.id);
    std::multiset<std::string> all;
    for (const auto& s : c.sequences) all.insert(s.id);
    EXPECT_EQ(ids, all);
    for (std::size_t g = 0; g < 3; ++g) {
      std::size_t tr = 0, te = 0;
      for (const auto& s : train) tr += s.goal == g;
      for (const auto& s : test) te += s.goal == g;
      EXPECT_GE(te, 1u);
      EXPECT_GE(tr, 1u);
      EXPECT_LE(std::abs(static_cast<double>(tr) - 0.8 * per_goal), 1.0);
    }
  }
}

TEST(Split, SeedDeterministic) {
  const auto c = make_corpus(2, 9, 3, 2);
  EXPECT_EQ(split_by_goal(c.sequences, 0.8, 5), split_by_goal(c.sequences, 0.8, 5));
}

TEST(AppendEos, AppendsTerminalAction) {
  Ctas seq{"s", 0, {{0, 1.0}}};
  const Ctas out = append_eos(seq, 7, 1.0);
  ASSERT_EQ(out.actions.size(), 2u);
  EXPECT_EQ(out.actions[1], (Action{7, 2.0}));
  EXPECT_THROW(append_eos(out, 7, 1.0), Error);
  EXPECT_THROW(append_eos(Ctas{"e", 0, {}}, 7, 1.0), Error);
  EXPECT_THROW(append_eos(seq, 7, 0.0), Error);
}

TEST(AppendEos, EveryTrainingSequenceEndsInEos) {
  const auto c = make_corpus(2, 6, 5, 3);
  const auto eos = c.vocab.eos();
  for (const auto& s : append_eos(c.sequences, eos, median_gap(c.sequences, eos))) {
    EXPECT_TRUE(ends_in_eos(s, eos));
    EXPECT_NO_THROW(validate(s, c.vocab));
  }
}

TEST(Clusters, SingleClusterTakesEverything) {
  const auto c = make_corpus(2, 6, 5, 3);
  const auto map = build_clusters(c.sequences, c.vocab, 1, 0);
  for (auto r : map.assignment) EXPECT_EQ(r, 0u);
  EXPECT_EQ(map.assignment.size(), c.vocab.marks_with_eos());
}

TEST(Clusters, OneClusterPerDistinctMark) {
  Vocab vocab;
  const auto corpus = doubled_marks(vocab, {{"a", 1.0}, {"b", 3.0}, {"c", 7.0}, {"d", 2.0}});
  const auto map = build_clusters(corpus, vocab, 4, 9);
  std::set<std::size_t> used(map.assignment.begin(), map.assignment.begin() + 4);
  EXPECT_EQ(used.size(), 4u);
  // Ascending relabelling: a(1) < d(2) < b(3) < c(7).
  EXPECT_EQ(map.assignment[0], 0u);
  EXPECT_EQ(map.assignment[3], 1u);
  EXPECT_EQ(map.assignment[1], 2u);
  EXPECT_EQ(map.assignment[2], 3u);
}

TEST(Clusters, TwoClustersMatchExhaustivePartition) {
  Vocab vocab;
  const auto corpus = doubled_marks(vocab, {{"a", 1.0}, {"b", 1.1}, {"c", 9.0}, {"d", 9.2}});
  const auto oracle = best_two_partition({1.0, 1.1, 9.0, 9.2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto map = build_clusters(corpus, vocab, 2, seed);
    const std::vector<std::size_t> got(map.assignment.begin(), map.assignment.begin() + 4);
    EXPECT_TRUE(same_partition(got, oracle));
    EXPECT_EQ(got[0], 0u);
  }
}

TEST(Clusters, RandomProxiesMatchExhaustivePartition) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.1, 20.0);
  for (int trial = 0; trial < 30; ++trial) {
    Vocab vocab;
    std::vector<std::pair<std::string, double>> marks;
    std::vector<double> gaps;
    for (int i = 0; i < 6; ++i) {
      gaps.push_back(dist(rng));
      marks.push_back({"m" + std::to_string(i), gaps.back()});
    }
    const auto corpus = doubled_marks(vocab, marks);
    const auto map = build_clusters(corpus, vocab, 2, static_cast<std::uint64_t>(trial));
    const std::vector<std::size_t> got(map.assignment.begin(), map.assignment.begin() + 6);
    // In 1-D the optimal 2-partition is a threshold split, which Lloyd's reaches here.
    EXPECT_TRUE(same_partition(got, best_two_partition(gaps))) << "trial " << trial;
  }
}

TEST(Clusters, ErrorsAndFallbacks) {
  Vocab vocab;
  auto corpus = doubled_marks(vocab, {{"a", 1.0}, {"b", 5.0}});
  EXPECT_THROW(build_clusters(corpus, vocab, 3, 0), Error);
  EXPECT_THROW(build_clusters(corpus, vocab, 0, 0), Error);

  const auto lonely = vocab.intern_mark("z");
  corpus.push_back({"z", 0, {{lonely, 0.5}}});
  std::vector<std::string> warnings;
  auto old = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  const auto map = build_clusters(corpus, vocab, 2, 0);
  set_warning_sink(old);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(map.proxy[lonely], 3.0);
  // "a" and "b" both appear twice, "z" once: EOS follows the lowest-id most frequent mark.
  EXPECT_EQ(map.cluster_of(vocab.eos()), map.cluster_of(0));
  EXPECT_EQ(ClusterMap::from_json(nlohmann::json::parse(map.to_json().dump())), map);
}

TEST(Clusters, IgnoresTransitionsIntoEos) {
  Vocab vocab;
  const auto corpus = doubled_marks(vocab, {{"a", 1.0}, {"b", 5.0}});
  const auto with_eos = append_eos(corpus, vocab.eos(), 100.0);
  EXPECT_EQ(build_clusters(with_eos, vocab, 2, 0).proxy, build_clusters(corpus, vocab, 2, 0).proxy);
}

TEST(DeleteRandom, ZeroFractionIsIdentity) {
  const auto c = make_corpus(2, 5, 7, 4);
  EXPECT_EQ(delete_random(c.sequences, 0.0, 3), c.sequences);
}

TEST(DeleteRandom, FortyPercentOfTen) {
  const auto c = make_corpus(1, 20, 10, 4);
  for (const auto& s : delete_random(c.sequences, 0.4, 3)) {
    EXPECT_EQ(s.actions.size(), 6u);
    EXPECT_EQ(s.actions.front(), c.sequences.front().actions.front());
  }
  for (const auto& s : delete_random(c.sequences, 0.6, 3)) EXPECT_EQ(s.actions.size(), 4u);
}

TEST(DeleteRandom, OutputIsSubsequenceAndStaysValid) {
  const auto c = make_corpus(3, 10, 9, 8);
  for (double f : {0.2, 0.4, 0.6, 0.8}) {
    const auto out = delete_random(c.sequences, f, 11);
    for (const auto& s : out) {
      const auto it = std::find_if(c.sequences.begin(), c.sequences.end(), [&](const Ctas& o) { return o.id == s.id; });
      ASSERT_NE(it, c.sequences.end());
      EXPECT_TRUE(is_subsequence(s, *it));
      EXPECT_EQ(s.actions.front(), it->actions.front());
      EXPECT_NO_THROW(validate(s, c.vocab));
    }
  }
}

TEST(DeleteRandom, ShortResultsDroppedWithWarning) {
  Ctas seq{"short", 0, {{0, 0.5}, {1, 1.5}, {0, 2.5}}};
  std::size_t warnings = 0;
  auto old = set_warning_sink([&](const std::string&) { ++warnings; });
  const auto out = delete_random({seq}, 0.7, 1);
  set_warning_sink(old);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(warnings, 1u);
  EXPECT_THROW(delete_random({seq}, 1.0, 1), Error);
}
