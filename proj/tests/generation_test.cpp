#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <random>

#include "proactive/generation.hpp"
#include "proactive/probe.hpp"

namespace {

using namespace proactive;
using generation::GenRequest;
using generation::StopReason;

Model small_model(std::uint64_t seed = 3, std::size_t marks = 4) {
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.max_len = 12;
  cfg.clusters = 2;
  cfg.init_seed = seed;
  cfg.max_generation_length = 10;
  cfg.eos_gap = 0.5;
  return probe::random_model(cfg, marks, 2);
}

/// Goal head always answers `goal`; the mark head never picks EOS; every
/// predicted gap is exactly `gap`.
void pin(Model& m, std::size_t goal, double gap = 2.0) {
  m.params.value("goal.w").fill(0.0);
  m.params.value("goal.b").fill(0.0);
  m.params.value("goal.b")[goal] = 10.0;
  m.params.value("mark.w").fill(0.0);
  m.params.value("mark.b").fill(0.0);
  m.params.value("mark.b")[m.vocab.eos()] = -50.0;
  m.params.value("time.w_mu").fill(0.0);
  m.params.value("time.b_mu")[0] = std::log(gap);
}

GenRequest request(std::size_t goal, std::size_t mark = 1, double t = 3.0) {
  GenRequest r;
  r.goal = goal;
  r.first = {mark, t};
  return r;
}

TEST(Generate, GoalNeverMatchingStopsAtFirstAction) {
  Model m = small_model();
  pin(m, 1);
  const auto g = generation::generate(m, request(0));
  EXPECT_EQ(g.reason, StopReason::kGoalMismatch);
  ASSERT_EQ(g.sequence.actions.size(), 2u);
  EXPECT_EQ(g.length(), 1u);
  EXPECT_EQ(g.sequence.actions[0].mark, 1u);
  EXPECT_EQ(g.sequence.actions[1].mark, m.vocab.eos());
  EXPECT_DOUBLE_EQ(g.sequence.actions[1].time, 3.5);
}

TEST(Generate, MaxLenTwoYieldsTwoActions) {
  Model m = small_model();
  pin(m, 0);
  auto req = request(0);
  req.max_len = 2;
  const auto g = generation::generate(m, req);
  EXPECT_EQ(g.reason, StopReason::kMaxLen);
  EXPECT_EQ(g.length(), 2u);
  EXPECT_EQ(g.sequence.actions.back().mark, m.vocab.eos());
}

TEST(Generate, DefaultLimitComesFromModel) {
  Model m = small_model();
  pin(m, 0);
  const auto g = generation::generate(m, request(0));
  EXPECT_EQ(g.reason, StopReason::kMaxLen);
  EXPECT_EQ(g.length(), m.config.max_generation_length);
}

TEST(Generate, SampledEosEndsRollout) {
  Model m = small_model();
  pin(m, 0);
  m.params.value("mark.b")[m.vocab.eos()] = 50.0;
  const auto g = generation::generate(m, request(0));
  EXPECT_EQ(g.reason, StopReason::kEosSampled);
  EXPECT_EQ(g.length(), 1u);
  EXPECT_GT(g.sequence.actions[1].time, 3.0);
}

TEST(Generate, GreedyIsDeterministicAndUsesPointTimes) {
  Model m = small_model();
  pin(m, 0);
  m.params.value("mark.b")[2] = 1.0;
  auto req = request(0);
  req.greedy = true;
  req.max_len = 5;
  req.seed = 1;
  const auto a = generation::generate(m, req);
  req.seed = 999;
  const auto b = generation::generate(m, req);
  ASSERT_EQ(a.sequence.actions.size(), b.sequence.actions.size());
  for (std::size_t i = 0; i < a.sequence.actions.size(); ++i) {
    EXPECT_EQ(a.sequence.actions[i].mark, b.sequence.actions[i].mark);
    EXPECT_EQ(a.sequence.actions[i].time, b.sequence.actions[i].time);
  }
  for (std::size_t i = 1; i < a.length(); ++i) {
    EXPECT_EQ(a.sequence.actions[i].mark, 2u);
    EXPECT_NEAR(a.sequence.actions[i].time - a.sequence.actions[i - 1].time, 2.0, 1e-12);
  }
}

TEST(Generate, SameSeedSameSample) {
  Model m = small_model(8);
  auto req = request(0);
  req.seed = 77;
  const auto a = generation::generate(m, req);
  const auto b = generation::generate(m, req);
  ASSERT_EQ(a.sequence.actions.size(), b.sequence.actions.size());
  for (std::size_t i = 0; i < a.sequence.actions.size(); ++i) {
    EXPECT_EQ(a.sequence.actions[i].mark, b.sequence.actions[i].mark);
    EXPECT_EQ(a.sequence.actions[i].time, b.sequence.actions[i].time);
  }
}

TEST(Generate, RolloutInvariantsOverManyCalls) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (std::uint64_t model_seed = 0; model_seed < 10; ++model_seed) {
    Model m = small_model(model_seed, 5);
    for (std::size_t i = 0; i < m.params.size(); ++i)
      for (double& v : m.params.value(i).values()) v += jitter(rng);
    for (std::uint64_t call = 0; call < 100; ++call) {
      GenRequest req = request(call % 2, call % 5, 0.25 * static_cast<double>(call));
      req.seed = call;
      req.greedy = call % 7 == 0;
      const auto g = generation::generate(m, req);
      const auto& acts = g.sequence.actions;
      ASSERT_GE(acts.size(), 2u);
      EXPECT_LE(g.length(), m.config.max_generation_length);
      EXPECT_EQ(acts.back().mark, m.vocab.eos());
      for (std::size_t k = 0; k + 1 < acts.size(); ++k) EXPECT_LT(acts[k].mark, m.vocab.mark_count());
      for (std::size_t k = 1; k < acts.size(); ++k) EXPECT_GT(acts[k].time, acts[k - 1].time);
      if (g.reason == StopReason::kMaxLen) EXPECT_EQ(g.length(), m.config.max_generation_length);
    }
  }
}

TEST(Generate, RejectsBadRequests) {
  Model m = small_model();
  const auto code = [&](GenRequest req) -> std::optional<ErrorCode> {
    try {
      generation::generate(m, req);
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code(request(2)), ErrorCode::kVocab);
  EXPECT_EQ(code(request(0, m.vocab.eos())), ErrorCode::kVocab);
  auto req = request(0);
  req.max_len = 1;
  EXPECT_EQ(code(req), ErrorCode::kContract);
  req.max_len = 13;
  EXPECT_EQ(code(req), ErrorCode::kContract);
  EXPECT_EQ(code(request(0, 0, -1.0)), ErrorCode::kData);
}

TEST(Generate, ArgmaxPrefersLowestIndexOnTies) {
  const Tensor m = Tensor::matrix(2, 3, {1.0, 3.0, 3.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(generation::argmax_row(m, 0), 1u);
  EXPECT_EQ(generation::argmax_row(m, 1), 0u);
}

}  // namespace
