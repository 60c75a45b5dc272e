#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "proactive/encoder.hpp"
#include "proactive/probe.hpp"

namespace {

using namespace proactive;
using numerics::Tape;
using numerics::Tensor;

ModelConfig small_config(std::size_t blocks = 2, Variant variant = Variant::kBase) {
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.blocks = blocks;
  cfg.encoder.max_len = 12;
  cfg.clusters = 2;
  cfg.variant = variant;
  cfg.init_seed = 7;
  return cfg;
}

Tensor states(const Model& m, const std::vector<data::Action>& actions) {
  Tape tape(&m.params, false);
  const auto y = encoder::embed_actions(tape, actions, m.config.time_scale);
  return encoder::encode(encoder::positional_add(y), m.config.encoder).value();
}

Tensor set_states(const Model& m, const std::vector<data::Action>& actions) {
  Tape tape(&m.params, false);
  return encoder::set_embed(encoder::embed_actions(tape, actions, m.config.time_scale)).value();
}

TEST(Embed, ZeroWeightsGiveBias) {
  Model m = probe::random_model(small_config(), 4, 2);
  for (const char* name : {"embed.mark", "embed.w_time", "embed.w_delta"}) m.params.value(name).fill(0.0);
  auto& bias = m.params.value("embed.bias");
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 0.1 * static_cast<double>(i);
  Tape tape(&m.params);
  const auto y = encoder::embed_actions(tape, {{1, 0.5}, {2, 1.7}}, 1.0).value();
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(y.at(r, c), bias[c]);
}

TEST(Embed, MatchesIndexLoopOracle) {
  ModelConfig cfg = small_config();
  cfg.encoder.dim = 2;
  cfg.encoder.heads = 1;
  Model m = probe::random_model(cfg, 3, 1);
  const double scale = 2.0;
  const std::vector<data::Action> actions{{2, 0.4}, {0, 1.0}, {2, 3.5}};
  Tape tape(&m.params);
  const auto y = encoder::embed_actions(tape, actions, scale).value();
  const auto& table = m.params.value("embed.mark");
  const auto& wt = m.params.value("embed.w_time");
  const auto& wd = m.params.value("embed.w_delta");
  const auto& b = m.params.value("embed.bias");
  double prev = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double expect = table.at(actions[i].mark, c) + wt[c] * actions[i].time / scale +
                            wd[c] * (actions[i].time - prev) / scale + b[c];
      EXPECT_NEAR(y.at(i, c), expect, 1e-15);
    }
    prev = actions[i].time;
  }
}

TEST(Embed, TimeTermDistinguishesSameMark) {
  Model m = probe::random_model(small_config(), 4, 2);
  Tape tape(&m.params);
  const auto y = encoder::embed_actions(tape, {{1, 0.5}, {1, 2.0}}, 1.0).value();
  bool differ = false;
  for (std::size_t c = 0; c < 8; ++c) differ = differ || y.at(0, c) != y.at(1, c);
  EXPECT_TRUE(differ);
}

TEST(Embed, UnknownMarkIsVocabError) {
  Model m = probe::random_model(small_config(), 4, 2);
  Tape tape(&m.params);
  try {
    encoder::embed_actions(tape, {{99, 0.5}}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVocab);
  }
}

TEST(Positional, ZeroTableIsIdentityAndRowsDiffer) {
  Model m = probe::random_model(small_config(), 4, 2);
  Tape tape(&m.params);
  const auto y = tape.constant(Tensor({2, 8}, 0.3));
  const auto out = encoder::positional_add(y).value();
  const auto& p = m.params.value("embed.position");
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out.at(1, c) - out.at(0, c), p.at(1, c) - p.at(0, c), 1e-15);
  m.params.value("embed.position").fill(0.0);
  Tape tape2(&m.params);
  const auto same = encoder::positional_add(tape2.constant(Tensor({2, 8}, 0.3))).value();
  EXPECT_EQ(same, Tensor({2, 8}, 0.3));
}

TEST(Positional, CapacityError) {
  Model m = probe::random_model(small_config(), 4, 2);
  Tape tape(&m.params);
  EXPECT_THROW(encoder::positional_add(tape.constant(Tensor({13, 8}, 0.0))), Error);
}

TEST(Positional, GradientOnlyOnOccupiedRows) {
  Model m = probe::random_model(small_config(1), 4, 2);
  const std::vector<data::Action> actions{{0, 0.2}, {1, 1.1}, {3, 2.5}};
  const auto objective = [&](Tape& tape, const numerics::ParamStore&) {
    const auto y = encoder::embed_actions(tape, actions, 1.0);
    const auto s = encoder::encode(encoder::positional_add(y), m.config.encoder);
    return numerics::sum(s * s * s);
  };
  Tape tape(&m.params);
  numerics::Gradients g(m.params);
  tape.backward(objective(tape, m.params), g);
  const auto& gp = g[m.params.index_of("embed.position")];
  for (std::size_t r = 0; r < 12; ++r) {
    double mag = 0.0;
    for (std::size_t c = 0; c < 8; ++c) mag += std::abs(gp.at(r, c));
    if (r < 3) EXPECT_GT(mag, 0.0) << r;
    else EXPECT_EQ(mag, 0.0) << r;
  }
  // finite-difference oracle on the positional table only
  const auto report = numerics::finite_difference_check(objective, m.params);
  EXPECT_LT(report.max_rel_error, 1e-6) << report.worst_param;
}

TEST(Encode, SingleActionAttendsToItself) {
  Model m = probe::random_model(small_config(), 4, 2);
  Tape tape(&m.params);
  std::vector<Tensor> attention;
  const auto s = encoder::encode(encoder::positional_add(encoder::embed_actions(tape, {{2, 0.3}}, 1.0)), m.config.encoder,
                                 &attention);
  ASSERT_EQ(attention.size(), 4u);
  for (const auto& w : attention) EXPECT_EQ(w, Tensor({1, 1}, 1.0));
  EXPECT_EQ(s.shape(), (numerics::Shape{1, 8}));
}

TEST(Encode, IdenticalKeysGiveUniformWeights) {
  Model m = probe::random_model(small_config(1), 4, 2);
  m.params.value("block0.wk").fill(0.0);
  Tape tape(&m.params);
  std::vector<Tensor> attention;
  encoder::encode(encoder::positional_add(encoder::embed_actions(tape, {{0, 0.3}, {1, 1.0}, {2, 2.0}}, 1.0)),
                  m.config.encoder, &attention);
  for (const auto& w : attention)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(w.at(2, c), 1.0 / 3.0);
}

TEST(Encode, AttentionWeightsMatchExplicitLoopOracle) {
  Model m = probe::random_model(small_config(1), 4, 2);
  const std::vector<data::Action> actions{{0, 0.3}, {3, 1.0}, {1, 2.4}};
  Tape tape(&m.params);
  const auto input = encoder::positional_add(encoder::embed_actions(tape, actions, 1.0));
  std::vector<Tensor> attention;
  encoder::encode(input, m.config.encoder, &attention);
  const auto& h = input.value();
  const auto& wq = m.params.value("block0.wq");
  const auto& wk = m.params.value("block0.wk");
  const std::size_t d = 8, dh = 4, n = 3;
  for (std::size_t head = 0; head < 2; ++head) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> scores;
      for (std::size_t j = 0; j <= i; ++j) {
        double dot = 0.0;
        for (std::size_t a = head * dh; a < (head + 1) * dh; ++a) {
          double q = 0.0, k = 0.0;
          for (std::size_t b = 0; b < d; ++b) {
            q += h.at(i, b) * wq.at(b, a);
            k += h.at(j, b) * wk.at(b, a);
          }
          dot += q * k;
        }
        scores.push_back(dot / std::sqrt(static_cast<double>(dh)));
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double s : scores) z += std::exp(s - mx);
      for (std::size_t j = 0; j < n; ++j) {
        const double expect = j <= i ? std::exp(scores[j] - mx) / z : 0.0;
        EXPECT_NEAR(attention[head].at(i, j), expect, 1e-12);
      }
    }
  }
}

TEST(Encode, ShapeAndEmptyPrefix) {
  Model m = probe::random_model(small_config(), 4, 2);
  for (std::size_t k = 1; k <= 5; ++k) {
    std::vector<data::Action> actions;
    for (std::size_t i = 0; i < k; ++i) actions.push_back({i % 4, 0.5 + static_cast<double>(i)});
    EXPECT_EQ(states(m, actions).shape(), (numerics::Shape{k, 8}));
  }
  Tape tape(&m.params);
  EXPECT_THROW(encoder::embed_actions(tape, {}, 1.0), Error);
}

TEST(Encode, CausalityHoldsExactly) {
  for (auto mode : {FeedForwardMode::kPrefixSum, FeedForwardMode::kPositionWise}) {
    ModelConfig cfg = small_config();
    cfg.encoder.feed_forward = mode;
    Model m = probe::random_model(cfg, 5, 2);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const auto seq = probe::random_sequence(m, 6, rng);
      const auto base = states(m, seq.actions);
      auto changed = seq.actions;
      changed[4].mark = (changed[4].mark + 1) % 5;
      changed[5].time += 0.7;
      const auto alt = states(m, changed);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 8; ++c) ASSERT_EQ(base.at(r, c), alt.at(r, c));
    }
  }
}

TEST(LayerNorm, NormalisedRowsBeforeAffine) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(3.0, 10.0);
  Tape tape;
  Tensor t({6, 16}, 0.0);
  for (double& v : t.values()) v = n(rng);
  const auto out = numerics::layer_norm_rows(tape.constant(t)).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mean += out.at(r, c) / 16.0;
    for (std::size_t c = 0; c < 16; ++c) var += (out.at(r, c) - mean) * (out.at(r, c) - mean) / 16.0;
    EXPECT_LT(std::abs(mean), 1e-10);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(SetEmbed, PermutationInvariant) {
  Model m = probe::random_model(small_config(2, Variant::kPlus), 5, 2);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = probe::random_sequence(m, 5, rng);
    // Embeddings are computed per action from (mark, t, Δ), so permute rows of y
    Tape tape(&m.params);
    const auto y = encoder::embed_actions(tape, seq.actions, 1.0);
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto x = encoder::set_embed(y).value();
    const auto xp = encoder::set_embed(numerics::gather_rows(y, perm)).value();
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(x.at(4, c), xp.at(4, c), 1e-9);
  }
}

TEST(SetEmbed, IncrementalSum) {
  Model m = probe::random_model(small_config(2, Variant::kPlus), 5, 2);
  const std::vector<data::Action> actions{{0, 0.2}, {3, 1.0}, {1, 1.9}};
  const auto x = set_states(m, actions);
  // contribution of action 3 alone, computed from its embedding row
  Tape tape(&m.params);
  const auto y = encoder::embed_actions(tape, actions, 1.0);
  const auto own = encoder::set_embed(numerics::slice_rows(y, 2, 3)).value();
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_NEAR(x.at(2, c), x.at(1, c) + own.at(0, c), 1e-12);
    EXPECT_GE(own.at(0, c), 0.0);
  }
  const auto first = encoder::set_embed(numerics::slice_rows(y, 0, 1)).value();
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(x.at(0, c), first.at(0, c));
}

}  // namespace
