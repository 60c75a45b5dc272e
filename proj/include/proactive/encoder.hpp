#ifndef PROACTIVE_ENCODER_HPP
#define PROACTIVE_ENCODER_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/error.hpp"
#include "proactive/numerics/ops.hpp"
#include "proactive/numerics/param_store.hpp"
#include "proactive/numerics/tape.hpp"

namespace proactive::encoder {

using numerics::ParamStore;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

inline std::string block_name(std::size_t b, const char* leaf) { return "block" + std::to_string(b) + "." + leaf; }

inline Tensor uniform_tensor(numerics::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor normal_tensor(numerics::Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.values()) v = n(rng);
  return t;
}

/// Registers embedding, positional and attention-block parameters, plus the
/// set-embedding network when `with_set` is true.
inline void init_params(ParamStore& store, const EncoderConfig& cfg, std::size_t marks, bool with_set,
                        std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  store.add("embed.mark", uniform_tensor({marks, d}, bound, rng));
  store.add("embed.w_time", uniform_tensor({d}, bound, rng));
  store.add("embed.w_delta", uniform_tensor({d}, bound, rng));
  store.add("embed.bias", Tensor({d}, 0.0));
  store.add("embed.position", normal_tensor({cfg.max_len, d}, 0.02, rng));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) store.add(block_name(b, w), uniform_tensor({d, d}, bound, rng));
    store.add(block_name(b, "ln1.gain"), Tensor({d}, 1.0));
    store.add(block_name(b, "ln1.bias"), Tensor({d}, 0.0));
    store.add(block_name(b, "ffn.w1"), uniform_tensor({d, 4 * d}, bound, rng));
    store.add(block_name(b, "ffn.b1"), Tensor({4 * d}, 0.0));
    store.add(block_name(b, "ffn.w2"), uniform_tensor({4 * d, d}, bound, rng));
    store.add(block_name(b, "ffn.b2"), Tensor({d}, 0.0));
    store.add(block_name(b, "ln2.gain"), Tensor({d}, 1.0));
    store.add(block_name(b, "ln2.bias"), Tensor({d}, 0.0));
  }
  if (with_set) {
    store.add("set.w_x", uniform_tensor({d, d}, bound, rng));
    store.add("set.b_x", Tensor({d}, 0.0));
    store.add("set.omega.w1", uniform_tensor({d, d}, bound, rng));
    store.add("set.omega.b1", Tensor({d}, 0.0));
    store.add("set.omega.w2", uniform_tensor({d, d}, bound, rng));
    store.add("set.omega.b2", Tensor({d}, 0.0));
  }
}

/// Rows y_i = E[c_i] + w_t t_i + w_Δ Δ_i + b_y, with times divided by
/// `time_scale` and Δ_1 measured from t = 0.
inline Var embed_actions(Tape& tape, const std::vector<data::Action>& actions, double time_scale) {
  if (actions.empty()) throw Error(ErrorCode::kContract, "embed_actions: empty prefix");
  const std::size_t n = actions.size();
  const Var table = tape.param("embed.mark");
  const std::size_t marks = table.value().rows();
  std::vector<std::size_t> ids(n);
  Tensor times({n, 1}, 0.0), deltas({n, 1}, 0.0);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i].mark >= marks) {
      throw Error(ErrorCode::kVocab, "embed_actions: mark id " + std::to_string(actions[i].mark) + " not in vocabulary");
    }
    const double delta = actions[i].time - prev;
    if (!(delta >= 0.0)) throw Error(ErrorCode::kData, "embed_actions: negative inter-action time at index " + std::to_string(i));
    ids[i] = actions[i].mark;
    times[i] = actions[i].time / time_scale;
    deltas[i] = delta / time_scale;
    prev = actions[i].time;
  }
  const std::size_t d = table.value().cols();
  Var y = numerics::gather_rows(table, ids);
  y = y + numerics::matmul(tape.constant(std::move(times)), numerics::reshape(tape.param("embed.w_time"), {1, d}));
  y = y + numerics::matmul(tape.constant(std::move(deltas)), numerics::reshape(tape.param("embed.w_delta"), {1, d}));
  return numerics::add_bias(y, tape.param("embed.bias"));
}

/// Adds rows 0..n-1 of the positional table.
inline Var positional_add(const Var& y) {
  const Var table = y.tape().param("embed.position");
  const std::size_t n = y.value().rows();
  if (n > table.value().rows()) {
    throw Error(ErrorCode::kContract, "positional_add: sequence length " + std::to_string(n) + " exceeds max_len " +
                                          std::to_string(table.value().rows()));
  }
  return y + numerics::slice_rows(table, 0, n);
}

/// n×n matrix with ones on and below the diagonal; left-multiplying sums rows
/// over i ≤ k.
inline Tensor lower_ones(std::size_t n) {
  Tensor t({n, n}, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c <= r; ++c) t.at(r, c) = 1.0;
  return t;
}

inline std::vector<std::uint8_t> future_mask(std::size_t n) {
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) mask[r * n + c] = 1;
  return mask;
}

inline Var norm_affine(const Var& h, std::size_t b, const char* gain, const char* bias) {
  Tape& tape = h.tape();
  return numerics::add_bias(numerics::scale_columns(numerics::layer_norm_rows(h), tape.param(block_name(b, gain))),
                            tape.param(block_name(b, bias)));
}

/// One pass over all positions; row j of the result is s_j. When `attention`
/// is given, the softmax weights of every (block, head) are appended to it.
inline Var encode(const Var& input, const EncoderConfig& cfg, std::vector<Tensor>* attention = nullptr) {
  using namespace numerics;
  Tape& tape = input.tape();
  const std::size_t n = input.value().rows();
  if (n == 0 || input.value().rank() != 2) throw Error(ErrorCode::kContract, "encode: empty prefix");
  const std::size_t d = cfg.dim;
  if (input.value().cols() != d) {
    throw Error(ErrorCode::kDimension, "encode: expected width " + std::to_string(d) + ", got " + shape_string(input.shape()));
  }
  const std::size_t dh = d / cfg.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto mask = future_mask(n);
  const Var prefix_sum = tape.constant(lower_ones(n));

  Var h = input;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const Var q = matmul(h, tape.param(block_name(b, "wq")));
    const Var k = matmul(h, tape.param(block_name(b, "wk")));
    const Var v = matmul(h, tape.param(block_name(b, "wv")));
    std::vector<Var> heads;
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      const Var qh = slice_cols(q, hd * dh, (hd + 1) * dh);
      const Var kh = slice_cols(k, hd * dh, (hd + 1) * dh);
      const Var vh = slice_cols(v, hd * dh, (hd + 1) * dh);
      const Var scores = masked_fill(scale(matmul(qh, transpose(kh)), inv_sqrt), mask, -1e30);
      const Var weights = softmax_rows(scores);
      if (attention) attention->push_back(weights.value());
      heads.push_back(matmul(weights, vh));
    }
    const Var mixed = matmul(cfg.heads == 1 ? heads.front() : concat_cols(heads), tape.param(block_name(b, "wo")));
    h = norm_affine(h + mixed, b, "ln1.gain", "ln1.bias");

    Var ff = relu(add_bias(matmul(h, tape.param(block_name(b, "ffn.w1"))), tape.param(block_name(b, "ffn.b1"))));
    ff = add_bias(matmul(ff, tape.param(block_name(b, "ffn.w2"))), tape.param(block_name(b, "ffn.b2")));
    if (cfg.feed_forward == FeedForwardMode::kPrefixSum) ff = matmul(prefix_sum, ff);
    h = norm_affine(h + ff, b, "ln2.gain", "ln2.bias");
  }
  return h;
}

/// Row k is x_k = Σ_{i≤k} ReLU(Ω(w_x y_i + b_x)), taken over the un-positioned
/// action embeddings.
inline Var set_embed(const Var& y) {
  using namespace numerics;
  Tape& tape = y.tape();
  const std::size_t n = y.value().rows();
  if (n == 0) throw Error(ErrorCode::kContract, "set_embed: empty prefix");
  Var u = add_bias(matmul(y, tape.param("set.w_x")), tape.param("set.b_x"));
  u = relu(add_bias(matmul(u, tape.param("set.omega.w1")), tape.param("set.omega.b1")));
  u = add_bias(matmul(u, tape.param("set.omega.w2")), tape.param("set.omega.b2"));
  return matmul(tape.constant(lower_ones(n)), relu(u));
}

}  // namespace proactive::encoder

#endif  // PROACTIVE_ENCODER_HPP
