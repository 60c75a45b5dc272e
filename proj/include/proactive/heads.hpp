#ifndef PROACTIVE_HEADS_HPP
#define PROACTIVE_HEADS_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "proactive/encoder.hpp"
#include "proactive/error.hpp"
#include "proactive/numerics/ops.hpp"

namespace proactive::heads {

using numerics::ParamStore;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

inline constexpr double kVarianceFloor = 1e-4;

/// Lognormal parameters of the next inter-action time.
struct TimeDensity {
  double mu = 0.0;
  double var = 1.0;  // σ², strictly positive
};

inline double log_density(const TimeDensity& d, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kNumeric, "log_density: inter-action time must be positive");
  if (!(d.var > 0.0)) throw Error(ErrorCode::kNumeric, "log_density: variance must be positive");
  const double z = std::log(delta) - d.mu;
  return -std::log(delta) - 0.5 * std::log(2.0 * std::numbers::pi * d.var) - z * z / (2.0 * d.var);
}

template <typename Rng>
double sample_time(const TimeDensity& d, Rng& rng) {
  std::normal_distribution<double> eps(0.0, 1.0);
  return std::exp(d.mu + std::sqrt(d.var) * eps(rng));
}

/// The median, e^μ.
inline double point_time(const TimeDensity& d) { return std::exp(d.mu); }

inline void init_params(ParamStore& store, std::size_t dim, std::size_t marks, std::size_t goals, std::size_t clusters,
                        std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  store.add("mark.w", encoder::uniform_tensor({dim, marks}, bound, rng));
  store.add("mark.b", Tensor({marks}, 0.0));
  store.add("time.cluster", encoder::uniform_tensor({clusters, dim}, bound, rng));
  store.add("time.w_mu", encoder::uniform_tensor({dim, 1}, bound, rng));
  store.add("time.b_mu", Tensor({1}, 0.0));
  store.add("time.w_var", encoder::uniform_tensor({dim, 1}, bound, rng));
  store.add("time.b_var", Tensor({1}, 0.0));
  store.add("goal.w", encoder::uniform_tensor({dim, goals}, bound, rng));
  store.add("goal.b", Tensor({goals}, 0.0));
}

/// s + α·x, or s itself for the base variant (x == nullptr).
inline Var fuse(const Var& s, const Var* x, double alpha) {
  if (!x) return s;
  return s + numerics::scale(*x, alpha);
}

/// Row k: log P(c_{k+1} = c | s_k) over all marks including EOS.
inline Var mark_log_probs(const Var& h) {
  Tape& tape = h.tape();
  return numerics::log_softmax_rows(numerics::add_bias(numerics::matmul(h, tape.param("mark.w")), tape.param("mark.b")));
}

/// Row k: log p_k(g | s_k).
inline Var goal_log_probs(const Var& h) {
  Tape& tape = h.tape();
  const Var phi = numerics::relu(numerics::add_bias(numerics::matmul(h, tape.param("goal.w")), tape.param("goal.b")));
  return numerics::log_softmax_rows(phi);
}

/// Column vectors (n×1) of μ_k and σ²_k; `clusters[k]` is the cluster of the
/// mark at position k.
struct TimeParams {
  Var mu;
  Var var;
};

inline TimeParams time_params(const Var& h, const std::vector<std::size_t>& clusters) {
  using namespace numerics;
  Tape& tape = h.tape();
  if (clusters.size() != h.value().rows()) {
    throw Error(ErrorCode::kDimension, "time_params: one cluster per position required");
  }
  const Var table = tape.param("time.cluster");
  for (std::size_t r : clusters)
    if (r >= table.value().rows()) throw Error(ErrorCode::kData, "time_params: unknown cluster " + std::to_string(r));
  const Var gated = h * gather_rows(table, clusters);
  const Var mu = add_bias(matmul(gated, tape.param("time.w_mu")), tape.param("time.b_mu"));
  const Var raw = add_bias(matmul(gated, tape.param("time.w_var")), tape.param("time.b_var"));
  return {mu, add_scalar(softplus(raw), kVarianceFloor)};
}

inline TimeDensity density_at(const TimeParams& p, std::size_t k) { return {p.mu.value()[k], p.var.value()[k]}; }

/// Differentiable per-position lognormal log-density at fixed gaps.
inline Var log_density(const TimeParams& p, const std::vector<double>& deltas) {
  using namespace numerics;
  Tape& tape = p.mu.tape();
  const std::size_t n = deltas.size();
  if (p.mu.value().size() != n) throw Error(ErrorCode::kDimension, "log_density: one gap per position required");
  Tensor log_delta({n, 1}, 0.0), offset({n, 1}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(deltas[i] > 0.0)) {
      throw Error(ErrorCode::kNumeric, "log_density: inter-action time must be positive (position " + std::to_string(i) + ")");
    }
    log_delta[i] = std::log(deltas[i]);
    offset[i] = -log_delta[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  const Var z = tape.constant(std::move(log_delta)) - p.mu;
  const Var quad = div(z * z, scale(p.var, 2.0));
  return tape.constant(std::move(offset)) - scale(log(p.var), 0.5) - quad;
}

}  // namespace proactive::heads

#endif  // PROACTIVE_HEADS_HPP
