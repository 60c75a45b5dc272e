#ifndef PROACTIVE_NUMERICS_OPS_HPP
#define PROACTIVE_NUMERICS_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "proactive/error.hpp"
#include "proactive/numerics/tape.hpp"
#include "proactive/numerics/tensor.hpp"

// Differentiable primitives. Every op validates shapes up front, computes its
// output eagerly and registers a closure that maps the output gradient onto
// its inputs. Broadcasting is limited to row-wise bias/gain over the leading
// axis; everything else requires exact shape agreement.

namespace proactive::numerics {

namespace detail {

[[noreturn]] inline void dimension_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kDimension,
              std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

inline Tape& same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error(ErrorCode::kContract, std::string(op) + ": operands on different tapes");
  return a.tape();
}

inline void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw Error(ErrorCode::kDimension, std::string(op) + ": expected rank " + std::to_string(rank) +
                                           ", got shape " + shape_string(a.shape()));
  }
}

inline void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) dimension_error(op, a.shape(), b.shape());
}

inline void add_into(Tensor* slot, const Tensor& g) {
  if (slot) *slot += g;
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("matmul", a, b);
  detail::require_rank("matmul", a, 2);
  detail::require_rank("matmul", b, 2);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) detail::dimension_error("matmul", av.shape(), bv.shape());
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("matmul", std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia)) {
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += acc;
        }
    }
    if (Tensor* gb = t.grad_slot(ib)) {
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = av[i * k + p];
          if (x == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += x * g[i * n + j];
        }
    }
  });
}

inline Var add(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("add", a, b);
  detail::require_same_shape("add", a, b);
  Tensor out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    detail::add_into(t.grad_slot(ia), t.grad(self));
    detail::add_into(t.grad_slot(ib), t.grad(self));
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("sub", a, b);
  detail::require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    detail::add_into(t.grad_slot(ia), g);
    if (Tensor* gb = t.grad_slot(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

/// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("mul", a, b);
  detail::require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    if (Tensor* gb = t.grad_slot(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
  });
}

/// Elementwise quotient.
inline Var div(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("div", a, b);
  detail::require_same_shape("div", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (b.value()[i] == 0.0) throw Error(ErrorCode::kNumeric, "div: division by zero");
    out[i] /= b.value()[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("div", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
    if (Tensor* gb = t.grad_slot(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * av[i] / (bv[i] * bv[i]);
  });
}

inline Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += factor * g[i];
  });
}

inline Var add_scalar(const Var& a, double shift) {
  Tensor out = a.value();
  for (double& v : out.values()) v += shift;
  const std::size_t ia = a.id();
  return a.tape().record("add_scalar", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    detail::add_into(t.grad_slot(ia), t.grad(self));
  });
}

/// a[m x n] + b[n] applied to every row (also accepts a rank-1 `a` of length n).
inline Var add_bias(const Var& a, const Var& b) {
  Tape& tape = detail::same_tape("add_bias", a, b);
  detail::require_rank("add_bias", b, 1);
  const std::size_t n = b.value().size();
  if (a.value().rank() == 0 || a.value().cols() != n) detail::dimension_error("add_bias", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i % n];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("add_bias", std::move(out), {ia, ib}, [ia, ib, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    detail::add_into(t.grad_slot(ia), g);
    if (Tensor* gb = t.grad_slot(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % n] += g[i];
  });
}

/// a[m x n] * gain[n] applied to every row.
inline Var scale_columns(const Var& a, const Var& gain) {
  Tape& tape = detail::same_tape("scale_columns", a, gain);
  detail::require_rank("scale_columns", gain, 1);
  const std::size_t n = gain.value().size();
  if (a.value().rank() == 0 || a.value().cols() != n)
    detail::dimension_error("scale_columns", a.shape(), gain.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= gain.value()[i % n];
  const std::size_t ia = a.id(), ig = gain.id();
  return tape.record("scale_columns", std::move(out), {ia, ig}, [ia, ig, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia)) {
      const Tensor& gv = t.value(ig);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * gv[i % n];
    }
    if (Tensor* gg = t.grad_slot(ig)) {
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*gg)[i % n] += g[i] * av[i];
    }
  });
}

inline Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id();
  return a.tape().record("relu", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (av[i] > 0.0) (*ga)[i] += g[i];
  });
}

/// log(1 + e^x), evaluated without overflow.
inline Var softplus(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  const std::size_t ia = a.id();
  return a.tape().record("softplus", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = av[i];
        const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        (*ga)[i] += g[i] * sig;
      }
  });
}

inline Var exp(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::exp(v);
  const std::size_t ia = a.id();
  return a.tape().record("exp", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& out = t.value(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * out[i];
  });
}

/// Natural log; non-positive inputs are a domain error rather than -inf/NaN.
inline Var log(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    if (!(v > 0.0)) throw Error(ErrorCode::kNumeric, "log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  const std::size_t ia = a.id();
  return a.tape().record("log", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / av[i];
  });
}

/// Softmax over the last axis with max subtraction.
inline Var softmax_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), n = av.cols();
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &out[r * n];
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  const std::size_t ia = a.id();
  return a.tape().record("softmax_rows", std::move(out), {ia}, [ia, rows, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j) (*ga)[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
      }
  });
}

/// log(softmax) over the last axis via log-sum-exp.
inline Var log_softmax_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), n = av.cols();
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &out[r * n];
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) row[j] -= lse;
  }
  const std::size_t ia = a.id();
  return a.tape().record("log_softmax_rows", std::move(out), {ia}, [ia, rows, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) gsum += g[r * n + j];
        for (std::size_t j = 0; j < n; ++j) (*ga)[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gsum;
      }
  });
}

inline Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    if (Tensor* ga = t.grad_slot(ia))
      for (double& v : ga->values()) v += g;
  });
}

inline Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw Error(ErrorCode::kDimension, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

/// Concatenates rank-2 tensors along columns (rows must agree).
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kContract, "concat_cols: no inputs");
  Tape& tape = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::same_tape("concat_cols", parts.front(), p);
    detail::require_rank("concat_cols", p, 2);
    if (p.value().rows() != rows) detail::dimension_error("concat_cols", parts.front().shape(), p.shape());
    widths.push_back(p.value().cols());
    ids.push_back(p.id());
    total += p.value().cols();
  }
  Tensor out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * total + offset + c] = pv[r * widths[k] + c];
    offset += widths[k];
  }
  return tape.record("concat_cols", std::move(out), ids, [ids, widths, rows, total](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (Tensor* gp = t.grad_slot(ids[k]))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) (*gp)[r * widths[k] + c] += g[r * total + offset + c];
      offset += widths[k];
    }
  });
}

/// Replaces entries where mask is nonzero with `fill`; those entries get no gradient.
inline Var masked_fill(const Var& a, const std::vector<std::uint8_t>& mask, double fill) {
  if (mask.size() != a.value().size()) {
    throw Error(ErrorCode::kDimension, "masked_fill: mask of " + std::to_string(mask.size()) +
                                           " entries for shape " + shape_string(a.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = fill;
  const std::size_t ia = a.id();
  return a.tape().record("masked_fill", std::move(out), {ia}, [ia, mask](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!mask[i]) (*ga)[i] += g[i];
  });
}

inline Var transpose(const Var& a) {
  detail::require_rank("transpose", a, 2);
  const std::size_t m = a.value().shape()[0], n = a.value().shape()[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.value()[i * n + j];
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {ia}, [ia, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[j * m + i];
  });
}

/// Columns [begin, end) of a rank-2 tensor.
inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  detail::require_rank("slice_cols", a, 2);
  const std::size_t m = a.value().shape()[0], n = a.value().shape()[1];
  if (begin >= end || end > n) {
    throw Error(ErrorCode::kDimension, "slice_cols: range [" + std::to_string(begin) + "," +
                                           std::to_string(end) + ") outside " + shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.value()[i * n + begin + j];
  const std::size_t ia = a.id();
  return a.tape().record("slice_cols", std::move(out), {ia}, [ia, m, n, w, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) (*ga)[i * n + begin + j] += g[i * w + j];
  });
}

/// Rows [begin, end) of a rank-2 tensor.
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  detail::require_rank("slice_rows", a, 2);
  const std::size_t m = a.value().shape()[0], n = a.value().shape()[1];
  if (begin >= end || end > m) {
    throw Error(ErrorCode::kDimension, "slice_rows: range [" + std::to_string(begin) + "," +
                                           std::to_string(end) + ") outside " + shape_string(a.shape()));
  }
  Tensor out(Shape{end - begin, n},
             std::vector<double>(a.value().data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                                 a.value().data().begin() + static_cast<std::ptrdiff_t>(end * n)));
  const std::size_t ia = a.id();
  return a.tape().record("slice_rows", std::move(out), {ia}, [ia, begin, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[begin * n + i] += g[i];
  });
}

/// Embedding lookup: row indices[i] of `table` becomes row i of the result.
inline Var gather_rows(const Var& table, const std::vector<std::size_t>& indices) {
  detail::require_rank("gather_rows", table, 2);
  const std::size_t rows = table.value().shape()[0], n = table.value().shape()[1];
  Tensor out(Shape{indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw Error(ErrorCode::kDimension, "gather_rows: index " + std::to_string(indices[i]) +
                                             " outside table " + shape_string(table.shape()));
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = table.value()[indices[i] * n + j];
  }
  const std::size_t it = table.id();
  return table.tape().record("gather_rows", std::move(out), {it}, [it, indices, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* gt = t.grad_slot(it))
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) (*gt)[indices[i] * n + j] += g[i * n + j];
  });
}

/// Picks entries by flat row-major index into a rank-1 result.
inline Var take(const Var& a, const std::vector<std::size_t>& flat_indices) {
  Tensor out(Shape{flat_indices.size()});
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= a.value().size()) {
      throw Error(ErrorCode::kDimension, "take: index " + std::to_string(flat_indices[i]) + " outside " +
                                             shape_string(a.shape()));
    }
    out[i] = a.value()[flat_indices[i]];
  }
  const std::size_t ia = a.id();
  return a.tape().record("take", std::move(out), {ia}, [ia, flat_indices](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < flat_indices.size(); ++i) (*ga)[flat_indices[i]] += g[i];
  });
}

inline Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

/// Per-row standardization (x - mean) / sqrt(var + eps), no affine part.
inline Var layer_norm_rows(const Var& a, double eps = 1e-9) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), n = av.cols();
  Tensor out = av;
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &out[r * n];
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) row[j] = (row[j] - mu) * inv_std[r];
  }
  const std::size_t ia = a.id();
  return a.tape().record("layer_norm_rows", std::move(out), {ia},
                         [ia, rows, n, inv_std](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& y = t.value(self);
                           Tensor* ga = t.grad_slot(ia);
                           if (!ga) return;
                           const double dn = static_cast<double>(n);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double gmean = 0.0, gy = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                               gmean += g[r * n + j];
                               gy += g[r * n + j] * y[r * n + j];
                             }
                             gmean /= dn;
                             gy /= dn;
                             for (std::size_t j = 0; j < n; ++j)
                               (*ga)[r * n + j] += inv_std[r] * (g[r * n + j] - gmean - y[r * n + j] * gy);
                           }
                         });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace proactive::numerics

#endif  // PROACTIVE_NUMERICS_OPS_HPP
