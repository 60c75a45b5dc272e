#ifndef PROACTIVE_NUMERICS_GRADCHECK_HPP
#define PROACTIVE_NUMERICS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "proactive/error.hpp"
#include "proactive/numerics/param_store.hpp"
#include "proactive/numerics/tape.hpp"

namespace proactive::numerics {

/// Builds a scalar loss on `tape`, reading parameters from `store`.
using ScalarObjective = std::function<Var(Tape& tape, const ParamStore& store)>;

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tol) const { return max_rel_error < tol; }
};

inline double evaluate_objective(const ScalarObjective& f, const ParamStore& store) {
  Tape tape(&store);
  return f(tape, store).item();
}

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) - f(θ-h)) / 2h, one scalar parameter at a time.
///
/// Relative error is |a - n| / max(|a|, |n|, abs_floor); the floor keeps
/// near-zero gradients from turning roundoff into huge ratios.
inline GradCheckReport finite_difference_check(const ScalarObjective& f, ParamStore store, double h = 1e-5,
                                               double abs_floor = 1e-6) {
  if (!(h > 0.0)) throw Error(ErrorCode::kContract, "gradcheck: step h must be positive");
  GradCheckReport report;
  if (store.empty()) return report;

  Gradients analytic(store);
  {
    Tape tape(&store);
    Var loss = f(tape, store);
    tape.backward(loss, analytic);
  }

  for (std::size_t p = 0; p < store.size(); ++p) {
    Tensor& value = store.value(p);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = evaluate_objective(f, store);
      value[i] = saved - h;
      const double down = evaluate_objective(f, store);
      value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error(ErrorCode::kNumeric, "gradcheck: objective non-finite near " + store.name(p));
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), abs_floor});
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, rel_err);
        report.worst_param = store.name(p);
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace proactive::numerics

#endif  // PROACTIVE_NUMERICS_GRADCHECK_HPP
