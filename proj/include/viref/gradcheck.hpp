#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "viref/tape.hpp"

namespace viref {

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  long worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  long coordinates = 0;
};

// Central-difference gradient verification, 64-bit only. make_loss must be a
// deterministic function of the store: (Tape<double>&, ParameterStore<double>&)
// -> scalar Var<double>.
//
// Relative error per coordinate is |a - n| / max(|a|, |n|, noise_floor).
// The floor is the resolvability limit of a step-epsilon central difference:
// with a loss of order 1, truncation (eps^2 f'''/6) and cancellation leave
// the difference with an absolute noise of roughly 1e-11..1e-9, so
// coordinates whose true gradient sits below ~1e-4 cannot be measured to
// 1e-5 relative precision by any finite-difference scheme in 64-bit. For
// such coordinates the check still demands |a - n| <= tol * noise_floor,
// i.e. absolute agreement at 1e-9 for the default tolerances.
template <typename LossFn>
FdReport finite_difference_check(LossFn&& make_loss,
                                 ParameterStore<double>& params,
                                 double epsilon = 1e-5,
                                 double noise_floor = 1e-4) {
  // Analytic pass.
  Tape<double> atape(Mode::eval, 0, true);
  Var<double> aloss = make_loss(atape, params);
  if (aloss.value().size() != 1)
    fail(ErrorKind::contract, "finite_difference_check: loss not scalar");
  if (!std::isfinite(aloss.value()(0, 0)))
    fail(ErrorKind::divergence,
         "finite_difference_check aborted: non-finite forward value");
  atape.backward(aloss);
  GradMap<double> analytic = atape.gradients();

  auto forward_value = [&]() {
    Tape<double> t(Mode::eval, 0, false);
    Var<double> l = make_loss(t, params);
    const double v = l.value()(0, 0);
    if (!std::isfinite(v))
      fail(ErrorKind::divergence,
           "finite_difference_check aborted: non-finite forward value");
    return v;
  };

  FdReport report;
  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    MatX<double>& data = entry.value.data;
    const MatX<double>& g = analytic.at(name).data;
    for (long idx = 0; idx < data.size(); ++idx) {
      const double saved = data(idx);
      data(idx) = saved + epsilon;
      const double fp = forward_value();
      data(idx) = saved - epsilon;
      const double fm = forward_value();
      data(idx) = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = g(idx);
      const double rel =
          std::abs(a - numeric) /
          std::max({std::abs(a), std::abs(numeric), noise_floor});
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace viref
