#pragma once

#include <functional>

#include "gazelab/params.hpp"

namespace gazelab {

// Central-difference check of analytic parameter gradients.
//
// loss_fn evaluates the scalar objective at a parameter snapshot; grad_fn
// returns the analytic gradient (same structure as the params). Returns the
// maximum over all parameters of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// eps must lie in (0, 1e-2]; a non-finite loss raises NumericError.
double grad_check(const ParamSet& at,
                  const std::function<double(const ParamSet&)>& loss_fn,
                  const std::function<ParamSet(const ParamSet&)>& grad_fn,
                  double eps);

}  // namespace gazelab
