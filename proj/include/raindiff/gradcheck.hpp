#pragma once

#include <functional>

#include "raindiff/rng.hpp"
#include "raindiff/tensor.hpp"

namespace raindiff {

// Compares an analytic gradient against 64-bit central finite differences of
// the scalar functional f at probe_count randomly chosen coordinates of x.
// Returns the maximum relative error, |analytic - fd| / max(|analytic|,
// |fd|, 1e-8), so an exact 0-vs-0 match reports 0.
double grad_check(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                  const Tensor64& analytic_grad, int probe_count, double eps, Rng& rng);

}  // namespace raindiff
