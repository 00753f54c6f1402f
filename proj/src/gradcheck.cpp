#include "raindiff/gradcheck.hpp"

#include <cmath>

namespace raindiff {

double grad_check(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                  const Tensor64& analytic_grad, int probe_count, double eps, Rng& rng) {
    double max_rel = 0.0;
    Tensor64 probe = x;
    for (int p = 0; p < probe_count; ++p) {
        const auto i = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(x.size()) - 1));
        const double saved = probe.values[i];
        probe.values[i] = saved + eps;
        const double fp = f(probe);
        probe.values[i] = saved - eps;
        const double fm = f(probe);
        probe.values[i] = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = analytic_grad.values[i];
        const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-8});
        const double rel = std::fabs(a - fd) / denom;
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

}  // namespace raindiff
