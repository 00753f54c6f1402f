#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace raindiff {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// First-/second-moment state for one parameter vector.
struct AdamWState {
    int64_t step = 0;
    std::vector<float> m;
    std::vector<float> v;

    void ensure(size_t n) {
        if (m.size() != n) m.assign(n, 0.0f);
        if (v.size() != n) v.assign(n, 0.0f);
    }
};

// Decoupled weight decay: the parameter is scaled by (1 - lr*weight_decay)
// before the bias-corrected Adam update. Throws NumericError on non-finite
// gradients without touching the parameter.
void adamw_step(std::span<float> param, std::span<const float> grad, AdamWState& state,
                const AdamWConfig& cfg);

}  // namespace raindiff
