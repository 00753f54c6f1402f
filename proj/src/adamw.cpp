#include "raindiff/adamw.hpp"

#include <cmath>
#include <string>

#include "raindiff/errors.hpp"

namespace raindiff {

void adamw_step(std::span<float> param, std::span<const float> grad, AdamWState& state,
                const AdamWConfig& cfg) {
    if (param.size() != grad.size())
        throw ShapeError("adamw_step: param length " + std::to_string(param.size()) +
                         " != grad length " + std::to_string(grad.size()));
    for (size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericError("adamw_step: non-finite gradient at index " + std::to_string(i));
    state.ensure(param.size());
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        const double p = param[i] * decay;
        param[i] = static_cast<float>(p - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

}  // namespace raindiff
