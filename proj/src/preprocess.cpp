#include "raindiff/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace raindiff {

Field gamma_correct(const Field& field, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("gamma_correct: gamma must be > 0");
    Field out(field.height, field.width);
    for (size_t i = 0; i < field.values.size(); ++i) {
        const double a = field.values[i];
        if (a < 0.0)
            throw NumericError("gamma_correct: negative input " + std::to_string(a) +
                               " at index " + std::to_string(i));
        out.values[i] = static_cast<float>(std::pow(a, gamma));
    }
    return out;
}

Field to_model_range(const Field& corrected, const NormStats& stats) {
    if (!(stats.vmax_gamma > 0.0)) throw ConfigError("to_model_range: vmax_gamma must be > 0");
    Field out(corrected.height, corrected.width);
    for (size_t i = 0; i < corrected.values.size(); ++i) {
        const double u = 2.0 * (corrected.values[i] / stats.vmax_gamma) - 1.0;
        out.values[i] = static_cast<float>(std::clamp(u, -1.0, 1.0));
    }
    return out;
}

PrecipField from_model_range(const Field& model_range, const NormStats& stats) {
    PrecipField out(model_range.height, model_range.width);
    const double inv_gamma = 1.0 / stats.gamma;
    for (size_t i = 0; i < model_range.values.size(); ++i) {
        const double u = std::clamp(static_cast<double>(model_range.values[i]), -1.0, 1.0);
        const double a_hat = (u + 1.0) / 2.0 * stats.vmax_gamma;
        out.values[i] = static_cast<float>(std::pow(a_hat, inv_gamma));
    }
    return out;
}

Field preprocess_field(const Field& physical, const NormStats& stats) {
    return to_model_range(gamma_correct(physical, stats.gamma), stats);
}

NormStats fit_stats(const std::vector<const Field*>& train_fields, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("fit_stats: gamma must be > 0");
    double vmax = 0.0;
    for (const Field* f : train_fields)
        for (const float v : f->values) {
            if (v < 0.0f) throw NumericError("fit_stats: negative precipitation value");
            vmax = std::max(vmax, static_cast<double>(v));
        }
    if (!(vmax > 0.0))
        throw ConfigError("fit_stats: training split is all zeros, normalization degenerate");
    NormStats s;
    s.gamma = gamma;
    s.vmax_gamma = std::pow(vmax, gamma);
    return s;
}

}  // namespace raindiff
