#pragma once

#include <vector>

#include "raindiff/grids.hpp"

namespace raindiff {

// Normalization fitted on the gamma-corrected high-resolution training
// split; shared by the LR and HR channels so the guidance functional
// compares like units.
struct NormStats {
    double gamma = 0.15;
    double vmax_gamma = 0.0;  // max over the training split of value^gamma
};

// Elementwise a^gamma. Strictly monotone; rejects negative input.
Field gamma_correct(const Field& field, double gamma);

// u = 2*(a_hat / vmax_gamma) - 1, clamped to [-1, 1].
Field to_model_range(const Field& corrected, const NormStats& stats);

// Inverse chain: clamp, undo the affine map, undo gamma. Output is mm/day.
PrecipField from_model_range(const Field& model_range, const NormStats& stats);

// Convenience: gamma + range mapping in one step.
Field preprocess_field(const Field& physical, const NormStats& stats);

NormStats fit_stats(const std::vector<const Field*>& train_fields, double gamma);

}  // namespace raindiff
