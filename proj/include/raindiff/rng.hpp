#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace raindiff {

// Deterministic random source. Gaussian draws use Box-Muller on top of
// mt19937_64 instead of std::normal_distribution so that streams do not
// depend on the standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] via rejection-free modulo of a wide draw.
    int64_t uniform_int(int64_t lo, int64_t hi);

    double normal();

    void fill_normal(std::span<float> out);
    void fill_normal(std::span<double> out);

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream derivation for per-entry / per-sample seeds: splitmix64 finalizer
// over the base seed combined with an FNV-1a hash of the tag.
uint64_t derive_seed(uint64_t base, uint64_t index);
uint64_t derive_seed(uint64_t base, std::string_view tag);

}  // namespace raindiff
