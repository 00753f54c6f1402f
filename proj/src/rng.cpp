#include "raindiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace raindiff {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // Widening multiply keeps the draw unbiased enough for span << 2^64
    // and, unlike std::uniform_int_distribution, is implementation-stable.
    const unsigned __int128 wide = static_cast<unsigned __int128>(gen_()) * span;
    return lo + static_cast<int64_t>(wide >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

void Rng::fill_normal(std::span<float> out) {
    for (float& x : out) x = static_cast<float>(normal());
}

void Rng::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t base, uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x51ed2701ull));
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return splitmix64(base ^ h);
}

}  // namespace raindiff
