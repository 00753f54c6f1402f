#include <cmath>

#include "doctest.h"
#include "raindiff/preprocess.hpp"
#include "raindiff/rng.hpp"

using namespace raindiff;

TEST_CASE("gamma_correct fixed points and reference value") {
    Field f(1, 3);
    f.values = {0.0f, 1.0f, 0.5f};
    const Field g = gamma_correct(f, 0.15);
    CHECK(g.values[0] == 0.0f);
    CHECK(g.values[1] == 1.0f);
    CHECK(g.values[2] == doctest::Approx(0.9012504837).epsilon(1e-7));
}

TEST_CASE("gamma default is 0.15") {
    CHECK(NormStats{}.gamma == 0.15);
}

TEST_CASE("gamma_correct rejects negative input") {
    Field f(1, 1);
    f.values = {-0.1f};
    CHECK_THROWS_AS((void)gamma_correct(f, 0.15), NumericError);
}

TEST_CASE("gamma_correct is strictly monotone") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const double a = std::fabs(rng.normal()) * 20.0;
        const double b = a + 1e-3 + std::fabs(rng.normal());
        Field f(1, 2);
        f.values = {static_cast<float>(a), static_cast<float>(b)};
        const Field g = gamma_correct(f, 0.15);
        CHECK(g.values[0] < g.values[1]);
    }
}

TEST_CASE("to_model_range endpoints and midpoint") {
    NormStats s;
    s.vmax_gamma = 2.0;
    Field f(1, 3);
    f.values = {2.0f, 0.0f, 1.0f};
    const Field u = to_model_range(f, s);
    CHECK(u.values[0] == 1.0f);
    CHECK(u.values[1] == -1.0f);
    CHECK(u.values[2] == 0.0f);
}

TEST_CASE("from_model_range clamps and inverts") {
    NormStats s;
    s.gamma = 0.15;
    s.vmax_gamma = std::pow(40.0, 0.15);
    Field u(1, 2);
    u.values = {-1.0f, 1.7f};
    const PrecipField a = from_model_range(u, s);
    CHECK(a.values[0] == 0.0f);
    Field u1(1, 1);
    u1.values = {1.0f};
    CHECK(a.values[1] == from_model_range(u1, s).values[0]);
}

TEST_CASE("full preprocessing chain roundtrips physical values") {
    NormStats s;
    s.gamma = 0.15;
    s.vmax_gamma = std::pow(40.0, 0.15);
    Field f(1, 4);
    f.values = {0.0f, 0.3f, 5.0f, 40.0f};
    const PrecipField back = from_model_range(preprocess_field(f, s), s);
    for (size_t i = 0; i < f.values.size(); ++i) {
        const double rel = std::fabs(back.values[i] - f.values[i]) /
                           std::max(1.0, static_cast<double>(f.values[i]));
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("roundtrip holds across a dense sweep of [0, vmax]") {
    NormStats s;
    s.gamma = 0.15;
    const double vmax = 55.0;
    s.vmax_gamma = std::pow(vmax, s.gamma);
    const int n = 20000;
    Field f(1, n);
    for (int i = 0; i < n; ++i)
        f.values[i] = static_cast<float>(vmax * i / static_cast<double>(n - 1));
    const PrecipField back = from_model_range(preprocess_field(f, s), s);
    for (int i = 0; i < n; ++i) {
        const double rel = std::fabs(back.values[i] - f.values[i]) /
                           std::max(1.0, static_cast<double>(f.values[i]));
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("gamma = 1 degenerates the chain to an affine rescale") {
    NormStats s;
    s.gamma = 1.0;
    s.vmax_gamma = 30.0;
    Field f(1, 5);
    f.values = {0.0f, 1.0f, 7.5f, 15.0f, 30.0f};
    const Field u = preprocess_field(f, s);
    for (size_t i = 0; i < f.values.size(); ++i)
        CHECK(u.values[i] == doctest::Approx(2.0 * f.values[i] / 30.0 - 1.0).epsilon(1e-7));
}

TEST_CASE("fit_stats maximum and degenerate split") {
    Field f(2, 2);
    f.values = {0.0f, 3.0f, 16.0f, 1.0f};
    const NormStats s = fit_stats({&f}, 0.25);
    CHECK(s.vmax_gamma == doctest::Approx(2.0).epsilon(1e-12));

    Field z(2, 2);
    CHECK_THROWS_AS((void)fit_stats({&z}, 0.25), ConfigError);
}

TEST_CASE("fit_stats is order-invariant") {
    Field a(1, 2), b(1, 2);
    a.values = {1.0f, 9.0f};
    b.values = {4.0f, 2.5f};
    CHECK(fit_stats({&a, &b}, 0.15).vmax_gamma == fit_stats({&b, &a}, 0.15).vmax_gamma);
}
