// Throughput probe for the conv2d/GEMM path at training-relevant shapes.
#include <chrono>
#include <cstdio>
#include <vector>

#include "raindiff/ops.hpp"
#include "raindiff/rng.hpp"

using namespace raindiff;

static double bench_gemm(int m, int n, int k, int reps) {
    std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
        c(static_cast<size_t>(m) * n, 0.0f);
    Rng rng(1);
    rng.fill_normal(a);
    rng.fill_normal(b);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) gemm_nn_add<float>(m, n, k, a.data(), k, b.data(), n, c.data(), n);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    return 2.0 * m * n * k * reps / secs / 1e9;
}

static double bench_conv(int batch, int cin, int cout, int hw, int reps) {
    Tensor x(batch, cin, hw, hw), w(cout, cin, 3, 3), b(cout, 1, 1, 1);
    Rng rng(2);
    rng.fill_normal(x.values);
    rng.fill_normal(w.values);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
        Tensor y = conv2d(x, w, b, 1, 1);
        y.grad.assign(y.size(), 1e-3f);
        conv2d_backward(x, w, b, y, 1, 1, true);
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    const double flops = 3.0 * 2.0 * batch * cout * cin * 9.0 * hw * hw * reps;
    return flops / secs / 1e9;
}

int main() {
    std::printf("gemm  32x16384x288 : %6.1f GFLOP/s\n", bench_gemm(32, 16384, 288, 40));
    std::printf("gemm  64x4096x576  : %6.1f GFLOP/s\n", bench_gemm(64, 4096, 576, 80));
    std::printf("gemm 128x1024x1152 : %6.1f GFLOP/s\n", bench_gemm(128, 1024, 1152, 160));
    std::printf("conv fwd+bwd b16 c32 32x32 : %6.1f GFLOP/s\n", bench_conv(16, 32, 32, 32, 30));
    std::printf("conv fwd+bwd b16 c64 16x16 : %6.1f GFLOP/s\n", bench_conv(16, 64, 64, 16, 60));
    return 0;
}
