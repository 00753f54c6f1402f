#include "raindiff/ops.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace raindiff {

namespace {

template <typename T>
constexpr int kTileN = (sizeof(T) == 4) ? 32 : 16;
template <typename T>
constexpr int kTileM = (sizeof(T) == 4) ? 8 : 4;

// MR x NR register tile: acc starts from C, consumes k in ascending order,
// stores back once. Per C element the reduction chain is fixed regardless of
// how panels are distributed over threads.
template <typename T, int MR, int NR>
void gemm_tile(int k_len, const T* __restrict a, int lda, const T* __restrict b, int ldb,
               T* __restrict c, int ldc) {
    T acc[MR][NR];
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NR; ++j) acc[i][j] = c[static_cast<size_t>(i) * ldc + j];
    for (int k = 0; k < k_len; ++k) {
        const T* brow = b + static_cast<size_t>(k) * ldb;
        for (int i = 0; i < MR; ++i) {
            const T av = a[static_cast<size_t>(i) * lda + k];
            for (int j = 0; j < NR; ++j) acc[i][j] += av * brow[j];
        }
    }
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NR; ++j) c[static_cast<size_t>(i) * ldc + j] = acc[i][j];
}

// Scalar fallback for ragged edges; same per-element k order as the tile path.
template <typename T>
void gemm_edge(int m, int n, int k_len, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = c[static_cast<size_t>(i) * ldc + j];
            for (int k = 0; k < k_len; ++k)
                acc += a[static_cast<size_t>(i) * lda + k] * b[static_cast<size_t>(k) * ldb + j];
            c[static_cast<size_t>(i) * ldc + j] = acc;
        }
    }
}

template <typename T>
void gemm_panel(int m, int jn, int k_len, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
    constexpr int NR = kTileN<T>;
    constexpr int MR = kTileM<T>;
    if (jn == NR) {
        int i = 0;
        for (; i + MR <= m; i += MR)
            gemm_tile<T, MR, NR>(k_len, a + static_cast<size_t>(i) * lda, lda, b, ldb,
                                 c + static_cast<size_t>(i) * ldc, ldc);
        const int rem = m - i;
        const T* ar = a + static_cast<size_t>(i) * lda;
        T* cr = c + static_cast<size_t>(i) * ldc;
        switch (rem) {
            case 1: gemm_tile<T, 1, NR>(k_len, ar, lda, b, ldb, cr, ldc); break;
            case 2: gemm_tile<T, 2, NR>(k_len, ar, lda, b, ldb, cr, ldc); break;
            case 3: gemm_tile<T, 3, NR>(k_len, ar, lda, b, ldb, cr, ldc); break;
            case 4:
                if constexpr (MR > 4) gemm_tile<T, 4, NR>(k_len, ar, lda, b, ldb, cr, ldc);
                break;
            case 5:
                if constexpr (MR > 5) gemm_tile<T, 5, NR>(k_len, ar, lda, b, ldb, cr, ldc);
                break;
            case 6:
                if constexpr (MR > 6) gemm_tile<T, 6, NR>(k_len, ar, lda, b, ldb, cr, ldc);
                break;
            case 7:
                if constexpr (MR > 7) gemm_tile<T, 7, NR>(k_len, ar, lda, b, ldb, cr, ldc);
                break;
            default: break;
        }
    } else {
        gemm_edge(m, jn, k_len, a, lda, b, ldb, c, ldc);
    }
}

}  // namespace

template <typename T>
void gemm_nn_add(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
    constexpr int NR = kTileN<T>;
    const int npanels = (n + NR - 1) / NR;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < npanels; ++p) {
        const int j0 = p * NR;
        const int jn = std::min(NR, n - j0);
        gemm_panel<T>(m, jn, k, a, lda, b + j0, ldb, c + j0, ldc);
    }
}

template void gemm_nn_add<float>(int, int, int, const float*, int, const float*, int, float*, int);
template void gemm_nn_add<double>(int, int, int, const double*, int, const double*, int, double*, int);

namespace {

// C[M x N] += A[M x L] * B[N x L]^T as blocked dot products. Partial sums use
// a fixed lane partition (p mod V) combined in ascending lane order, so the
// result is independent of thread placement. The GNU vector-extension path
// keeps the lane accumulators in registers; the fallback computes the exact
// same per-element chains.
#if defined(__GNUC__)
template <typename T>
struct DotVec;
template <>
struct DotVec<float> {
    static constexpr int V = 16;
    typedef float vec __attribute__((vector_size(64)));
};
template <>
struct DotVec<double> {
    static constexpr int V = 8;
    typedef double vec __attribute__((vector_size(64)));
};

template <typename T>
void gemm_nt_add(int m, int n, int l, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
    constexpr int V = DotVec<T>::V;
    using vec = typename DotVec<T>::vec;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * lda;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const T* b0 = b + static_cast<size_t>(j) * ldb;
            const T* b1 = b0 + ldb;
            const T* b2 = b1 + ldb;
            const T* b3 = b2 + ldb;
            vec acc0{}, acc1{}, acc2{}, acc3{}, av, bv;
            int p = 0;
            for (; p + V <= l; p += V) {
                std::memcpy(&av, ai + p, sizeof(vec));
                std::memcpy(&bv, b0 + p, sizeof(vec));
                acc0 += av * bv;
                std::memcpy(&bv, b1 + p, sizeof(vec));
                acc1 += av * bv;
                std::memcpy(&bv, b2 + p, sizeof(vec));
                acc2 += av * bv;
                std::memcpy(&bv, b3 + p, sizeof(vec));
                acc3 += av * bv;
            }
            T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (int v = 0; v < V; ++v) {
                s0 += acc0[v];
                s1 += acc1[v];
                s2 += acc2[v];
                s3 += acc3[v];
            }
            for (int q = p; q < l; ++q) {
                s0 += ai[q] * b0[q];
                s1 += ai[q] * b1[q];
                s2 += ai[q] * b2[q];
                s3 += ai[q] * b3[q];
            }
            T* cr = c + static_cast<size_t>(i) * ldc + j;
            cr[0] += s0;
            cr[1] += s1;
            cr[2] += s2;
            cr[3] += s3;
        }
        for (; j < n; ++j) {
            const T* bj = b + static_cast<size_t>(j) * ldb;
            vec acc{}, av, bv;
            int p = 0;
            for (; p + V <= l; p += V) {
                std::memcpy(&av, ai + p, sizeof(vec));
                std::memcpy(&bv, bj + p, sizeof(vec));
                acc += av * bv;
            }
            T s = 0;
            for (int v = 0; v < V; ++v) s += acc[v];
            for (; p < l; ++p) s += ai[p] * bj[p];
            c[static_cast<size_t>(i) * ldc + j] += s;
        }
    }
}
#else
template <typename T>
void gemm_nt_add(int m, int n, int l, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
    constexpr int V = (sizeof(T) == 4) ? 16 : 8;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * lda;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<size_t>(j) * ldb;
            T acc[V] = {};
            int p = 0;
            for (; p + V <= l; p += V)
                for (int v = 0; v < V; ++v) acc[v] += ai[p + v] * bj[p + v];
            T s = 0;
            for (int v = 0; v < V; ++v) s += acc[v];
            for (; p < l; ++p) s += ai[p] * bj[p];
            c[static_cast<size_t>(i) * ldc + j] += s;
        }
    }
}
#endif

}  // namespace

namespace {

struct ConvDims {
    int batch, in_c, in_h, in_w;
    int out_c, k, out_h, out_w;
};

template <typename T>
ConvDims conv_dims(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                   int padding) {
    if (w.shape[2] != w.shape[3])
        throw ShapeError("conv2d: non-square kernel " + shape_string(w));
    if (x.shape[1] != w.shape[1])
        throw ShapeError("conv2d: input channels " + std::to_string(x.shape[1]) +
                         " != weight in_c " + std::to_string(w.shape[1]));
    if (static_cast<int>(b.size()) != w.shape[0])
        throw ShapeError("conv2d: bias length " + std::to_string(b.size()) + " != out_c " +
                         std::to_string(w.shape[0]));
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
    ConvDims d{x.shape[0], x.shape[1], x.shape[2], x.shape[3], w.shape[0], w.shape[2], 0, 0};
    d.out_h = (d.in_h + 2 * padding - d.k) / stride + 1;
    d.out_w = (d.in_w + 2 * padding - d.k) / stride + 1;
    if (d.in_h + 2 * padding < d.k || d.in_w + 2 * padding < d.k)
        throw ShapeError("conv2d: kernel " + std::to_string(d.k) + " exceeds padded input " +
                         shape_string(x));
    return d;
}

// col layout: K = in_c*k*k rows, N = out_h*out_w columns.
template <typename T>
void im2col(const T* xplane, const ConvDims& d, int stride, int padding, T* col) {
    const int n = d.out_h * d.out_w;
    int r = 0;
    for (int c = 0; c < d.in_c; ++c) {
        const T* src = xplane + static_cast<size_t>(c) * d.in_h * d.in_w;
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx, ++r) {
                T* dst = col + static_cast<size_t>(r) * n;
                for (int oy = 0; oy < d.out_h; ++oy) {
                    const int iy = oy * stride + ky - padding;
                    T* drow = dst + static_cast<size_t>(oy) * d.out_w;
                    if (iy < 0 || iy >= d.in_h) {
                        std::fill(drow, drow + d.out_w, T(0));
                        continue;
                    }
                    const T* srow = src + static_cast<size_t>(iy) * d.in_w;
                    for (int ox = 0; ox < d.out_w; ++ox) {
                        const int ix = ox * stride + kx - padding;
                        drow[ox] = (ix >= 0 && ix < d.in_w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
std::vector<T>& scratch_buffer(int which) {
    static thread_local std::vector<T> bufs[3];
    return bufs[which];
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int padding) {
    const ConvDims d = conv_dims(x, w, b, stride, padding);
    TensorT<T> y(d.batch, d.out_c, d.out_h, d.out_w);
    const int n = d.out_h * d.out_w;
    const int K = d.in_c * d.k * d.k;
    const size_t xplane_sz = static_cast<size_t>(d.in_c) * d.in_h * d.in_w;
    const size_t yplane_sz = static_cast<size_t>(d.out_c) * n;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < d.batch; ++bi) {
        auto& col = scratch_buffer<T>(0);
        col.resize(static_cast<size_t>(K) * n);
        im2col(x.values.data() + bi * xplane_sz, d, stride, padding, col.data());
        T* yb = y.values.data() + bi * yplane_sz;
        for (int m = 0; m < d.out_c; ++m)
            std::fill(yb + static_cast<size_t>(m) * n, yb + static_cast<size_t>(m + 1) * n,
                      b.values[m]);
        gemm_nn_add<T>(d.out_c, n, K, w.values.data(), K, col.data(), n, yb, n);
    }
    return y;
}

template <typename T>
void conv2d_backward(TensorT<T>& x, TensorT<T>& w, TensorT<T>& b, const TensorT<T>& y, int stride,
                     int padding, bool need_input_grad) {
    const ConvDims d = conv_dims(x, w, b, stride, padding);
    if (y.grad.size() != y.size()) throw NumericError("conv2d_backward: output grad missing");
    const int n = d.out_h * d.out_w;
    const int K = d.in_c * d.k * d.k;
    const size_t xplane_sz = static_cast<size_t>(d.in_c) * d.in_h * d.in_w;
    const size_t yplane_sz = static_cast<size_t>(d.out_c) * n;
    w.ensure_grad();
    b.ensure_grad();

    // Bias grad: fixed (batch, spatial) order.
    for (int m = 0; m < d.out_c; ++m) {
        T acc = b.grad[m];
        for (int bi = 0; bi < d.batch; ++bi) {
            const T* gy = y.grad.data() + bi * yplane_sz + static_cast<size_t>(m) * n;
            for (int i = 0; i < n; ++i) acc += gy[i];
        }
        b.grad[m] = acc;
    }

    // Weight grad as dW^T = im2col(x) * dY^T, which keeps the GEMM in the
    // fast broadcast form. Items compute private partials in parallel; the
    // combine runs in ascending batch order, so the reduction tree does not
    // depend on thread count.
    {
        const size_t wsz = w.size();
        std::vector<T> partial(static_cast<size_t>(d.batch) * wsz, T(0));
#pragma omp parallel for schedule(static)
        for (int bi = 0; bi < d.batch; ++bi) {
            auto& col = scratch_buffer<T>(1);
            col.resize(static_cast<size_t>(K) * n);
            im2col(x.values.data() + bi * xplane_sz, d, stride, padding, col.data());
            const T* gy = y.grad.data() + bi * yplane_sz;
            if (d.out_c >= 8) {
                auto& dyt = scratch_buffer<T>(2);
                dyt.resize(static_cast<size_t>(n) * d.out_c);
                for (int m = 0; m < d.out_c; ++m)
                    for (int p = 0; p < n; ++p)
                        dyt[static_cast<size_t>(p) * d.out_c + m] = gy[static_cast<size_t>(m) * n + p];
                gemm_nn_add<T>(K, d.out_c, n, col.data(), n, dyt.data(), d.out_c,
                               partial.data() + bi * wsz, d.out_c);
            } else {
                gemm_nt_add<T>(d.out_c, K, n, gy, n, col.data(), n, partial.data() + bi * wsz, K);
            }
        }
        if (d.out_c >= 8) {
            for (int bi = 0; bi < d.batch; ++bi) {
                const T* p = partial.data() + bi * wsz;
                for (int m = 0; m < d.out_c; ++m)
                    for (int r = 0; r < K; ++r)
                        w.grad[static_cast<size_t>(m) * K + r] +=
                            p[static_cast<size_t>(r) * d.out_c + m];
            }
        } else {
            for (int bi = 0; bi < d.batch; ++bi) {
                const T* p = partial.data() + bi * wsz;
                for (size_t i = 0; i < wsz; ++i) w.grad[i] += p[i];
            }
        }
    }

    if (!need_input_grad) return;
    x.ensure_grad();

    // Stride-1 input grad as a convolution of dY with the flipped,
    // channel-transposed kernel: same GEMM shape as the forward pass,
    // accumulated straight into x.grad.
    if (stride == 1 && padding <= d.k - 1) {
        TensorT<T> wflip(d.in_c, d.out_c, d.k, d.k);
        for (int m = 0; m < d.out_c; ++m)
            for (int c = 0; c < d.in_c; ++c)
                for (int ky = 0; ky < d.k; ++ky)
                    for (int kx = 0; kx < d.k; ++kx)
                        wflip.at(c, m, d.k - 1 - ky, d.k - 1 - kx) = w.at(m, c, ky, kx);
        ConvDims dt{d.batch, d.out_c, d.out_h, d.out_w, d.in_c, d.k, d.in_h, d.in_w};
        const int pad_t = d.k - 1 - padding;
        const int nt = d.in_h * d.in_w;
        const int Kt = d.out_c * d.k * d.k;
#pragma omp parallel for schedule(static)
        for (int bi = 0; bi < d.batch; ++bi) {
            auto& col = scratch_buffer<T>(0);
            col.resize(static_cast<size_t>(Kt) * nt);
            im2col(y.grad.data() + bi * yplane_sz, dt, 1, pad_t, col.data());
            gemm_nn_add<T>(d.in_c, nt, Kt, wflip.values.data(), Kt, col.data(), nt,
                           x.grad.data() + bi * xplane_sz, nt);
        }
        return;
    }

    // Input grad: colgrad = W^T * dY, then gathered back per input cell.
    auto& wt = scratch_buffer<T>(2);
    wt.resize(static_cast<size_t>(K) * d.out_c);
    for (int m = 0; m < d.out_c; ++m)
        for (int r = 0; r < K; ++r)
            wt[static_cast<size_t>(r) * d.out_c + m] = w.values[static_cast<size_t>(m) * K + r];

#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < d.batch; ++bi) {
        auto& colg = scratch_buffer<T>(0);
        colg.assign(static_cast<size_t>(K) * n, T(0));
        gemm_nn_add<T>(K, n, d.out_c, wt.data(), d.out_c, y.grad.data() + bi * yplane_sz, n,
                       colg.data(), n);
        T* gx = x.grad.data() + bi * xplane_sz;
        const int kk = d.k * d.k;
        for (int c = 0; c < d.in_c; ++c) {
            for (int iy = 0; iy < d.in_h; ++iy) {
                for (int ix = 0; ix < d.in_w; ++ix) {
                    T acc = 0;
                    for (int ky = 0; ky < d.k; ++ky) {
                        const int ty = iy + padding - ky;
                        if (ty < 0 || ty % stride != 0) continue;
                        const int oy = ty / stride;
                        if (oy >= d.out_h) continue;
                        for (int kx = 0; kx < d.k; ++kx) {
                            const int tx = ix + padding - kx;
                            if (tx < 0 || tx % stride != 0) continue;
                            const int ox = tx / stride;
                            if (ox >= d.out_w) continue;
                            acc += colg[(static_cast<size_t>(c * kk + ky * d.k + kx)) * n +
                                        static_cast<size_t>(oy) * d.out_w + ox];
                        }
                    }
                    gx[(static_cast<size_t>(c) * d.in_h + iy) * d.in_w + ix] += acc;
                }
            }
        }
    }
}

namespace {

template <typename T>
void resize_axis(int in, int out, std::vector<int>& lo, std::vector<T>& frac) {
    lo.resize(out);
    frac.resize(out);
    for (int d = 0; d < out; ++d) {
        double s = (d + 0.5) * static_cast<double>(in) / out - 0.5;
        if (s < 0.0) s = 0.0;
        if (s > in - 1) s = in - 1;
        const int i0 = static_cast<int>(s);
        lo[d] = i0;
        frac[d] = static_cast<T>(s - i0);
    }
}

template <typename T>
T lerp_val(T a, T b, T t) {
    return a + t * (b - a);
}

}  // namespace

template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target dims must be >= 1");
    const int in_h = x.shape[2], in_w = x.shape[3];
    TensorT<T> y(x.shape[0], x.shape[1], out_h, out_w);
    std::vector<int> y0, x0;
    std::vector<T> fy, fx;
    resize_axis<T>(in_h, out_h, y0, fy);
    resize_axis<T>(in_w, out_w, x0, fx);
    const int planes = x.shape[0] * x.shape[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const T* src = x.values.data() + static_cast<size_t>(p) * in_h * in_w;
        T* dst = y.values.data() + static_cast<size_t>(p) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const int r0 = y0[oy];
            const int r1 = std::min(r0 + 1, in_h - 1);
            const T ty = fy[oy];
            for (int ox = 0; ox < out_w; ++ox) {
                const int c0 = x0[ox];
                const int c1 = std::min(c0 + 1, in_w - 1);
                const T tx = fx[ox];
                const T top = lerp_val(src[static_cast<size_t>(r0) * in_w + c0],
                                       src[static_cast<size_t>(r0) * in_w + c1], tx);
                const T bot = lerp_val(src[static_cast<size_t>(r1) * in_w + c0],
                                       src[static_cast<size_t>(r1) * in_w + c1], tx);
                dst[static_cast<size_t>(oy) * out_w + ox] = lerp_val(top, bot, ty);
            }
        }
    }
    return y;
}

template <typename T>
void bilinear_resize_backward(TensorT<T>& x, const TensorT<T>& y) {
    if (y.grad.size() != y.size()) throw NumericError("bilinear_resize_backward: grad missing");
    const int in_h = x.shape[2], in_w = x.shape[3];
    const int out_h = y.shape[2], out_w = y.shape[3];
    x.ensure_grad();
    std::vector<int> y0, x0;
    std::vector<T> fy, fx;
    resize_axis<T>(in_h, out_h, y0, fy);
    resize_axis<T>(in_w, out_w, x0, fx);
    const int planes = x.shape[0] * x.shape[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        T* gx = x.grad.data() + static_cast<size_t>(p) * in_h * in_w;
        const T* gy = y.grad.data() + static_cast<size_t>(p) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const int r0 = y0[oy];
            const int r1 = std::min(r0 + 1, in_h - 1);
            const T ty = fy[oy];
            for (int ox = 0; ox < out_w; ++ox) {
                const int c0 = x0[ox];
                const int c1 = std::min(c0 + 1, in_w - 1);
                const T tx = fx[ox];
                const T g = gy[static_cast<size_t>(oy) * out_w + ox];
                gx[static_cast<size_t>(r0) * in_w + c0] += g * (T(1) - ty) * (T(1) - tx);
                gx[static_cast<size_t>(r0) * in_w + c1] += g * (T(1) - ty) * tx;
                gx[static_cast<size_t>(r1) * in_w + c0] += g * ty * (T(1) - tx);
                gx[static_cast<size_t>(r1) * in_w + c1] += g * ty * tx;
            }
        }
    }
}

namespace {

constexpr double kNormEps = 1e-5;

template <typename T>
void group_stats(const T* xg, size_t n, double& mean, double& rstd) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += xg[i];
    mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dv = xg[i] - mean;
        var += dv * dv;
    }
    var /= static_cast<double>(n);
    rstd = 1.0 / std::sqrt(var + kNormEps);
}

}  // namespace

template <typename T>
TensorT<T> group_norm(const TensorT<T>& x, int groups, const TensorT<T>& gain,
                      const TensorT<T>& shift) {
    const int C = x.shape[1];
    if (groups < 1 || C % groups != 0)
        throw ConfigError("group_norm: channels " + std::to_string(C) + " not divisible by groups " +
                          std::to_string(groups));
    if (static_cast<int>(gain.size()) != C || static_cast<int>(shift.size()) != C)
        throw ShapeError("group_norm: gain/shift length != channels");
    const int cpg = C / groups;
    const size_t hw = static_cast<size_t>(x.shape[2]) * x.shape[3];
    const size_t gsz = cpg * hw;
    TensorT<T> y(x.shape[0], C, x.shape[2], x.shape[3]);
    const int tasks = x.shape[0] * groups;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < tasks; ++t) {
        const int bi = t / groups, g = t % groups;
        const size_t base = (static_cast<size_t>(bi) * C + static_cast<size_t>(g) * cpg) * hw;
        double mean, rstd;
        group_stats(x.values.data() + base, gsz, mean, rstd);
        for (int cc = 0; cc < cpg; ++cc) {
            const int c = g * cpg + cc;
            const T* src = x.values.data() + base + cc * hw;
            T* dst = y.values.data() + base + cc * hw;
            const double a = gain.values[c] * rstd;
            const double b = shift.values[c] - a * mean;
            for (size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(a * src[i] + b);
        }
    }
    return y;
}

template <typename T>
void group_norm_backward(TensorT<T>& x, TensorT<T>& gain, TensorT<T>& shift, const TensorT<T>& y,
                         int groups) {
    const int C = x.shape[1];
    const int cpg = C / groups;
    const size_t hw = static_cast<size_t>(x.shape[2]) * x.shape[3];
    const size_t gsz = cpg * hw;
    if (y.grad.size() != y.size()) throw NumericError("group_norm_backward: grad missing");
    x.ensure_grad();
    gain.ensure_grad();
    shift.ensure_grad();
    // Per-group tasks own disjoint channels, so the per-channel gain/shift
    // accumulation stays in ascending batch order inside each task.
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        for (int bi = 0; bi < x.shape[0]; ++bi) {
            const size_t base = (static_cast<size_t>(bi) * C + static_cast<size_t>(g) * cpg) * hw;
            double mean, rstd;
            group_stats(x.values.data() + base, gsz, mean, rstd);
            double s1 = 0.0, s2 = 0.0;  // sums of dxhat and dxhat*xhat
            for (int cc = 0; cc < cpg; ++cc) {
                const int c = g * cpg + cc;
                const T* xs = x.values.data() + base + cc * hw;
                const T* gy = y.grad.data() + base + cc * hw;
                const double gc = gain.values[c];
                double dg = 0.0, ds = 0.0;
                for (size_t i = 0; i < hw; ++i) {
                    const double xh = (xs[i] - mean) * rstd;
                    const double dyv = gy[i];
                    dg += dyv * xh;
                    ds += dyv;
                    s1 += dyv * gc;
                    s2 += dyv * gc * xh;
                }
                gain.grad[c] += static_cast<T>(dg);
                shift.grad[c] += static_cast<T>(ds);
            }
            const double inv_n = 1.0 / static_cast<double>(gsz);
            for (int cc = 0; cc < cpg; ++cc) {
                const int c = g * cpg + cc;
                const T* xs = x.values.data() + base + cc * hw;
                const T* gy = y.grad.data() + base + cc * hw;
                T* gx = x.grad.data() + base + cc * hw;
                const double gc = gain.values[c];
                for (size_t i = 0; i < hw; ++i) {
                    const double xh = (xs[i] - mean) * rstd;
                    const double dxh = gy[i] * gc;
                    gx[i] += static_cast<T>(rstd * (dxh - inv_n * s1 - xh * inv_n * s2));
                }
            }
        }
    }
}

namespace {

template <typename T>
T stable_sigmoid(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

}  // namespace

template <typename T>
TensorT<T> silu(const TensorT<T>& x) {
    TensorT<T> y(x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    const int64_t n = static_cast<int64_t>(x.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T v = x.values[i];
        y.values[i] = v * stable_sigmoid(v);
    }
    return y;
}

template <typename T>
void silu_backward(TensorT<T>& x, const TensorT<T>& y) {
    if (y.grad.size() != y.size()) throw NumericError("silu_backward: grad missing");
    x.ensure_grad();
    const int64_t n = static_cast<int64_t>(x.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T v = x.values[i];
        const T s = stable_sigmoid(v);
        x.grad[i] += y.grad[i] * s * (T(1) + v * (T(1) - s));
    }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    for (size_t i = 0; i < x.size(); ++i) y.values[i] = x.values[i] > T(0) ? x.values[i] : T(0);
    return y;
}

template <typename T>
void relu_backward(TensorT<T>& x, const TensorT<T>& y) {
    if (y.grad.size() != y.size()) throw NumericError("relu_backward: grad missing");
    x.ensure_grad();
    for (size_t i = 0; i < x.size(); ++i)
        if (x.values[i] > T(0)) x.grad[i] += y.grad[i];
}

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    const int rows = x.shape[0], in_dim = x.shape[1];
    const int out_dim = w.shape[0];
    if (w.shape[1] != in_dim)
        throw ShapeError("linear: input dim " + std::to_string(in_dim) + " != weight in_dim " +
                         std::to_string(w.shape[1]));
    if (static_cast<int>(b.size()) != out_dim) throw ShapeError("linear: bias length != out_dim");
    TensorT<T> y(rows, out_dim, 1, 1);
    for (int r = 0; r < rows; ++r) {
        const T* xr = x.values.data() + static_cast<size_t>(r) * in_dim;
        T* yr = y.values.data() + static_cast<size_t>(r) * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            T acc = b.values[o];
            const T* wo = w.values.data() + static_cast<size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += xr[i] * wo[i];
            yr[o] = acc;
        }
    }
    return y;
}

template <typename T>
void linear_backward(TensorT<T>& x, TensorT<T>& w, TensorT<T>& b, const TensorT<T>& y) {
    if (y.grad.size() != y.size()) throw NumericError("linear_backward: grad missing");
    const int rows = x.shape[0], in_dim = x.shape[1], out_dim = w.shape[0];
    x.ensure_grad();
    w.ensure_grad();
    b.ensure_grad();
    for (int r = 0; r < rows; ++r) {
        const T* xr = x.values.data() + static_cast<size_t>(r) * in_dim;
        const T* gy = y.grad.data() + static_cast<size_t>(r) * out_dim;
        T* gx = x.grad.data() + static_cast<size_t>(r) * in_dim;
        for (int o = 0; o < out_dim; ++o) {
            const T g = gy[o];
            const T* wo = w.values.data() + static_cast<size_t>(o) * in_dim;
            T* gw = w.grad.data() + static_cast<size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) {
                gx[i] += g * wo[i];
                gw[i] += g * xr[i];
            }
            b.grad[o] += g;
        }
    }
}

template <typename T>
TensorT<T> upsample2x_nearest(const TensorT<T>& x) {
    const int h = x.shape[2], w = x.shape[3];
    TensorT<T> y(x.shape[0], x.shape[1], 2 * h, 2 * w);
    const int planes = x.shape[0] * x.shape[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const T* src = x.values.data() + static_cast<size_t>(p) * h * w;
        T* dst = y.values.data() + static_cast<size_t>(p) * 4 * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                const T v = src[static_cast<size_t>(iy) * w + ix];
                T* d0 = dst + (static_cast<size_t>(2 * iy) * 2 * w) + 2 * ix;
                d0[0] = v;
                d0[1] = v;
                d0[2 * w] = v;
                d0[2 * w + 1] = v;
            }
        }
    }
    return y;
}

template <typename T>
void upsample2x_nearest_backward(TensorT<T>& x, const TensorT<T>& y) {
    if (y.grad.size() != y.size()) throw NumericError("upsample2x_backward: grad missing");
    const int h = x.shape[2], w = x.shape[3];
    x.ensure_grad();
    const int planes = x.shape[0] * x.shape[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        T* gx = x.grad.data() + static_cast<size_t>(p) * h * w;
        const T* gy = y.grad.data() + static_cast<size_t>(p) * 4 * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                const T* g0 = gy + (static_cast<size_t>(2 * iy) * 2 * w) + 2 * ix;
                gx[static_cast<size_t>(iy) * w + ix] += g0[0] + g0[1] + g0[2 * w] + g0[2 * w + 1];
            }
        }
    }
}

#define RAINDIFF_INSTANTIATE_OPS(T)                                                              \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int,  \
                                  int);                                                          \
    template void conv2d_backward<T>(TensorT<T>&, TensorT<T>&, TensorT<T>&, const TensorT<T>&,   \
                                     int, int, bool);                                            \
    template TensorT<T> bilinear_resize<T>(const TensorT<T>&, int, int);                         \
    template void bilinear_resize_backward<T>(TensorT<T>&, const TensorT<T>&);                   \
    template TensorT<T> group_norm<T>(const TensorT<T>&, int, const TensorT<T>&,                 \
                                      const TensorT<T>&);                                        \
    template void group_norm_backward<T>(TensorT<T>&, TensorT<T>&, TensorT<T>&,                  \
                                         const TensorT<T>&, int);                                \
    template TensorT<T> silu<T>(const TensorT<T>&);                                              \
    template void silu_backward<T>(TensorT<T>&, const TensorT<T>&);                              \
    template TensorT<T> relu<T>(const TensorT<T>&);                                              \
    template void relu_backward<T>(TensorT<T>&, const TensorT<T>&);                              \
    template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);      \
    template void linear_backward<T>(TensorT<T>&, TensorT<T>&, TensorT<T>&, const TensorT<T>&);  \
    template TensorT<T> upsample2x_nearest<T>(const TensorT<T>&);                                \
    template void upsample2x_nearest_backward<T>(TensorT<T>&, const TensorT<T>&);

RAINDIFF_INSTANTIATE_OPS(float)
RAINDIFF_INSTANTIATE_OPS(double)

#undef RAINDIFF_INSTANTIATE_OPS

}  // namespace raindiff
