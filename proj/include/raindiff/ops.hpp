#pragma once

#include "raindiff/tensor.hpp"

namespace raindiff {

// All layer ops come in forward/backward pairs. Backward passes read
// out.grad and accumulate (+=) into the .grad buffers of their inputs;
// callers zero gradients before a pass. Every reduction runs in a fixed
// order per output element, so results do not depend on thread count.

// weight shape (out_c, in_c, k, k); bias shape (out_c, 1, 1, 1).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding);

template <typename T>
void conv2d_backward(TensorT<T>& input, TensorT<T>& weight, TensorT<T>& bias,
                     const TensorT<T>& output, int stride, int padding,
                     bool need_input_grad = true);

// align-corners-false sampling with edge clamping; exact on constant fields.
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& input, int out_h, int out_w);

template <typename T>
void bilinear_resize_backward(TensorT<T>& input, const TensorT<T>& output);

// gain/shift shape (1, C, 1, 1); stats per (batch, group), stabilizer 1e-5.
template <typename T>
TensorT<T> group_norm(const TensorT<T>& input, int groups, const TensorT<T>& gain,
                      const TensorT<T>& shift);

template <typename T>
void group_norm_backward(TensorT<T>& input, TensorT<T>& gain, TensorT<T>& shift,
                         const TensorT<T>& output, int groups);

template <typename T>
TensorT<T> silu(const TensorT<T>& input);

template <typename T>
void silu_backward(TensorT<T>& input, const TensorT<T>& output);

template <typename T>
TensorT<T> relu(const TensorT<T>& input);

template <typename T>
void relu_backward(TensorT<T>& input, const TensorT<T>& output);

// Row-major matrices carried as (rows, cols, 1, 1) tensors.
// weight shape (out_dim, in_dim, 1, 1); bias (out_dim, 1, 1, 1).
template <typename T>
TensorT<T> linear(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias);

template <typename T>
void linear_backward(TensorT<T>& input, TensorT<T>& weight, TensorT<T>& bias,
                     const TensorT<T>& output);

// 2x nearest-neighbor upsampling (paired with stride-2 convs in the U-Net).
template <typename T>
TensorT<T> upsample2x_nearest(const TensorT<T>& input);

template <typename T>
void upsample2x_nearest_backward(TensorT<T>& input, const TensorT<T>& output);

// C[M x N] += A[M x K] * B[K x N], row-major. Deterministic: each C element
// is reduced over k in ascending order by exactly one thread.
template <typename T>
void gemm_nn_add(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc);

}  // namespace raindiff
