#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "raindiff/errors.hpp"

namespace raindiff {

// Dense rank-4 array, row-major in (batch, channel, height, width) order,
// with an optional same-shape gradient buffer. Values are considered
// immutable once an op has produced them; gradients accumulate.
template <typename T>
struct TensorT {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<T> values;
    std::vector<T> grad;

    TensorT() = default;
    TensorT(int b, int c, int h, int w)
        : shape{b, c, h, w},
          values(static_cast<size_t>(b) * c * h * w, T(0)) {}

    int batch() const { return shape[0]; }
    int channels() const { return shape[1]; }
    int height() const { return shape[2]; }
    int width() const { return shape[3]; }
    size_t size() const { return values.size(); }

    size_t index(int b, int c, int h, int w) const {
        return ((static_cast<size_t>(b) * shape[1] + c) * shape[2] + h) * shape[3] + w;
    }
    T& at(int b, int c, int h, int w) { return values[index(b, c, h, w)]; }
    const T& at(int b, int c, int h, int w) const { return values[index(b, c, h, w)]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
std::string shape_string(const TensorT<T>& t) {
    return "(" + std::to_string(t.shape[0]) + "," + std::to_string(t.shape[1]) + "," +
           std::to_string(t.shape[2]) + "," + std::to_string(t.shape[3]) + ")";
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (const T v : t.values)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out(t.shape[0], t.shape[1], t.shape[2], t.shape[3]);
    for (size_t i = 0; i < t.values.size(); ++i) out.values[i] = static_cast<To>(t.values[i]);
    return out;
}

}  // namespace raindiff
