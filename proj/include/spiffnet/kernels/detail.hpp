#pragma once

#include <cmath>
#include <cstdint>

namespace spiffnet::kernels::detail {

template <typename T>
inline T gelu_tanh(T x) {
    const T c1 = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
    const T c2 = static_cast<T>(0.044715);
    return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::tanh(c1 * (x + c2 * x * x * x)));
}

template <typename T>
inline T gelu_tanh_grad(T x) {
    const T c1 = static_cast<T>(0.7978845608028654);
    const T c2 = static_cast<T>(0.044715);
    const T u = c1 * (x + c2 * x * x * x);
    const T t = std::tanh(u);
    const T du = c1 * (static_cast<T>(1) + static_cast<T>(3) * c2 * x * x);
    return static_cast<T>(0.5) * (static_cast<T>(1) + t) +
           static_cast<T>(0.5) * x * (static_cast<T>(1) - t * t) * du;
}

template <typename T>
inline void softmax_row(const T* x, T* y, int64_t n) {
    T m = x[0];
    for (int64_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    T s = 0;
    for (int64_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - m);
        s += y[i];
    }
    const T inv = static_cast<T>(1) / s;
    for (int64_t i = 0; i < n; ++i) y[i] *= inv;
}

// dx = (dy - <dy, y>) * y, given y = softmax(x)
template <typename T>
inline void softmax_row_grad(const T* y, const T* dy, T* dx, int64_t n) {
    T dot = 0;
    for (int64_t i = 0; i < n; ++i) dot += dy[i] * y[i];
    for (int64_t i = 0; i < n; ++i) dx[i] = (dy[i] - dot) * y[i];
}

template <typename T>
inline void layernorm_row(const T* x, const T* gamma, const T* beta, T* y, int64_t n, T eps,
                          T* mean_out, T* rstd_out) {
    T mu = 0;
    for (int64_t i = 0; i < n; ++i) mu += x[i];
    mu /= static_cast<T>(n);
    T var = 0;
    for (int64_t i = 0; i < n; ++i) {
        const T d = x[i] - mu;
        var += d * d;
    }
    var /= static_cast<T>(n);
    const T rstd = static_cast<T>(1) / std::sqrt(var + eps);
    for (int64_t i = 0; i < n; ++i) y[i] = (x[i] - mu) * rstd * gamma[i] + beta[i];
    *mean_out = mu;
    *rstd_out = rstd;
}

template <typename T>
inline void layernorm_row_grad_x(const T* x, const T* gamma, const T* dy, T* dx, int64_t n,
                                 T mean, T rstd) {
    T m1 = 0, m2 = 0;
    for (int64_t i = 0; i < n; ++i) {
        const T xh = (x[i] - mean) * rstd;
        const T dxh = dy[i] * gamma[i];
        m1 += dxh;
        m2 += dxh * xh;
    }
    m1 /= static_cast<T>(n);
    m2 /= static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) {
        const T xh = (x[i] - mean) * rstd;
        const T dxh = dy[i] * gamma[i];
        dx[i] += (dxh - m1 - xh * m2) * rstd;
    }
}

// Catmull-Rom cubic kernel, a = -0.5.
template <typename T>
inline T cubic_kernel(T t) {
    t = std::abs(t);
    if (t <= T(1)) return (T(1.5) * t - T(2.5)) * t * t + T(1);
    if (t < T(2)) return ((T(-0.5) * t + T(2.5)) * t - T(4)) * t + T(2);
    return T(0);
}

inline int64_t clamp_index(int64_t i, int64_t n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

}  // namespace spiffnet::kernels::detail
