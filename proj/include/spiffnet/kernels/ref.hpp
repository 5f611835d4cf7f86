#pragma once

// Serial reference kernels: the obvious loop nest for every operation,
// kept as an independent implementation for tests and benchmarks. The
// optimized OpenMP kernels in par.hpp must agree with these.

#include <cstdint>

#include "spiffnet/kernels/detail.hpp"

namespace spiffnet::kernels::ref {

// c = op_a(a) * op_b(b) + beta * c.
// a is logically (m,k), b is (k,n); trans_* means the operand is stored
// transposed.
template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool trans_a,
          bool trans_b, T beta) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t p = 0; p < k; ++p) {
                const T av = trans_a ? a[p * m + i] : a[i * k + p];
                const T bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            c[i * n + j] = beta == T(0) ? acc : beta * c[i * n + j] + acc;
        }
    }
}

// Direct sliding-window 3x3 convolution, zero padding 1, stride 1.
// x: (H,W,Cin), w: (3,3,Cin,Cout), y: (H,W,Cout).
template <typename T>
void conv3x3(const T* x, const T* w, const T* bias, T* y, int64_t H, int64_t W, int64_t Cin,
             int64_t Cout) {
    for (int64_t oy = 0; oy < H; ++oy) {
        for (int64_t ox = 0; ox < W; ++ox) {
            for (int64_t co = 0; co < Cout; ++co) {
                T acc = bias ? bias[co] : T(0);
                for (int64_t dy = 0; dy < 3; ++dy) {
                    for (int64_t dx = 0; dx < 3; ++dx) {
                        const int64_t iy = oy + dy - 1;
                        const int64_t ix = ox + dx - 1;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        const T* xp = x + (iy * W + ix) * Cin;
                        const T* wp = w + ((dy * 3 + dx) * Cin) * Cout + co;
                        for (int64_t ci = 0; ci < Cin; ++ci) acc += xp[ci] * wp[ci * Cout];
                    }
                }
                y[(oy * W + ox) * Cout + co] = acc;
            }
        }
    }
}

// Depthwise 3x3, zero padding 1. w: (3,3,C).
template <typename T>
void dwconv3x3(const T* x, const T* w, const T* bias, T* y, int64_t H, int64_t W, int64_t C) {
    for (int64_t oy = 0; oy < H; ++oy) {
        for (int64_t ox = 0; ox < W; ++ox) {
            for (int64_t c = 0; c < C; ++c) {
                T acc = bias ? bias[c] : T(0);
                for (int64_t dy = 0; dy < 3; ++dy) {
                    for (int64_t dx = 0; dx < 3; ++dx) {
                        const int64_t iy = oy + dy - 1;
                        const int64_t ix = ox + dx - 1;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        acc += x[(iy * W + ix) * C + c] * w[(dy * 3 + dx) * C + c];
                    }
                }
                y[(oy * W + ox) * C + c] = acc;
            }
        }
    }
}

// Grouped 1x1 convolution over flattened pixels.
// x: (P, Cin), w: (groups, cin_g, cout_g), y: (P, Cout).
template <typename T>
void pwconv(const T* x, const T* w, const T* bias, T* y, int64_t P, int64_t Cin, int64_t Cout,
            int64_t groups) {
    const int64_t cin_g = Cin / groups;
    const int64_t cout_g = Cout / groups;
    for (int64_t p = 0; p < P; ++p) {
        for (int64_t g = 0; g < groups; ++g) {
            const T* xp = x + p * Cin + g * cin_g;
            const T* wg = w + g * cin_g * cout_g;
            T* yp = y + p * Cout + g * cout_g;
            for (int64_t co = 0; co < cout_g; ++co) {
                T acc = bias ? bias[g * cout_g + co] : T(0);
                for (int64_t ci = 0; ci < cin_g; ++ci) acc += xp[ci] * wg[ci * cout_g + co];
                yp[co] = acc;
            }
        }
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t n) {
    for (int64_t r = 0; r < rows; ++r) detail::softmax_row(x + r * n, y + r * n, n);
}

template <typename T>
void layernorm_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd,
                    int64_t rows, int64_t n, T eps) {
    for (int64_t r = 0; r < rows; ++r)
        detail::layernorm_row(x + r * n, gamma, beta, y + r * n, n, eps, mean + r, rstd + r);
}

// y: (outer, inner) = mean over the middle axis of x: (outer, axis, inner).
template <typename T>
void mean_axis(const T* x, T* y, int64_t outer, int64_t axis, int64_t inner) {
    const T inv = static_cast<T>(1) / static_cast<T>(axis);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            T acc = 0;
            for (int64_t a = 0; a < axis; ++a) acc += x[(o * axis + a) * inner + i];
            y[o * inner + i] = acc * inv;
        }
    }
}

// out(y*r+dy, x*r+dx, c) = in(y, x, c*r*r + dy*r + dx)
template <typename T>
void pixel_shuffle(const T* x, T* y, int64_t H, int64_t W, int64_t Cout, int64_t r) {
    const int64_t Cin = Cout * r * r;
    for (int64_t iy = 0; iy < H; ++iy)
        for (int64_t ix = 0; ix < W; ++ix)
            for (int64_t c = 0; c < Cout; ++c)
                for (int64_t dy = 0; dy < r; ++dy)
                    for (int64_t dx = 0; dx < r; ++dx)
                        y[((iy * r + dy) * (W * r) + (ix * r + dx)) * Cout + c] =
                            x[(iy * W + ix) * Cin + c * r * r + dy * r + dx];
}

template <typename T>
void pixel_unshuffle(const T* y, T* x, int64_t H, int64_t W, int64_t Cout, int64_t r) {
    const int64_t Cin = Cout * r * r;
    for (int64_t iy = 0; iy < H; ++iy)
        for (int64_t ix = 0; ix < W; ++ix)
            for (int64_t c = 0; c < Cout; ++c)
                for (int64_t dy = 0; dy < r; ++dy)
                    for (int64_t dx = 0; dx < r; ++dx)
                        x[(iy * W + ix) * Cin + c * r * r + dy * r + dx] =
                            y[((iy * r + dy) * (W * r) + (ix * r + dx)) * Cout + c];
}

// Bilinear upscale by integer factor, align-corners-false, edge clamped.
template <typename T>
void bilinear_up(const T* x, T* y, int64_t H, int64_t W, int64_t C, int64_t r) {
    const int64_t OH = H * r, OW = W * r;
    for (int64_t oy = 0; oy < OH; ++oy) {
        const T sy = (static_cast<T>(oy) + T(0.5)) / static_cast<T>(r) - T(0.5);
        const int64_t y0f = static_cast<int64_t>(std::floor(sy));
        const T fy = sy - static_cast<T>(y0f);
        const int64_t y0 = detail::clamp_index(y0f, H);
        const int64_t y1 = detail::clamp_index(y0f + 1, H);
        for (int64_t ox = 0; ox < OW; ++ox) {
            const T sx = (static_cast<T>(ox) + T(0.5)) / static_cast<T>(r) - T(0.5);
            const int64_t x0f = static_cast<int64_t>(std::floor(sx));
            const T fx = sx - static_cast<T>(x0f);
            const int64_t x0 = detail::clamp_index(x0f, W);
            const int64_t x1 = detail::clamp_index(x0f + 1, W);
            const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
            const T w10 = fy * (T(1) - fx), w11 = fy * fx;
            for (int64_t c = 0; c < C; ++c) {
                y[(oy * OW + ox) * C + c] = w00 * x[(y0 * W + x0) * C + c] +
                                            w01 * x[(y0 * W + x1) * C + c] +
                                            w10 * x[(y1 * W + x0) * C + c] +
                                            w11 * x[(y1 * W + x1) * C + c];
            }
        }
    }
}

}  // namespace spiffnet::kernels::ref
