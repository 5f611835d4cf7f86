#pragma once

// OpenMP-parallel kernels. Parallelism is always over independent output
// elements and every per-element reduction runs in a fixed serial order, so
// results are bit-identical for any thread count (and match ref.hpp up to
// floating-point contraction).

#include <cstdint>
#include <vector>

#include "spiffnet/kernels/detail.hpp"

namespace spiffnet::kernels::par {

constexpr int64_t kParGrain = 2048;  // skip thread fan-out below this many elements

template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool trans_a,
          bool trans_b, T beta) {
    if (!trans_a && !trans_b) {
#pragma omp parallel for if (m * n * k > kParGrain) schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            T* crow = c + i * n;
            if (beta == T(0)) {
                for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
            } else if (beta != T(1)) {
                for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
            }
            const T* arow = a + i * k;
            for (int64_t p = 0; p < k; ++p) {
                const T av = arow[p];
                const T* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
#pragma omp parallel for if (m * n * k > kParGrain) schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            const T* arow = a + i * k;
            for (int64_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T acc = 0;
                for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                c[i * n + j] = beta == T(0) ? acc : beta * c[i * n + j] + acc;
            }
        }
    } else if (trans_a && !trans_b) {
#pragma omp parallel for if (m * n * k > kParGrain) schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            T* crow = c + i * n;
            if (beta == T(0)) {
                for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
            } else if (beta != T(1)) {
                for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
            }
            for (int64_t p = 0; p < k; ++p) {
                const T av = a[p * m + i];
                const T* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
#pragma omp parallel for if (m * n * k > kParGrain) schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                T acc = 0;
                for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
                c[i * n + j] = beta == T(0) ? acc : beta * c[i * n + j] + acc;
            }
        }
    }
}

// Batched (B,m,k) x (B,k,n) -> (B,m,n); trans_b interprets b as (B,n,k).
template <typename T>
void gemm_batched(const T* a, const T* b, T* c, int64_t B, int64_t m, int64_t k, int64_t n,
                  bool trans_a, bool trans_b) {
#pragma omp parallel for collapse(2) if (B * m * n * k > kParGrain) schedule(static)
    for (int64_t bb = 0; bb < B; ++bb) {
        for (int64_t i = 0; i < m; ++i) {
            const T* ab = a + bb * m * k;
            const T* brow0 = b + bb * k * n;
            T* crow = c + (bb * m + i) * n;
            if (!trans_a && trans_b) {
                const T* arow = ab + i * k;
                for (int64_t j = 0; j < n; ++j) {
                    const T* brow = brow0 + j * k;
                    T acc = 0;
                    for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                    crow[j] = acc;
                }
            } else if (!trans_a && !trans_b) {
                for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
                const T* arow = ab + i * k;
                for (int64_t p = 0; p < k; ++p) {
                    const T av = arow[p];
                    const T* brow = brow0 + p * n;
                    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            } else if (trans_a && !trans_b) {
                for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
                for (int64_t p = 0; p < k; ++p) {
                    const T av = ab[p * m + i];
                    const T* brow = brow0 + p * n;
                    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            } else {
                for (int64_t j = 0; j < n; ++j) {
                    T acc = 0;
                    for (int64_t p = 0; p < k; ++p) acc += ab[p * m + i] * brow0[j * k + p];
                    crow[j] = acc;
                }
            }
        }
    }
}

// ---- 3x3 convolution via im2col + GEMM ----

// x: (H,W,C) -> col: (H*W, 9*C), tap-major (dy,dx,ci), zero padding 1.
template <typename T>
void im2col3x3(const T* x, T* col, int64_t H, int64_t W, int64_t C) {
#pragma omp parallel for collapse(2) if (H * W * C > kParGrain) schedule(static)
    for (int64_t oy = 0; oy < H; ++oy) {
        for (int64_t ox = 0; ox < W; ++ox) {
            T* cp = col + (oy * W + ox) * 9 * C;
            for (int64_t dy = 0; dy < 3; ++dy) {
                for (int64_t dx = 0; dx < 3; ++dx) {
                    const int64_t iy = oy + dy - 1;
                    const int64_t ix = ox + dx - 1;
                    T* dst = cp + (dy * 3 + dx) * C;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
                        for (int64_t c = 0; c < C; ++c) dst[c] = T(0);
                    } else {
                        const T* src = x + (iy * W + ix) * C;
                        for (int64_t c = 0; c < C; ++c) dst[c] = src[c];
                    }
                }
            }
        }
    }
}

// Gather-form inverse of im2col3x3; accumulates into dx.
template <typename T>
void col2im3x3_add(const T* dcol, T* dx, int64_t H, int64_t W, int64_t C) {
#pragma omp parallel for collapse(2) if (H * W * C > kParGrain) schedule(static)
    for (int64_t iy = 0; iy < H; ++iy) {
        for (int64_t ix = 0; ix < W; ++ix) {
            T* dst = dx + (iy * W + ix) * C;
            for (int64_t dy = 0; dy < 3; ++dy) {
                for (int64_t dx3 = 0; dx3 < 3; ++dx3) {
                    const int64_t oy = iy - dy + 1;
                    const int64_t ox = ix - dx3 + 1;
                    if (oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
                    const T* src = dcol + (oy * W + ox) * 9 * C + (dy * 3 + dx3) * C;
                    for (int64_t c = 0; c < C; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

template <typename T>
void conv3x3(const T* x, const T* w, const T* bias, T* y, int64_t H, int64_t W, int64_t Cin,
             int64_t Cout) {
    std::vector<T> col(static_cast<size_t>(H * W * 9 * Cin));
    im2col3x3(x, col.data(), H, W, Cin);
    gemm(col.data(), w, y, H * W, 9 * Cin, Cout, false, false, T(0));
    if (bias) {
        const int64_t P = H * W;
#pragma omp parallel for if (P * Cout > kParGrain) schedule(static)
        for (int64_t p = 0; p < P; ++p)
            for (int64_t c = 0; c < Cout; ++c) y[p * Cout + c] += bias[c];
    }
}

// dw/db/dx may be null to skip. dw: (9*Cin, Cout) accumulated, db: (Cout,), dx accumulated.
template <typename T>
void conv3x3_bwd(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db, int64_t H, int64_t W,
                 int64_t Cin, int64_t Cout) {
    const int64_t P = H * W;
    std::vector<T> col;
    if (dw) {
        col.resize(static_cast<size_t>(P * 9 * Cin));
        im2col3x3(x, col.data(), H, W, Cin);
        gemm(col.data(), dy, dw, 9 * Cin, P, Cout, true, false, T(1));
    }
    if (db) {
#pragma omp parallel for if (Cout > 8) schedule(static)
        for (int64_t c = 0; c < Cout; ++c) {
            T acc = 0;
            for (int64_t p = 0; p < P; ++p) acc += dy[p * Cout + c];
            db[c] += acc;
        }
    }
    if (dx) {
        std::vector<T> dcol(static_cast<size_t>(P * 9 * Cin));
        gemm(dy, w, dcol.data(), P, Cout, 9 * Cin, false, true, T(0));
        col2im3x3_add(dcol.data(), dx, H, W, Cin);
    }
}

template <typename T>
void dwconv3x3(const T* x, const T* w, const T* bias, T* y, int64_t H, int64_t W, int64_t C) {
#pragma omp parallel for collapse(2) if (H * W * C > kParGrain) schedule(static)
    for (int64_t oy = 0; oy < H; ++oy) {
        for (int64_t ox = 0; ox < W; ++ox) {
            T* yp = y + (oy * W + ox) * C;
            for (int64_t c = 0; c < C; ++c) yp[c] = bias ? bias[c] : T(0);
            for (int64_t dy = 0; dy < 3; ++dy) {
                for (int64_t dx = 0; dx < 3; ++dx) {
                    const int64_t iy = oy + dy - 1;
                    const int64_t ix = ox + dx - 1;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                    const T* xp = x + (iy * W + ix) * C;
                    const T* wp = w + (dy * 3 + dx) * C;
                    for (int64_t c = 0; c < C; ++c) yp[c] += xp[c] * wp[c];
                }
            }
        }
    }
}

template <typename T>
void dwconv3x3_bwd(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db, int64_t H,
                   int64_t W, int64_t C) {
    if (dx) {
#pragma omp parallel for collapse(2) if (H * W * C > kParGrain) schedule(static)
        for (int64_t iy = 0; iy < H; ++iy) {
            for (int64_t ix = 0; ix < W; ++ix) {
                T* dst = dx + (iy * W + ix) * C;
                for (int64_t dyk = 0; dyk < 3; ++dyk) {
                    for (int64_t dxk = 0; dxk < 3; ++dxk) {
                        const int64_t oy = iy - dyk + 1;
                        const int64_t ox = ix - dxk + 1;
                        if (oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
                        const T* g = dy + (oy * W + ox) * C;
                        const T* wp = w + (dyk * 3 + dxk) * C;
                        for (int64_t c = 0; c < C; ++c) dst[c] += g[c] * wp[c];
                    }
                }
            }
        }
    }
    if (dw) {
#pragma omp parallel for collapse(2) if (C > 4) schedule(static)
        for (int64_t tap = 0; tap < 9; ++tap) {
            for (int64_t c = 0; c < C; ++c) {
                const int64_t dyk = tap / 3, dxk = tap % 3;
                T acc = 0;
                for (int64_t oy = 0; oy < H; ++oy) {
                    const int64_t iy = oy + dyk - 1;
                    if (iy < 0 || iy >= H) continue;
                    for (int64_t ox = 0; ox < W; ++ox) {
                        const int64_t ix = ox + dxk - 1;
                        if (ix < 0 || ix >= W) continue;
                        acc += x[(iy * W + ix) * C + c] * dy[(oy * W + ox) * C + c];
                    }
                }
                dw[tap * C + c] += acc;
            }
        }
    }
    if (db) {
#pragma omp parallel for if (C > 8) schedule(static)
        for (int64_t c = 0; c < C; ++c) {
            T acc = 0;
            for (int64_t p = 0; p < H * W; ++p) acc += dy[p * C + c];
            db[c] += acc;
        }
    }
}

// Grouped 1x1 convolution. w: (groups, cin_g, cout_g).
template <typename T>
void pwconv(const T* x, const T* w, const T* bias, T* y, int64_t P, int64_t Cin, int64_t Cout,
            int64_t groups) {
    if (groups == 1) {
        gemm(x, w, y, P, Cin, Cout, false, false, T(0));
        if (bias) {
#pragma omp parallel for if (P * Cout > kParGrain) schedule(static)
            for (int64_t p = 0; p < P; ++p)
                for (int64_t c = 0; c < Cout; ++c) y[p * Cout + c] += bias[c];
        }
        return;
    }
    const int64_t cin_g = Cin / groups;
    const int64_t cout_g = Cout / groups;
#pragma omp parallel for if (P * Cout * cin_g > kParGrain) schedule(static)
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
void pwconv_bwd(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db, int64_t P, int64_t Cin,
                int64_t Cout, int64_t groups) {
    const int64_t cin_g = Cin / groups;
    const int64_t cout_g = Cout / groups;
    if (dx) {
        if (groups == 1) {
            gemm(dy, w, dx, P, Cout, Cin, false, true, T(1));
        } else {
#pragma omp parallel for if (P * Cin * cout_g > kParGrain) schedule(static)
            for (int64_t p = 0; p < P; ++p) {
                for (int64_t g = 0; g < groups; ++g) {
                    const T* gp = dy + p * Cout + g * cout_g;
                    const T* wg = w + g * cin_g * cout_g;
                    T* dst = dx + p * Cin + g * cin_g;
                    for (int64_t ci = 0; ci < cin_g; ++ci) {
                        T acc = 0;
                        for (int64_t co = 0; co < cout_g; ++co) acc += gp[co] * wg[ci * cout_g + co];
                        dst[ci] += acc;
                    }
                }
            }
        }
    }
    if (dw) {
#pragma omp parallel for collapse(2) if (groups * cin_g * cout_g > 16) schedule(static)
        for (int64_t g = 0; g < groups; ++g) {
            for (int64_t ci = 0; ci < cin_g; ++ci) {
                for (int64_t co = 0; co < cout_g; ++co) {
                    T acc = 0;
                    for (int64_t p = 0; p < P; ++p)
                        acc += x[p * Cin + g * cin_g + ci] * dy[p * Cout + g * cout_g + co];
                    dw[(g * cin_g + ci) * cout_g + co] += acc;
                }
            }
        }
    }
    if (db) {
#pragma omp parallel for if (Cout > 8) schedule(static)
        for (int64_t c = 0; c < Cout; ++c) {
            T acc = 0;
            for (int64_t p = 0; p < P; ++p) acc += dy[p * Cout + c];
            db[c] += acc;
        }
    }
}

// ---- rowwise normalizations ----

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t n) {
#pragma omp parallel for if (rows * n > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r) detail::softmax_row(x + r * n, y + r * n, n);
}

template <typename T>
void softmax_rows_grad(const T* y, const T* dy, T* dx, int64_t rows, int64_t n) {
#pragma omp parallel for if (rows * n > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        T dot = 0;
        const T* yr = y + r * n;
        const T* gr = dy + r * n;
        T* dr = dx + r * n;
        for (int64_t i = 0; i < n; ++i) dot += gr[i] * yr[i];
        for (int64_t i = 0; i < n; ++i) dr[i] += (gr[i] - dot) * yr[i];
    }
}

template <typename T>
void layernorm_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd,
                    int64_t rows, int64_t n, T eps) {
#pragma omp parallel for if (rows * n > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        detail::layernorm_row(x + r * n, gamma, beta, y + r * n, n, eps, mean + r, rstd + r);
}

template <typename T>
void layernorm_rows_grad_x(const T* x, const T* gamma, const T* dy, T* dx, const T* mean,
                           const T* rstd, int64_t rows, int64_t n) {
#pragma omp parallel for if (rows * n > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        detail::layernorm_row_grad_x(x + r * n, gamma, dy + r * n, dx + r * n, n, mean[r],
                                     rstd[r]);
}

template <typename T>
void layernorm_rows_grad_affine(const T* x, const T* dy, T* dgamma, T* dbeta, const T* mean,
                                const T* rstd, int64_t rows, int64_t n) {
#pragma omp parallel for if (n > 8) schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        T dg = 0, db = 0;
        for (int64_t r = 0; r < rows; ++r) {
            const T xh = (x[r * n + i] - mean[r]) * rstd[r];
            dg += dy[r * n + i] * xh;
            db += dy[r * n + i];
        }
        dgamma[i] += dg;
        dbeta[i] += db;
    }
}

// ---- reductions / data movement ----

template <typename T>
void mean_axis(const T* x, T* y, int64_t outer, int64_t axis, int64_t inner) {
    const T inv = static_cast<T>(1) / static_cast<T>(axis);
#pragma omp parallel for collapse(2) if (outer * inner * axis > kParGrain) schedule(static)
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            T acc = 0;
            for (int64_t a = 0; a < axis; ++a) acc += x[(o * axis + a) * inner + i];
            y[o * inner + i] = acc * inv;
        }
    }
}

template <typename T>
void mean_axis_bwd(const T* dy, T* dx, int64_t outer, int64_t axis, int64_t inner) {
    const T inv = static_cast<T>(1) / static_cast<T>(axis);
#pragma omp parallel for collapse(2) if (outer * inner * axis > kParGrain) schedule(static)
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t a = 0; a < axis; ++a) {
            const T* g = dy + o * inner;
            T* d = dx + (o * axis + a) * inner;
            for (int64_t i = 0; i < inner; ++i) d[i] += g[i] * inv;
        }
    }
}

// Serial on purpose: a single fixed summation order keeps runs bit-reproducible.
template <typename T>
T sum_all(const T* x, int64_t n) {
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void axpy(const T* x, T* y, int64_t n, T alpha) {
#pragma omp parallel for if (n > kParGrain) schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void pixel_shuffle(const T* x, T* y, int64_t H, int64_t W, int64_t Cout, int64_t r) {
    const int64_t Cin = Cout * r * r;
#pragma omp parallel for collapse(2) if (H * W * Cin > kParGrain) schedule(static)
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
#pragma omp parallel for collapse(2) if (H * W * Cin > kParGrain) schedule(static)
    for (int64_t iy = 0; iy < H; ++iy)
        for (int64_t ix = 0; ix < W; ++ix)
            for (int64_t c = 0; c < Cout; ++c)
                for (int64_t dy = 0; dy < r; ++dy)
                    for (int64_t dx = 0; dx < r; ++dx)
                        x[(iy * W + ix) * Cin + c * r * r + dy * r + dx] =
                            y[((iy * r + dy) * (W * r) + (ix * r + dx)) * Cout + c];
}

template <typename T>
void bilinear_up(const T* x, T* y, int64_t H, int64_t W, int64_t C, int64_t r) {
    const int64_t OH = H * r, OW = W * r;
#pragma omp parallel for if (OH * OW * C > kParGrain) schedule(static)
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
            const T* r0 = x + (y0 * W + x0) * C;
            const T* r1 = x + (y0 * W + x1) * C;
            const T* r2 = x + (y1 * W + x0) * C;
            const T* r3 = x + (y1 * W + x1) * C;
            T* yp = y + (oy * OW + ox) * C;
            for (int64_t c = 0; c < C; ++c)
                yp[c] = w00 * r0[c] + w01 * r1[c] + w10 * r2[c] + w11 * r3[c];
        }
    }
}

// Gather formulation of the transpose of bilinear_up; accumulates into dx.
template <typename T>
void bilinear_up_bwd(const T* dy, T* dx, int64_t H, int64_t W, int64_t C, int64_t r) {
    const int64_t OH = H * r, OW = W * r;
#pragma omp parallel for if (H * W * C > kParGrain) schedule(static)
    for (int64_t iy = 0; iy < H; ++iy) {
        const int64_t oy_lo = std::max<int64_t>(0, (iy - 1) * r);
        const int64_t oy_hi = std::min<int64_t>(OH - 1, (iy + 2) * r - 1);
        for (int64_t ix = 0; ix < W; ++ix) {
            const int64_t ox_lo = std::max<int64_t>(0, (ix - 1) * r);
            const int64_t ox_hi = std::min<int64_t>(OW - 1, (ix + 2) * r - 1);
            T* dst = dx + (iy * W + ix) * C;
            for (int64_t oy = oy_lo; oy <= oy_hi; ++oy) {
                const T sy = (static_cast<T>(oy) + T(0.5)) / static_cast<T>(r) - T(0.5);
                const int64_t y0f = static_cast<int64_t>(std::floor(sy));
                const T fy = sy - static_cast<T>(y0f);
                T wy = 0;
                if (detail::clamp_index(y0f, H) == iy) wy += T(1) - fy;
                if (detail::clamp_index(y0f + 1, H) == iy) wy += fy;
                if (wy == T(0)) continue;
                for (int64_t ox = ox_lo; ox <= ox_hi; ++ox) {
                    const T sx = (static_cast<T>(ox) + T(0.5)) / static_cast<T>(r) - T(0.5);
                    const int64_t x0f = static_cast<int64_t>(std::floor(sx));
                    const T fx = sx - static_cast<T>(x0f);
                    T wx = 0;
                    if (detail::clamp_index(x0f, W) == ix) wx += T(1) - fx;
                    if (detail::clamp_index(x0f + 1, W) == ix) wx += fx;
                    if (wx == T(0)) continue;
                    const T wgt = wy * wx;
                    const T* g = dy + (oy * OW + ox) * C;
                    for (int64_t c = 0; c < C; ++c) dst[c] += wgt * g[c];
                }
            }
        }
    }
}

// Reflect padding on the bottom/right edges only (pad < dim).
template <typename T>
void reflect_pad_br(const T* x, T* y, int64_t H, int64_t W, int64_t C, int64_t ph, int64_t pw) {
    const int64_t OH = H + ph, OW = W + pw;
#pragma omp parallel for if (OH * OW * C > kParGrain) schedule(static)
    for (int64_t oy = 0; oy < OH; ++oy) {
        const int64_t sy = oy < H ? oy : 2 * H - 2 - oy;
        for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t sx = ox < W ? ox : 2 * W - 2 - ox;
            const T* src = x + (sy * W + sx) * C;
            T* dst = y + (oy * OW + ox) * C;
            for (int64_t c = 0; c < C; ++c) dst[c] = src[c];
        }
    }
}

template <typename T>
void reflect_pad_br_bwd(const T* dy, T* dx, int64_t H, int64_t W, int64_t C, int64_t ph,
                        int64_t pw) {
    const int64_t OW = W + pw;
#pragma omp parallel for if (H * W * C > kParGrain) schedule(static)
    for (int64_t iy = 0; iy < H; ++iy) {
        // padded rows sourcing row iy: iy itself, plus its mirror if in range
        const int64_t my = 2 * H - 2 - iy;
        const bool has_my = my >= H && my < H + ph;
        for (int64_t ix = 0; ix < W; ++ix) {
            const int64_t mx = 2 * W - 2 - ix;
            const bool has_mx = mx >= W && mx < W + pw;
            T* dst = dx + (iy * W + ix) * C;
            for (int64_t c = 0; c < C; ++c) {
                T acc = dy[(iy * OW + ix) * C + c];
                if (has_mx) acc += dy[(iy * OW + mx) * C + c];
                if (has_my) acc += dy[(my * OW + ix) * C + c];
                if (has_my && has_mx) acc += dy[(my * OW + mx) * C + c];
                dst[c] += acc;
            }
        }
    }
}

template <typename T, typename F>
void map(const T* x, T* y, int64_t n, F f) {
#pragma omp parallel for if (n > kParGrain) schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <typename T, typename F>
void zip(const T* a, const T* b, T* y, int64_t n, F f) {
#pragma omp parallel for if (n > kParGrain) schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
}

// Elementwise binary op with precomputed (possibly zero) strides per output
// dim; handles numpy-style broadcasting. All shapes share rank.
template <typename T, typename F>
void zip_strided(const T* a, const T* b, T* y, const int64_t* dims, const int64_t* astr,
                 const int64_t* bstr, int64_t rank, int64_t n, F f) {
#pragma omp parallel for if (n > kParGrain) schedule(static)
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t rem = flat, ao = 0, bo = 0;
        for (int64_t d = rank; d-- > 0;) {
            const int64_t idx = rem % dims[d];
            rem /= dims[d];
            ao += idx * astr[d];
            bo += idx * bstr[d];
        }
        y[flat] = f(a[ao], b[bo]);
    }
}

// y[perm-permuted index] = x[index]; ostr_of_in[d] = stride of output dim
// holding input dim d.
template <typename T>
void permute_copy(const T* x, T* y, const int64_t* in_dims, const int64_t* out_stride_of_in,
                  int64_t rank, int64_t n) {
#pragma omp parallel for if (n > kParGrain) schedule(static)
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t rem = flat, off = 0;
        for (int64_t d = rank; d-- > 0;) {
            const int64_t idx = rem % in_dims[d];
            rem /= in_dims[d];
            off += idx * out_stride_of_in[d];
        }
        y[off] = x[flat];
    }
}

template <typename T>
void concat_lastdim(const T* a, const T* b, T* y, int64_t rows, int64_t ca, int64_t cb) {
#pragma omp parallel for if (rows * (ca + cb) > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        T* yp = y + r * (ca + cb);
        const T* ap = a + r * ca;
        const T* bp = b + r * cb;
        for (int64_t i = 0; i < ca; ++i) yp[i] = ap[i];
        for (int64_t i = 0; i < cb; ++i) yp[ca + i] = bp[i];
    }
}

template <typename T>
void slice_lastdim_add(const T* y, T* part, int64_t rows, int64_t ctotal, int64_t offset,
                       int64_t cpart) {
#pragma omp parallel for if (rows * cpart > kParGrain) schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const T* yp = y + r * ctotal + offset;
        T* pp = part + r * cpart;
        for (int64_t i = 0; i < cpart; ++i) pp[i] += yp[i];
    }
}

template <typename T>
void crop_tl(const T* x, T* y, int64_t H, int64_t W, int64_t C, int64_t oh, int64_t ow) {
#pragma omp parallel for if (oh * ow * C > kParGrain) schedule(static)
    for (int64_t r = 0; r < oh; ++r) {
        const T* src = x + r * W * C;
        T* dst = y + r * ow * C;
        for (int64_t i = 0; i < ow * C; ++i) dst[i] = src[i];
    }
}

template <typename T>
void crop_tl_bwd(const T* dy, T* dx, int64_t H, int64_t W, int64_t C, int64_t oh, int64_t ow) {
#pragma omp parallel for if (oh * ow * C > kParGrain) schedule(static)
    for (int64_t r = 0; r < oh; ++r) {
        const T* src = dy + r * ow * C;
        T* dst = dx + r * W * C;
        for (int64_t i = 0; i < ow * C; ++i) dst[i] += src[i];
    }
}

}  // namespace spiffnet::kernels::par
