#pragma once

// Spatial Division: lossless partition of a (H,W,C) feature map into
// windows and the exact inverse paste. Local windows are contiguous G x G
// tiles; contextual windows take every I-th pixel so that one window spans
// the whole map.

#include "spiffnet/ops.hpp"

namespace spiffnet::win {

enum class Strategy { Local, Contextual };

struct WindowMeta {
    Strategy strategy = Strategy::Local;
    int64_t H = 0, W = 0, C = 0;
    int64_t gh = 0, gw = 0;  // window dims
    int64_t ih = 0, iw = 0;  // sampling interval per axis (contextual)

    int64_t count() const {
        return strategy == Strategy::Local ? (H / gh) * (W / gw) : ih * iw;
    }
    int64_t window_pixels() const { return gh * gw; }
};

template <typename T>
struct WindowSet {
    Var<T> windows;  // (count, gh*gw, C), raster order inside each window
    WindowMeta meta;
};

namespace detail {

// dir = +1: map -> windows, dir = -1: windows -> map (accumulating).
template <typename T, int dir>
void copy_windows(const T* a, T* b, const WindowMeta& m) {
    const int64_t n = m.count();
    const int64_t P = m.window_pixels();
#pragma omp parallel for if (n * P * m.C > kernels::par::kParGrain) schedule(static)
    for (int64_t k = 0; k < n; ++k) {
        for (int64_t p = 0; p < P; ++p) {
            int64_t sy, sx;
            if (m.strategy == Strategy::Local) {
                const int64_t tiles_x = m.W / m.gw;
                const int64_t ty = k / tiles_x, tx = k % tiles_x;
                sy = ty * m.gh + p / m.gw;
                sx = tx * m.gw + p % m.gw;
            } else {
                const int64_t a0 = k / m.iw, b0 = k % m.iw;
                const int64_t i = p / m.gw, j = p % m.gw;
                sy = a0 + i * m.ih;
                sx = b0 + j * m.iw;
            }
            const T* src;
            T* dst;
            if constexpr (dir > 0) {
                src = a + (sy * m.W + sx) * m.C;
                dst = b + (k * P + p) * m.C;
                for (int64_t c = 0; c < m.C; ++c) dst[c] = src[c];
            } else {
                src = a + (k * P + p) * m.C;
                dst = b + (sy * m.W + sx) * m.C;
                for (int64_t c = 0; c < m.C; ++c) dst[c] += src[c];
            }
        }
    }
}

template <typename T>
WindowSet<T> partition(const Var<T>& fmap, WindowMeta m) {
    Tensor<T> out({m.count(), m.window_pixels(), m.C});
    copy_windows<T, 1>(fmap.value().data(), out.data(), m);
    Var<T> v = spiffnet::detail::make_op<T>(
        std::move(out), m.strategy == Strategy::Local ? "partition_local" : "partition_context",
        fmap.requires_grad(), [fmap, m](Node<T>* self) {
            return [fmap, m, self]() {
                Tensor<T> dx = Tensor<T>::zeros(fmap.shape());
                copy_windows<T, -1>(self->grad.data(), dx.data(), m);
                fmap.raw()->accumulate(dx);
            };
        });
    return {v, m};
}

}  // namespace detail

// Adjacent G x G tiles in raster order; raster pixel order inside a window.
template <typename T>
WindowSet<T> partition_local(const Var<T>& fmap, int64_t G) {
    const Shape& s = fmap.shape();
    require(s.size() == 3, "partition_local: input must be (H,W,C)");
    require(G > 0 && s[0] % G == 0 && s[1] % G == 0,
            "partition_local: dims " + shape_str(s) + " not divisible by G=" + std::to_string(G));
    WindowMeta m{Strategy::Local, s[0], s[1], s[2], G, G, 0, 0};
    return detail::partition(fmap, m);
}

// Strided sampling: window (a,b) holds pixels (a + i*ih, b + j*iw).
template <typename T>
WindowSet<T> partition_context(const Var<T>& fmap, int64_t ih, int64_t iw) {
    const Shape& s = fmap.shape();
    require(s.size() == 3, "partition_context: input must be (H,W,C)");
    require(ih > 0 && iw > 0 && s[0] % ih == 0 && s[1] % iw == 0,
            "partition_context: dims " + shape_str(s) + " not divisible by interval (" +
                std::to_string(ih) + "," + std::to_string(iw) + ")");
    WindowMeta m{Strategy::Contextual, s[0], s[1], s[2], s[0] / ih, s[1] / iw, ih, iw};
    return detail::partition(fmap, m);
}

template <typename T>
WindowSet<T> partition_context(const Var<T>& fmap, int64_t I) {
    return partition_context(fmap, I, I);
}

// Exact inverse of the partition that produced ws.
template <typename T>
Var<T> aggregate(const WindowSet<T>& ws) {
    const WindowMeta& m = ws.meta;
    const Shape& s = ws.windows.shape();
    require(s.size() == 3 && s[0] == m.count() && s[1] == m.window_pixels() && s[2] == m.C,
            "aggregate: window tensor " + shape_str(s) + " inconsistent with metadata");
    Tensor<T> out = Tensor<T>::zeros({m.H, m.W, m.C});
    detail::copy_windows<T, -1>(ws.windows.value().data(), out.data(), m);
    Var<T> wvar = ws.windows;
    return spiffnet::detail::make_op<T>(
        std::move(out), "aggregate", wvar.requires_grad(), [wvar, m](Node<T>* self) {
            return [wvar, m, self]() {
                Tensor<T> dw({m.count(), m.window_pixels(), m.C});
                detail::copy_windows<T, 1>(self->grad.data(), dw.data(), m);
                wvar.raw()->accumulate(dw);
            };
        });
}

}  // namespace spiffnet::win
