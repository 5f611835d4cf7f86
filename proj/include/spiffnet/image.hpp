#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "spiffnet/tensor.hpp"

namespace spiffnet::img {

// RGB image, values in [0,1], shape (H, W, 3).
using Image = Tensor<float>;

// 8-bit RGB PNG in/out (png_io.cpp). Loading maps to [0,1] by /255; saving
// clamps and rounds half-up.
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

inline uint8_t quantize8(float v) {
    const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<uint8_t>(std::floor(c * 255.f + 0.5f));
}

inline int64_t height(const Image& im) { return im.shape()[0]; }
inline int64_t width(const Image& im) { return im.shape()[1]; }

inline Image crop(const Image& im, int64_t y0, int64_t x0, int64_t h, int64_t w) {
    const int64_t H = height(im), W = width(im), C = im.shape()[2];
    require(y0 >= 0 && x0 >= 0 && y0 + h <= H && x0 + w <= W, "crop: window out of bounds");
    Image out({h, w, C});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < C; ++c)
                out.at({y, x, c}) = im.at({y0 + y, x0 + x, c});
    return out;
}

// Separable Catmull-Rom (a = -0.5) resize, edge-clamped. When an axis
// shrinks, the kernel is widened by the scale factor (anti-aliased), the
// standard degradation protocol for producing LR training data.
Image resize_bicubic(const Image& im, int64_t oh, int64_t ow);

inline Image bicubic_downsample(const Image& im, int64_t r) {
    require(height(im) % r == 0 && width(im) % r == 0,
            "bicubic_downsample: dims must be divisible by the scale");
    return resize_bicubic(im, height(im) / r, width(im) / r);
}

inline Image bicubic_upsample(const Image& im, int64_t r) {
    return resize_bicubic(im, height(im) * r, width(im) * r);
}

// 10*log10(255^2 / MSE) over 8-bit-quantized values, all channels jointly.
// Returns +inf for identical quantized inputs.
double psnr(const Image& a, const Image& b);

// Mean SSIM over the valid region, 11x11 Gaussian window sigma 1.5,
// K1 = 0.01, K2 = 0.03, L = 255, averaged over the three channels.
double ssim(const Image& a, const Image& b);

// quarter-turn counter-clockwise
inline Image rot90(const Image& im) {
    const int64_t H = height(im), W = width(im), C = im.shape()[2];
    Image out({W, H, C});
    for (int64_t y = 0; y < W; ++y)
        for (int64_t x = 0; x < H; ++x)
            for (int64_t c = 0; c < C; ++c) out.at({y, x, c}) = im.at({x, W - 1 - y, c});
    return out;
}

inline Image flip_h(const Image& im) {
    const int64_t H = height(im), W = width(im), C = im.shape()[2];
    Image out({H, W, C});
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < C; ++c) out.at({y, x, c}) = im.at({y, W - 1 - x, c});
    return out;
}

// id in [0,8): optional horizontal flip followed by k quarter turns.
inline Image dihedral(const Image& im, int id) {
    Image out = (id & 4) ? flip_h(im) : im;
    for (int k = 0; k < (id & 3); ++k) out = rot90(out);
    return out;
}

}  // namespace spiffnet::img
