#include <png.h>

#include <cstdio>
#include <vector>

#include "spiffnet/image.hpp"
#include "spiffnet/kernels/detail.hpp"

namespace spiffnet::img {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    require<IoError>(f != nullptr, "cannot open " + path);

    png_byte header[8];
    require<IoError>(std::fread(header, 1, 8, f.get()) == 8, "short read on " + path);
    require<FormatError>(png_sig_cmp(header, 0, 8) == 0, path + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require<IoError>(png != nullptr, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng failed decoding " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    // normalize everything to 8-bit RGB
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const size_t rowbytes = png_get_rowbytes(png, info);
    require<FormatError>(rowbytes == static_cast<size_t>(w) * 3,
                         path + ": unexpected row size after RGB conversion");

    std::vector<png_byte> raw(static_cast<size_t>(h) * rowbytes);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image out({static_cast<int64_t>(h), static_cast<int64_t>(w), 3});
    float* dst = out.data();
    for (size_t i = 0; i < raw.size(); ++i) dst[i] = static_cast<float>(raw[i]) / 255.0f;
    return out;
}

void save_png(const Image& im, const std::string& path) {
    require(im.rank() == 3 && im.shape()[2] == 3, "save_png: image must be (H,W,3)");
    const int64_t h = im.shape()[0], w = im.shape()[1];

    FilePtr f(std::fopen(path.c_str(), "wb"));
    require<IoError>(f != nullptr, "cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require<IoError>(png != nullptr, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed encoding " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(w) * 3);
    const float* src = im.data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t i = 0; i < w * 3; ++i) row[static_cast<size_t>(i)] = quantize8(src[y * w * 3 + i]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---- bicubic resize ----

namespace {

struct AxisPlan {
    std::vector<int64_t> lo;      // first tap per output index
    std::vector<double> weights;  // taps-per-output weights, normalized
    int64_t taps;
};

AxisPlan plan_axis(int64_t in, int64_t out) {
    AxisPlan p;
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double ksize = std::max(scale, 1.0);  // kernel widened when shrinking
    const int64_t taps = static_cast<int64_t>(std::ceil(4.0 * ksize)) + 1;
    p.taps = taps;
    p.lo.resize(static_cast<size_t>(out));
    p.weights.resize(static_cast<size_t>(out * taps), 0.0);
    for (int64_t i = 0; i < out; ++i) {
        const double c = (static_cast<double>(i) + 0.5) * scale - 0.5;
        const int64_t lo = static_cast<int64_t>(std::ceil(c - 2.0 * ksize));
        p.lo[static_cast<size_t>(i)] = lo;
        double sum = 0.0;
        for (int64_t k = 0; k < taps; ++k) {
            const double d = (static_cast<double>(lo + k) - c) / ksize;
            const double wv = static_cast<double>(spiffnet::kernels::detail::cubic_kernel(d));
            p.weights[static_cast<size_t>(i * taps + k)] = wv;
            sum += wv;
        }
        for (int64_t k = 0; k < taps; ++k) p.weights[static_cast<size_t>(i * taps + k)] /= sum;
    }
    return p;
}

}  // namespace

Image resize_bicubic(const Image& im, int64_t oh, int64_t ow) {
    require(im.rank() == 3, "resize_bicubic: image must be (H,W,C)");
    const int64_t H = im.shape()[0], W = im.shape()[1], C = im.shape()[2];
    require(oh > 0 && ow > 0, "resize_bicubic: output dims must be positive");

    const AxisPlan px = plan_axis(W, ow);
    // horizontal pass (double precision accumulation)
    std::vector<double> tmp(static_cast<size_t>(H * ow * C));
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
            const int64_t lo = px.lo[static_cast<size_t>(x)];
            const double* wv = &px.weights[static_cast<size_t>(x * px.taps)];
            for (int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int64_t k = 0; k < px.taps; ++k) {
                    const int64_t sx = spiffnet::kernels::detail::clamp_index(lo + k, W);
                    acc += wv[k] * static_cast<double>(im.at({y, sx, c}));
                }
                tmp[static_cast<size_t>((y * ow + x) * C + c)] = acc;
            }
        }
    }
    const AxisPlan py = plan_axis(H, oh);
    Image out({oh, ow, C});
    for (int64_t y = 0; y < oh; ++y) {
        const int64_t lo = py.lo[static_cast<size_t>(y)];
        const double* wv = &py.weights[static_cast<size_t>(y * py.taps)];
        for (int64_t x = 0; x < ow; ++x) {
            for (int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int64_t k = 0; k < py.taps; ++k) {
                    const int64_t sy = spiffnet::kernels::detail::clamp_index(lo + k, H);
                    acc += wv[k] * tmp[static_cast<size_t>((sy * ow + x) * C + c)];
                }
                out.at({y, x, c}) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

// ---- metrics ----

double psnr(const Image& a, const Image& b) {
    require(a.shape() == b.shape(), "psnr: shape mismatch");
    double se = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(quantize8(a[i])) - static_cast<double>(quantize8(b[i]));
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    require(a.shape() == b.shape(), "ssim: shape mismatch");
    const int64_t H = a.shape()[0], W = a.shape()[1], C = a.shape()[2];
    constexpr int64_t win = 11;
    require<ValueError>(H >= win && W >= win, "ssim: image smaller than the 11x11 window");

    double g[win * win];
    {
        const double sigma = 1.5;
        double sum = 0.0;
        for (int64_t y = 0; y < win; ++y)
            for (int64_t x = 0; x < win; ++x) {
                const double dy = static_cast<double>(y - win / 2);
                const double dx = static_cast<double>(x - win / 2);
                g[y * win + x] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                sum += g[y * win + x];
            }
        for (double& v : g) v /= sum;
    }

    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

    double total = 0.0;
    int64_t count = 0;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t y = 0; y + win <= H; ++y) {
            for (int64_t x = 0; x + win <= W; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int64_t wy = 0; wy < win; ++wy) {
                    for (int64_t wx = 0; wx < win; ++wx) {
                        const double wv = g[wy * win + wx];
                        const double av = static_cast<double>(quantize8(a.at({y + wy, x + wx, c})));
                        const double bv = static_cast<double>(quantize8(b.at({y + wy, x + wx, c})));
                        mx += wv * av;
                        my += wv * bv;
                        mxx += wv * av * av;
                        myy += wv * bv * bv;
                        mxy += wv * av * bv;
                    }
                }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cov = mxy - mx * my;
                const double s = ((2 * mx * my + c1) * (2 * cov + c2)) /
                                 ((mx * mx + my * my + c1) * (vx + vy + c2));
                total += s;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace spiffnet::img
