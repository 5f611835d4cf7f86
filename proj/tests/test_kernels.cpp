#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "spiffnet/gradcheck.hpp"
#include "spiffnet/kernels/ref.hpp"
#include "spiffnet/ops.hpp"

using namespace spiffnet;

namespace {

// sliding-window convolution oracle, written against the op contract only
template <typename T>
Tensor<T> conv3x3_oracle(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int64_t H = x.shape()[0], W = x.shape()[1], Cin = x.shape()[2], Cout = w.shape()[3];
    Tensor<T> y({H, W, Cout});
    for (int64_t oy = 0; oy < H; ++oy)
        for (int64_t ox = 0; ox < W; ++ox)
            for (int64_t co = 0; co < Cout; ++co) {
                T acc = b.defined() ? b[co] : T(0);
                for (int64_t dy = 0; dy < 3; ++dy)
                    for (int64_t dx = 0; dx < 3; ++dx) {
                        const int64_t iy = oy + dy - 1, ix = ox + dx - 1;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        for (int64_t ci = 0; ci < Cin; ++ci)
                            acc += x.at({iy, ix, ci}) * w.at({dy, dx, ci, co});
                    }
                y.at({oy, ox, co}) = acc;
            }
    return y;
}

template <typename T>
Tensor<T> rnd(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return random_uniform<T>(std::move(s), rng, static_cast<T>(lo), static_cast<T>(hi));
}

}  // namespace

TEST_CASE("conv3x3 identity kernel reproduces the input") {
    Rng rng(1);
    auto x = rnd<float>({5, 7, 3}, rng);
    Tensor<float> w({3, 3, 3, 3});
    for (int64_t c = 0; c < 3; ++c) w.at({1, 1, c, c}) = 1.f;  // center delta
    auto y = conv3x3(Var<float>::leaf(x), Var<float>::leaf(w));
    CHECK(max_abs_diff(y.value(), x) == 0.f);
}

TEST_CASE("pointwise conv with identity matrix reproduces the input") {
    Rng rng(2);
    auto x = rnd<float>({6, 4}, rng);
    Tensor<float> w({4, 4});
    for (int64_t c = 0; c < 4; ++c) w.at({c, c}) = 1.f;
    auto y = linear(Var<float>::leaf(x), Var<float>::leaf(w));
    CHECK(max_abs_diff(y.value(), x) == 0.f);
}

TEST_CASE("conv3x3 matches the sliding-window oracle") {
    Rng rng(3);
    auto x = rnd<float>({6, 6, 2}, rng);
    auto w = rnd<float>({3, 3, 2, 4}, rng);
    auto b = rnd<float>({4}, rng);
    auto got = conv3x3(Var<float>::leaf(x), Var<float>::leaf(w), Var<float>::leaf(b));
    auto want = conv3x3_oracle(x, w, b);
    CHECK(max_abs_diff(got.value(), want) < 1e-6f);

    // the serial reference kernel is the same direct summation
    Tensor<float> ry({6, 6, 4});
    kernels::ref::conv3x3(x.data(), w.data(), b.data(), ry.data(), 6, 6, 2, 4);
    CHECK(max_abs_diff(ry, want) == 0.f);
}

TEST_CASE("depthwise conv matches oracle and validates channels") {
    Rng rng(4);
    auto x = rnd<float>({5, 5, 3}, rng);
    auto w = rnd<float>({3, 3, 3}, rng);
    auto got = dwconv3x3(Var<float>::leaf(x), Var<float>::leaf(w));
    Tensor<float> want({5, 5, 3});
    for (int64_t oy = 0; oy < 5; ++oy)
        for (int64_t ox = 0; ox < 5; ++ox)
            for (int64_t c = 0; c < 3; ++c) {
                float acc = 0.f;
                for (int64_t dy = 0; dy < 3; ++dy)
                    for (int64_t dx = 0; dx < 3; ++dx) {
                        const int64_t iy = oy + dy - 1, ix = ox + dx - 1;
                        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                        acc += x.at({iy, ix, c}) * w.at({dy, dx, c});
                    }
                want.at({oy, ox, c}) = acc;
            }
    CHECK(max_abs_diff(got.value(), want) < 1e-6f);

    auto wbad = rnd<float>({3, 3, 4}, rng);
    CHECK_THROWS_AS(dwconv3x3(Var<float>::leaf(x), Var<float>::leaf(wbad)), ShapeError);
}

TEST_CASE_TEMPLATE("finite differences through convs and resampling", T, float, double) {
    const T h = std::is_same_v<T, float> ? static_cast<T>(1e-3) : static_cast<T>(1e-5);
    const double tol = std::is_same_v<T, float> ? 1e-2 : 1e-5;
    for (uint64_t trial = 0; trial < 3; ++trial) {
        Rng rng = Rng::derive(77, trial);
        {
            auto x = Var<T>::leaf(rnd<T>({4, 5, 2}, rng), true);
            auto w = Var<T>::leaf(rnd<T>({3, 3, 2, 3}, rng), true);
            auto b = Var<T>::leaf(rnd<T>({3}, rng), true);
            auto pw = gc::make_probe_weights<T>({4, 5, 3}, rng);
            gc::Check<T> c{"conv3x3", {x, w, b}, [=]() { return gc::probe(conv3x3(x, w, b), pw); }};
            Rng cr(55);
            auto res = gc::run_check(c, h, tol, cr);
            INFO("conv3x3 rel_err=", res.rel_err);
            CHECK(res.pass);
        }
        {
            auto x = Var<T>::leaf(rnd<T>({4, 4, 3}, rng), true);
            auto w = Var<T>::leaf(rnd<T>({3, 3, 3}, rng), true);
            auto b = Var<T>::leaf(rnd<T>({3}, rng), true);
            auto pw = gc::make_probe_weights<T>({4, 4, 3}, rng);
            gc::Check<T> c{"dwconv3x3", {x, w, b},
                           [=]() { return gc::probe(dwconv3x3(x, w, b), pw); }};
            Rng cr(56);
            auto res = gc::run_check(c, h, tol, cr);
            CHECK(res.pass);
        }
        {
            auto x = Var<T>::leaf(rnd<T>({2, 3, 8}, rng), true);
            auto pw = gc::make_probe_weights<T>({4, 6, 2}, rng);
            gc::Check<T> c{"pixel_shuffle", {x},
                           [=]() { return gc::probe(pixel_shuffle(x, 2), pw); }};
            Rng cr(57);
            CHECK(gc::run_check(c, h, tol, cr).pass);
        }
        {
            auto x = Var<T>::leaf(rnd<T>({3, 4, 2}, rng), true);
            auto pw = gc::make_probe_weights<T>({9, 12, 2}, rng);
            gc::Check<T> c{"bilinear_up", {x},
                           [=]() { return gc::probe(bilinear_up(x, 3), pw); }};
            Rng cr(58);
            CHECK(gc::run_check(c, h, tol, cr).pass);
        }
        {
            auto x = Var<T>::leaf(rnd<T>({5, 6, 2}, rng), true);
            auto pw = gc::make_probe_weights<T>({8, 8, 2}, rng);
            gc::Check<T> c{"reflect_pad", {x},
                           [=]() { return gc::probe(reflect_pad_br(x, 3, 2), pw); }};
            Rng cr(59);
            CHECK(gc::run_check(c, h, tol, cr).pass);
        }
        {
            auto x = Var<T>::leaf(rnd<T>({6, 6, 2}, rng), true);
            auto pw = gc::make_probe_weights<T>({4, 3, 2}, rng);
            gc::Check<T> c{"crop", {x}, [=]() { return gc::probe(crop_tl(x, 4, 3), pw); }};
            Rng cr(60);
            CHECK(gc::run_check(c, h, tol, cr).pass);
        }
    }
}

TEST_CASE("pixel shuffle layout, bijection and counting") {
    // 1x1x4 input [a,b,c,d], r=2 -> 2x2x1 [[a,b],[c,d]]
    auto x = Tensor<float>::from({1, 1, 4}, {1.f, 2.f, 3.f, 4.f});
    auto y = pixel_shuffle(Var<float>::leaf(x), 2);
    CHECK(y.shape() == Shape{2, 2, 1});
    CHECK(y.value().at({0, 0, 0}) == 1.f);
    CHECK(y.value().at({0, 1, 0}) == 2.f);
    CHECK(y.value().at({1, 0, 0}) == 3.f);
    CHECK(y.value().at({1, 1, 0}) == 4.f);

    CHECK_THROWS_AS(pixel_shuffle(Var<float>::leaf(Tensor<float>({2, 2, 6})), 2), ShapeError);

    // unshuffle(shuffle(x)) == x bit-exact, element count conserved
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const int64_t H = 1 + rng.index(4), W = 1 + rng.index(4);
        const int64_t r = 2 + rng.index(3);
        const int64_t C = (1 + rng.index(3)) * r * r;
        auto in = rnd<float>({H, W, C}, rng);
        Tensor<float> shuf({H * r, W * r, C / (r * r)});
        kernels::par::pixel_shuffle(in.data(), shuf.data(), H, W, C / (r * r), r);
        CHECK(shuf.size() == in.size());
        Tensor<float> back({H, W, C});
        kernels::par::pixel_unshuffle(shuf.data(), back.data(), H, W, C / (r * r), r);
        CHECK(back.same_values(in));
    }
}

TEST_CASE("bilinear upsample properties and direct formula") {
    // constant image stays constant
    auto c = Tensor<float>::full({3, 4, 2}, 0.37f);
    auto yc = bilinear_up(Var<float>::leaf(c), 2);
    for (int64_t i = 0; i < yc.value().size(); ++i)
        CHECK(yc.value()[i] == doctest::Approx(0.37f).epsilon(1e-6));

    // monotone row
    auto row = Tensor<float>::from({1, 2, 1}, {0.f, 1.f});
    auto yr = bilinear_up(Var<float>::leaf(row), 2);
    for (int64_t i = 1; i < 4; ++i) CHECK(yr.value()[i] >= yr.value()[i - 1]);

    // direct per-pixel evaluation
    Rng rng(9);
    auto x = rnd<float>({4, 4, 1}, rng);
    const int64_t r = 2;
    auto y = bilinear_up(Var<float>::leaf(x), r);
    for (int64_t oy = 0; oy < 8; ++oy)
        for (int64_t ox = 0; ox < 8; ++ox) {
            const float sy = (oy + 0.5f) / r - 0.5f, sx = (ox + 0.5f) / r - 0.5f;
            const auto cl = [](int64_t v, int64_t n) { return std::clamp<int64_t>(v, 0, n - 1); };
            const int64_t y0 = static_cast<int64_t>(std::floor(sy));
            const int64_t x0 = static_cast<int64_t>(std::floor(sx));
            const float fy = sy - y0, fx = sx - x0;
            const float want = (1 - fy) * (1 - fx) * x.at({cl(y0, 4), cl(x0, 4), 0}) +
                               (1 - fy) * fx * x.at({cl(y0, 4), cl(x0 + 1, 4), 0}) +
                               fy * (1 - fx) * x.at({cl(y0 + 1, 4), cl(x0, 4), 0}) +
                               fy * fx * x.at({cl(y0 + 1, 4), cl(x0 + 1, 4), 0});
            CHECK(y.value().at({oy, ox, 0}) == doctest::Approx(want).epsilon(1e-6));
        }
}

TEST_CASE("reflect padding values and crop inverse") {
    auto x = Tensor<float>::from({2, 3, 1}, {1, 2, 3, 4, 5, 6});
    auto y = reflect_pad_br(Var<float>::leaf(x), 1, 2);
    CHECK(y.shape() == Shape{3, 5, 1});
    // bottom row mirrors row 0 (2H-2-oy with H=2)
    CHECK(y.value().at({2, 0, 0}) == 1.f);
    // right columns mirror (2W-2-ox with W=3): ox=3 -> 1, ox=4 -> 0
    CHECK(y.value().at({0, 3, 0}) == 2.f);
    CHECK(y.value().at({0, 4, 0}) == 1.f);
    CHECK(y.value().at({2, 4, 0}) == 1.f);  // corner mirrors both axes

    auto back = crop_tl(y, 2, 3);
    CHECK(back.value().same_values(x));

    CHECK_THROWS_AS(reflect_pad_br(Var<float>::leaf(x), 2, 0), ShapeError);
}

TEST_CASE("serial reference and parallel gemm agree") {
    Rng rng(10);
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb) {
            const int64_t m = 7, k = 5, n = 6;
            auto a = rnd<double>({ta ? k : m, ta ? m : k}, rng);
            auto b = rnd<double>({tb ? n : k, tb ? k : n}, rng);
            Tensor<double> c0({m, n}), c1({m, n});
            kernels::ref::gemm(a.data(), b.data(), c0.data(), m, k, n, ta, tb, 0.0);
            kernels::par::gemm(a.data(), b.data(), c1.data(), m, k, n, ta, tb, 0.0);
            CHECK(max_abs_diff(c0, c1) < 1e-12);
        }
}

TEST_CASE("serial reference and parallel rowwise kernels agree bit-exactly") {
    Rng rng(11);
    const int64_t rows = 13, n = 9;
    auto x = rnd<float>({rows, n}, rng, -3.0, 3.0);
    Tensor<float> y0({rows, n}), y1({rows, n});
    kernels::ref::softmax_rows(x.data(), y0.data(), rows, n);
    kernels::par::softmax_rows(x.data(), y1.data(), rows, n);
    CHECK(y0.same_values(y1));

    auto g = rnd<float>({n}, rng), b = rnd<float>({n}, rng);
    Tensor<float> l0({rows, n}), l1({rows, n}), m0({rows}), m1({rows}), r0({rows}), r1({rows});
    kernels::ref::layernorm_rows(x.data(), g.data(), b.data(), l0.data(), m0.data(), r0.data(),
                                 rows, n, 1e-5f);
    kernels::par::layernorm_rows(x.data(), g.data(), b.data(), l1.data(), m1.data(), r1.data(),
                                 rows, n, 1e-5f);
    CHECK(l0.same_values(l1));

    Tensor<float> a0({rows}), a1({rows});
    kernels::ref::mean_axis(x.data(), a0.data(), rows, n, 1);
    kernels::par::mean_axis(x.data(), a1.data(), rows, n, 1);
    CHECK(a0.same_values(a1));
}

TEST_CASE("serial reference and parallel convs agree") {
    Rng rng(12);
    auto x = rnd<float>({8, 9, 4}, rng);
    auto w = rnd<float>({3, 3, 4, 5}, rng);
    auto b = rnd<float>({5}, rng);
    Tensor<float> y0({8, 9, 5}), y1({8, 9, 5});
    kernels::ref::conv3x3(x.data(), w.data(), b.data(), y0.data(), 8, 9, 4, 5);
    kernels::par::conv3x3(x.data(), w.data(), b.data(), y1.data(), 8, 9, 4, 5);
    CHECK(max_abs_diff(y0, y1) < 1e-5f);

    auto dw = rnd<float>({3, 3, 4}, rng);
    Tensor<float> d0({8, 9, 4}), d1({8, 9, 4});
    kernels::ref::dwconv3x3(x.data(), dw.data(), nullptr, d0.data(), 8, 9, 4);
    kernels::par::dwconv3x3(x.data(), dw.data(), nullptr, d1.data(), 8, 9, 4);
    CHECK(d0.same_values(d1));

    auto pw = rnd<float>({2, 2, 3}, rng);
    Tensor<float> p0({72, 6}), p1({72, 6});
    kernels::ref::pwconv(x.data(), pw.data(), nullptr, p0.data(), 72, 4, 6, 2);
    kernels::par::pwconv(x.data(), pw.data(), nullptr, p1.data(), 72, 4, 6, 2);
    CHECK(p0.same_values(p1));
}

TEST_CASE("ops stay finite on inputs up to 1e3") {
    Rng rng(13);
    auto x = rnd<float>({6, 6, 4}, rng, -1e3, 1e3);
    auto v = Var<float>::leaf(x);
    CHECK(relu(v).value().all_finite());
    CHECK(gelu(v).value().all_finite());
    CHECK(softmax_lastdim(v).value().all_finite());
    auto g1 = Var<float>::leaf(Tensor<float>::full({4}, 1.f));
    auto b0 = Var<float>::leaf(Tensor<float>::zeros({4}));
    CHECK(layer_norm(v, g1, b0).value().all_finite());
    auto w = rnd<float>({3, 3, 4, 4}, rng);
    CHECK(conv3x3(v, Var<float>::leaf(w)).value().all_finite());
    CHECK(bilinear_up(v, 2).value().all_finite());
}
