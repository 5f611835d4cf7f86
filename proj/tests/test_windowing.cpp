#include <algorithm>

#include "doctest.h"
#include "spiffnet/gradcheck.hpp"
#include "spiffnet/windowing.hpp"

using namespace spiffnet;
using namespace spiffnet::win;

TEST_CASE("local partition tiling definition") {
    // 4x4x1 map with values = flat index
    Tensor<float> f({4, 4, 1});
    for (int64_t i = 0; i < 16; ++i) f[i] = static_cast<float>(i);
    auto ws = partition_local(Var<float>::leaf(f), 2);
    CHECK(ws.windows.shape() == Shape{4, 4, 1});
    // window 0 holds source pixels (0,0),(0,1),(1,0),(1,1) in raster order
    CHECK(ws.windows.value().at({0, 0, 0}) == 0.f);
    CHECK(ws.windows.value().at({0, 1, 0}) == 1.f);
    CHECK(ws.windows.value().at({0, 2, 0}) == 4.f);
    CHECK(ws.windows.value().at({0, 3, 0}) == 5.f);
    // window 1 is the next tile to the right
    CHECK(ws.windows.value().at({1, 0, 0}) == 2.f);

    // G = H = W: single window equal to the flattened map
    auto whole = partition_local(Var<float>::leaf(f), 4);
    CHECK(whole.windows.shape() == Shape{1, 16, 1});
    CHECK(whole.windows.value().reshaped({4, 4, 1}).same_values(f));
}

TEST_CASE("contextual partition sampling definition") {
    Tensor<float> f({4, 4, 1});
    for (int64_t i = 0; i < 16; ++i) f[i] = static_cast<float>(i);
    auto ws = partition_context(Var<float>::leaf(f), int64_t{2});
    CHECK(ws.windows.shape() == Shape{4, 4, 1});
    // window (0,0) holds pixels (0,0),(0,2),(2,0),(2,2)
    CHECK(ws.windows.value().at({0, 0, 0}) == 0.f);
    CHECK(ws.windows.value().at({0, 1, 0}) == 2.f);
    CHECK(ws.windows.value().at({0, 2, 0}) == 8.f);
    CHECK(ws.windows.value().at({0, 3, 0}) == 10.f);
    // window (0,1) starts at pixel (0,1)
    CHECK(ws.windows.value().at({1, 0, 0}) == 1.f);

    // I = 1: one window covering the whole map
    auto whole = partition_context(Var<float>::leaf(f), int64_t{1});
    CHECK(whole.windows.shape() == Shape{1, 16, 1});
    CHECK(whole.windows.value().reshaped({4, 4, 1}).same_values(f));
}

TEST_CASE("round trips are bit-exact for random shapes and strategies") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t gh = 1 + rng.index(4);
        const int64_t th = 1 + rng.index(4), tw = 1 + rng.index(4);
        const int64_t C = 1 + rng.index(5);
        const bool local = rng.coin();
        if (local) {
            const int64_t H = gh * th, W = gh * tw;
            auto f = random_uniform<float>({H, W, C}, rng, -1.f, 1.f);
            auto ws = partition_local(Var<float>::leaf(f), gh);
            CHECK(aggregate(ws).value().same_values(f));
        } else {
            const int64_t ih = 1 + rng.index(3), iw = 1 + rng.index(3);
            const int64_t H = ih * th, W = iw * tw;
            auto f = random_uniform<float>({H, W, C}, rng, -1.f, 1.f);
            auto ws = partition_context(Var<float>::leaf(f), ih, iw);
            CHECK(aggregate(ws).value().same_values(f));
        }
    }
    // the spec's named instances
    {
        Rng r2(22);
        auto f = random_uniform<float>({8, 8, 3}, r2, -1.f, 1.f);
        auto ws = partition_local(Var<float>::leaf(f), 2);
        CHECK(aggregate(ws).value().same_values(f));
    }
    {
        Rng r2(23);
        auto f = random_uniform<float>({6, 6, 2}, r2, -1.f, 1.f);
        auto ws = partition_context(Var<float>::leaf(f), int64_t{3});
        CHECK(aggregate(ws).value().same_values(f));
    }
}

TEST_CASE("partition is a bijection on pixel positions") {
    Rng rng(24);
    auto f = random_uniform<float>({6, 4, 2}, rng, -1.f, 1.f);
    for (int mode = 0; mode < 2; ++mode) {
        auto ws = mode == 0 ? partition_local(Var<float>::leaf(f), 2)
                            : partition_context(Var<float>::leaf(f), 2, 2);
        std::vector<float> in(f.data(), f.data() + f.size());
        std::vector<float> out(ws.windows.value().data(),
                               ws.windows.value().data() + ws.windows.value().size());
        std::sort(in.begin(), in.end());
        std::sort(out.begin(), out.end());
        CHECK(in == out);
    }
}

TEST_CASE("single-pixel window edit lands on exactly one output pixel") {
    Rng rng(25);
    auto f = random_uniform<float>({6, 6, 1}, rng, -1.f, 1.f);
    auto ws = partition_context(Var<float>::leaf(f), int64_t{3});
    auto edited = ws.windows.value().clone();
    edited.at({4, 2, 0}) += 1.f;  // window (1,1), third pixel
    WindowSet<float> ws2{Var<float>::leaf(edited), ws.meta};
    auto back = aggregate(ws2);
    int64_t changed = 0;
    int64_t where = -1;
    for (int64_t i = 0; i < back.value().size(); ++i)
        if (back.value()[i] != f[i]) {
            ++changed;
            where = i;
        }
    CHECK(changed == 1);
    // window (a,b)=(1,1), pixel (i,j)=(1,0) -> source (1+1*3, 1+0*3) = (4,1)
    CHECK(where == 4 * 6 + 1);
}

TEST_CASE("errors on indivisible dims and inconsistent metadata") {
    Tensor<float> f({5, 4, 1});
    CHECK_THROWS_AS(partition_local(Var<float>::leaf(f), 2), ShapeError);
    CHECK_THROWS_AS(partition_context(Var<float>::leaf(f), int64_t{2}), ShapeError);

    Tensor<float> ok({4, 4, 1});
    auto ws = partition_local(Var<float>::leaf(ok), 2);
    WindowSet<float> broken{Var<float>::leaf(Tensor<float>({3, 4, 1})), ws.meta};
    CHECK_THROWS_AS(aggregate(broken), ShapeError);
}

TEST_CASE_TEMPLATE("gradients flow exactly through partition and aggregate", T, float, double) {
    const T h = std::is_same_v<T, float> ? static_cast<T>(1e-3) : static_cast<T>(1e-5);
    const double tol = std::is_same_v<T, float> ? 1e-2 : 1e-5;
    Rng rng(26);
    auto x = Var<T>::leaf(random_uniform<T>({4, 6, 2}, rng, T(-1), T(1)), true);
    auto pw = gc::make_probe_weights<T>({4, 6, 2}, rng);
    gc::Check<T> c{"window_roundtrip", {x}, [=]() {
                       auto ws = partition_context(x, int64_t{2}, int64_t{3});
                       return gc::probe(aggregate(ws), pw);
                   }};
    Rng cr(61);
    CHECK(gc::run_check(c, h, tol, cr).pass);
}
