#pragma once

// Differentiable ops over Var<T>. Forward values are computed by the
// kernels in kernels/par.hpp; each op attaches a closure that routes
// gradients to its parents when a tape is recording.

#include <algorithm>

#include "spiffnet/autodiff.hpp"

namespace spiffnet {

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
        const int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
        require(da == db || da == 1 || db == 1,
                "broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Row-major strides of `s` right-aligned into rank r, zeroed on broadcast dims.
inline Shape broadcast_strides(const Shape& s, const Shape& out) {
    const size_t r = out.size(), rs = s.size();
    Shape full(r, 1);
    for (size_t i = 0; i < rs; ++i) full[r - rs + i] = s[i];
    Shape st(r);
    int64_t acc = 1;
    for (size_t i = r; i-- > 0;) {
        st[i] = full[i] == 1 ? 0 : acc;
        acc *= full[i];
    }
    return st;
}

template <typename T, typename F>
Tensor<T> zip_broadcast(const Tensor<T>& a, const Tensor<T>& b, F f) {
    if (a.shape() == b.shape()) {
        Tensor<T> out(a.shape());
        kernels::par::zip(a.data(), b.data(), out.data(), out.size(), f);
        return out;
    }
    const Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor<T> out(os);
    const Shape astr = broadcast_strides(a.shape(), os);
    const Shape bstr = broadcast_strides(b.shape(), os);
    kernels::par::zip_strided(a.data(), b.data(), out.data(), os.data(), astr.data(), bstr.data(),
                              static_cast<int64_t>(os.size()), out.size(), f);
    return out;
}

// Sum g down to `target` (which must broadcast to g's shape).
template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& g, const Shape& target) {
    if (g.shape() == target) return g;
    Tensor<T> out(target);
    out.fill(T(0));
    const Shape tstr = broadcast_strides(target, g.shape());
    const Shape& dims = g.shape();
    const int64_t rank = static_cast<int64_t>(dims.size());
    // leading-dim reduction (bias adds) gets the parallel path
    const int64_t tn = out.size();
    if (g.size() % tn == 0) {
        bool suffix = true;
        const size_t roff = dims.size() - target.size();
        for (size_t i = 0; i < target.size(); ++i)
            if (target[i] != dims[roff + i]) suffix = false;
        if (suffix) {
            const int64_t rows = g.size() / tn;
            const T* gp = g.data();
            T* op = out.data();
#pragma omp parallel for if (tn > 64) schedule(static)
            for (int64_t i = 0; i < tn; ++i) {
                T acc = 0;
                for (int64_t r = 0; r < rows; ++r) acc += gp[r * tn + i];
                op[i] = acc;
            }
            return out;
        }
    }
    const T* gp = g.data();
    T* op = out.data();
    for (int64_t flat = 0; flat < g.size(); ++flat) {
        int64_t rem = flat, off = 0;
        for (int64_t d = rank; d-- > 0;) {
            const int64_t idx = rem % dims[d];
            rem /= dims[d];
            off += idx * tstr[d];
        }
        op[off] += gp[flat];
    }
    return out;
}

template <typename T>
void accumulate_reduced(const Var<T>& v, const Tensor<T>& g, T scale = T(1)) {
    Tensor<T> red = reduce_to_shape(g, v.shape());
    Node<T>* n = v.raw();
    if (!n->grad.defined()) n->grad = Tensor<T>::zeros(n->value.shape());
    kernels::par::axpy(red.data(), n->grad.data(), red.size(), scale);
}

}  // namespace detail

template <typename T>
Var<T> constant(Tensor<T> t, const char* label = "const") {
    return Var<T>::leaf(std::move(t), false, label);
}

// ---- elementwise ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tensor<T> out = detail::zip_broadcast(a.value(), b.value(), [](T x, T y) { return x + y; });
    return detail::make_op<T>(std::move(out), "add", a.requires_grad() || b.requires_grad(),
                              [a, b](Node<T>* self) {
                                  return [a, b, self]() {
                                      if (a.requires_grad()) detail::accumulate_reduced(a, self->grad);
                                      if (b.requires_grad()) detail::accumulate_reduced(b, self->grad);
                                  };
                              });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    Tensor<T> out = detail::zip_broadcast(a.value(), b.value(), [](T x, T y) { return x - y; });
    return detail::make_op<T>(std::move(out), "sub", a.requires_grad() || b.requires_grad(),
                              [a, b](Node<T>* self) {
                                  return [a, b, self]() {
                                      if (a.requires_grad()) detail::accumulate_reduced(a, self->grad);
                                      if (b.requires_grad())
                                          detail::accumulate_reduced(b, self->grad, T(-1));
                                  };
                              });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tensor<T> out = detail::zip_broadcast(a.value(), b.value(), [](T x, T y) { return x * y; });
    return detail::make_op<T>(std::move(out), "mul", a.requires_grad() || b.requires_grad(),
                              [a, b](Node<T>* self) {
                                  return [a, b, self]() {
                                      if (a.requires_grad()) {
                                          Tensor<T> ga = detail::zip_broadcast(
                                              self->grad, b.value(), [](T g, T y) { return g * y; });
                                          detail::accumulate_reduced(a, ga);
                                      }
                                      if (b.requires_grad()) {
                                          Tensor<T> gb = detail::zip_broadcast(
                                              self->grad, a.value(), [](T g, T x) { return g * x; });
                                          detail::accumulate_reduced(b, gb);
                                      }
                                  };
                              });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(), [s](T x) { return x * s; });
    return detail::make_op<T>(std::move(out), "mul_scalar", a.requires_grad(),
                              [a, s](Node<T>* self) {
                                  return [a, s, self]() { detail::accumulate_reduced(a, self->grad, s); };
                              });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(), [s](T x) { return x + s; });
    return detail::make_op<T>(std::move(out), "add_scalar", a.requires_grad(),
                              [a](Node<T>* self) {
                                  return [a, self]() { detail::accumulate_reduced(a, self->grad); };
                              });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(),
                      [](T x) { return x > T(0) ? x : T(0); });
    return detail::make_op<T>(std::move(out), "relu", a.requires_grad(), [a](Node<T>* self) {
        return [a, self]() {
            Tensor<T> g(a.shape());
            kernels::par::zip(self->grad.data(), a.value().data(), g.data(), g.size(),
                              [](T gv, T x) { return x > T(0) ? gv : T(0); });
            a.raw()->accumulate(g);
        };
    });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(),
                      [](T x) { return kernels::detail::gelu_tanh(x); });
    return detail::make_op<T>(std::move(out), "gelu", a.requires_grad(), [a](Node<T>* self) {
        return [a, self]() {
            Tensor<T> g(a.shape());
            kernels::par::zip(self->grad.data(), a.value().data(), g.data(), g.size(),
                              [](T gv, T x) { return gv * kernels::detail::gelu_tanh_grad(x); });
            a.raw()->accumulate(g);
        };
    });
}

template <typename T>
Var<T> exp_of(const Var<T>& a) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(), [](T x) { return std::exp(x); });
    return detail::make_op<T>(std::move(out), "exp", a.requires_grad(), [a](Node<T>* self) {
        return [a, self]() {
            Tensor<T> g(a.shape());
            kernels::par::zip(self->grad.data(), self->value.data(), g.data(), g.size(),
                              [](T gv, T y) { return gv * y; });
            a.raw()->accumulate(g);
        };
    });
}

template <typename T>
Var<T> abs_of(const Var<T>& a) {
    Tensor<T> out(a.shape());
    kernels::par::map(a.value().data(), out.data(), out.size(), [](T x) { return std::abs(x); });
    return detail::make_op<T>(std::move(out), "abs", a.requires_grad(), [a](Node<T>* self) {
        return [a, self]() {
            Tensor<T> g(a.shape());
            kernels::par::zip(self->grad.data(), a.value().data(), g.data(), g.size(), [](T gv, T x) {
                return x > T(0) ? gv : (x < T(0) ? -gv : T(0));
            });
            a.raw()->accumulate(g);
        };
    });
}

// ---- matrix products ----

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_b = false) {
    require(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be 2-D");
    const int64_t m = a.shape()[0], k = a.shape()[1];
    const int64_t n = trans_b ? b.shape()[0] : b.shape()[1];
    const int64_t kb = trans_b ? b.shape()[1] : b.shape()[0];
    require(k == kb, "matmul: inner dims disagree " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    Tensor<T> out({m, n});
    kernels::par::gemm(a.value().data(), b.value().data(), out.data(), m, k, n, false, trans_b,
                       T(0));
    return detail::make_op<T>(
        std::move(out), "matmul", a.requires_grad() || b.requires_grad(),
        [a, b, m, k, n, trans_b](Node<T>* self) {
            return [a, b, m, k, n, trans_b, self]() {
                const T* g = self->grad.data();
                if (a.requires_grad()) {
                    Tensor<T> da({m, k});
                    // dA = dY * B^T  (or dY * B when b was transposed)
                    kernels::par::gemm(g, b.value().data(), da.data(), m, n, k, false, !trans_b,
                                       T(0));
                    a.raw()->accumulate(da);
                }
                if (b.requires_grad()) {
                    Tensor<T> db(b.shape());
                    if (!trans_b)  // dB = A^T * dY
                        kernels::par::gemm(a.value().data(), g, db.data(), k, m, n, true, false,
                                           T(0));
                    else  // dB = dY^T * A
                        kernels::par::gemm(g, a.value().data(), db.data(), n, m, k, true, false,
                                           T(0));
                    b.raw()->accumulate(db);
                }
            };
        });
}

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool trans_b = false) {
    require(a.shape().size() == 3 && b.shape().size() == 3, "bmm: operands must be 3-D");
    const int64_t B = a.shape()[0], m = a.shape()[1], k = a.shape()[2];
    require(b.shape()[0] == B, "bmm: batch dims disagree");
    const int64_t n = trans_b ? b.shape()[1] : b.shape()[2];
    const int64_t kb = trans_b ? b.shape()[2] : b.shape()[1];
    require(k == kb, "bmm: inner dims disagree");
    Tensor<T> out({B, m, n});
    kernels::par::gemm_batched(a.value().data(), b.value().data(), out.data(), B, m, k, n, false,
                               trans_b);
    return detail::make_op<T>(
        std::move(out), "bmm", a.requires_grad() || b.requires_grad(),
        [a, b, B, m, k, n, trans_b](Node<T>* self) {
            return [a, b, B, m, k, n, trans_b, self]() {
                const T* g = self->grad.data();
                if (a.requires_grad()) {
                    Tensor<T> da({B, m, k});
                    kernels::par::gemm_batched(g, b.value().data(), da.data(), B, m, n, k, false,
                                               !trans_b);
                    a.raw()->accumulate(da);
                }
                if (b.requires_grad()) {
                    Tensor<T> db(b.shape());
                    if (!trans_b)
                        kernels::par::gemm_batched(a.value().data(), g, db.data(), B, k, m, n,
                                                   true, false);
                    else
                        kernels::par::gemm_batched(g, a.value().data(), db.data(), B, n, m, k,
                                                   true, false);
                    b.raw()->accumulate(db);
                }
            };
        });
}

// x: (..., Cin) times w; bias optional. groups > 1 expects w: (groups, cin_g, cout_g),
// groups == 1 expects w: (Cin, Cout). This is also the 1x1 point-wise convolution.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = Var<T>(), int64_t groups = 1) {
    const Shape& xs = x.shape();
    require(!xs.empty(), "linear: input rank 0");
    const int64_t cin = xs.back();
    int64_t cout;
    if (groups == 1) {
        require(w.shape().size() == 2 && w.shape()[0] == cin,
                "linear: weight shape " + shape_str(w.shape()) + " vs Cin " + std::to_string(cin));
        cout = w.shape()[1];
    } else {
        require(w.shape().size() == 3 && w.shape()[0] == groups && w.shape()[1] * groups == cin,
                "linear: grouped weight shape mismatch");
        cout = w.shape()[2] * groups;
    }
    const int64_t rows = numel(xs) / cin;
    Shape os = xs;
    os.back() = cout;
    Tensor<T> out(os);
    const T* bias = b.defined() ? b.value().data() : nullptr;
    if (b.defined())
        require(b.shape() == Shape{cout}, "linear: bias shape mismatch");
    kernels::par::pwconv(x.value().data(), w.value().data(), bias, out.data(), rows, cin, cout,
                         groups);
    const bool rg = x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
    return detail::make_op<T>(
        std::move(out), "linear", rg, [x, w, b, rows, cin, cout, groups](Node<T>* self) {
            return [x, w, b, rows, cin, cout, groups, self]() {
                const T* g = self->grad.data();
                Tensor<T> dx, dw, db;
                if (x.requires_grad()) {
                    dx = Tensor<T>::zeros(x.shape());
                }
                if (w.requires_grad()) {
                    dw = Tensor<T>::zeros(w.shape());
                }
                if (b.defined() && b.requires_grad()) {
                    db = Tensor<T>::zeros(b.shape());
                }
                kernels::par::pwconv_bwd(x.value().data(), w.value().data(), g,
                                         dx.defined() ? dx.data() : nullptr,
                                         dw.defined() ? dw.data() : nullptr,
                                         db.defined() ? db.data() : nullptr, rows, cin, cout,
                                         groups);
                if (dx.defined()) x.raw()->accumulate(dx);
                if (dw.defined()) w.raw()->accumulate(dw);
                if (db.defined()) b.raw()->accumulate(db);
            };
        });
}

// ---- normalizations ----

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x) {
    const int64_t n = x.shape().back();
    const int64_t rows = x.value().size() / n;
    Tensor<T> out(x.shape());
    kernels::par::softmax_rows(x.value().data(), out.data(), rows, n);
    return detail::make_op<T>(std::move(out), "softmax", x.requires_grad(),
                              [x, rows, n](Node<T>* self) {
                                  return [x, rows, n, self]() {
                                      Tensor<T> dx = Tensor<T>::zeros(x.shape());
                                      kernels::par::softmax_rows_grad(self->value.data(),
                                                                      self->grad.data(), dx.data(),
                                                                      rows, n);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<int64_t>& perm);

template <typename T>
Var<T> softmax(const Var<T>& x, int64_t axis) {
    const int64_t r = x.value().rank();
    if (axis < 0) axis += r;
    require(axis >= 0 && axis < r, "softmax: axis out of range");
    if (axis == r - 1) return softmax_lastdim(x);
    std::vector<int64_t> perm(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) perm[static_cast<size_t>(i)] = i;
    std::swap(perm[static_cast<size_t>(axis)], perm[static_cast<size_t>(r - 1)]);
    return permute(softmax_lastdim(permute(x, perm)), perm);
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  T eps = static_cast<T>(1e-5)) {
    const int64_t n = x.shape().back();
    require(gamma.shape() == Shape{n} && beta.shape() == Shape{n},
            "layer_norm: affine params must have length " + std::to_string(n));
    const int64_t rows = x.value().size() / n;
    Tensor<T> out(x.shape());
    Tensor<T> mean({rows}), rstd({rows});
    kernels::par::layernorm_rows(x.value().data(), gamma.value().data(), beta.value().data(),
                                 out.data(), mean.data(), rstd.data(), rows, n, eps);
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    return detail::make_op<T>(
        std::move(out), "layer_norm", rg, [x, gamma, beta, mean, rstd, rows, n](Node<T>* self) {
            return [x, gamma, beta, mean, rstd, rows, n, self]() {
                if (x.requires_grad()) {
                    Tensor<T> dx = Tensor<T>::zeros(x.shape());
                    kernels::par::layernorm_rows_grad_x(x.value().data(), gamma.value().data(),
                                                        self->grad.data(), dx.data(), mean.data(),
                                                        rstd.data(), rows, n);
                    x.raw()->accumulate(dx);
                }
                if (gamma.requires_grad() || beta.requires_grad()) {
                    Tensor<T> dg = Tensor<T>::zeros(gamma.shape());
                    Tensor<T> db = Tensor<T>::zeros(beta.shape());
                    kernels::par::layernorm_rows_grad_affine(x.value().data(), self->grad.data(),
                                                             dg.data(), db.data(), mean.data(),
                                                             rstd.data(), rows, n);
                    if (gamma.requires_grad()) gamma.raw()->accumulate(dg);
                    if (beta.requires_grad()) beta.raw()->accumulate(db);
                }
            };
        });
}

// ---- convolutions ----

// Full 3x3, zero padding 1. x: (H,W,Cin), w: (3,3,Cin,Cout), b: (Cout) optional.
template <typename T>
Var<T> conv3x3(const Var<T>& x, const Var<T>& w, const Var<T>& b = Var<T>()) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "conv3x3: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], Cin = xs[2];
    require(w.shape().size() == 4 && w.shape()[0] == 3 && w.shape()[1] == 3 &&
                w.shape()[2] == Cin,
            "conv3x3: weight must be (3,3,Cin,Cout)");
    const int64_t Cout = w.shape()[3];
    Tensor<T> out({H, W, Cout});
    kernels::par::conv3x3(x.value().data(), w.value().data(),
                          b.defined() ? b.value().data() : nullptr, out.data(), H, W, Cin, Cout);
    const bool rg = x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
    return detail::make_op<T>(
        std::move(out), "conv3x3", rg, [x, w, b, H, W, Cin, Cout](Node<T>* self) {
            return [x, w, b, H, W, Cin, Cout, self]() {
                Tensor<T> dx, dw, db;
                if (x.requires_grad()) dx = Tensor<T>::zeros(x.shape());
                if (w.requires_grad()) dw = Tensor<T>::zeros(w.shape());
                if (b.defined() && b.requires_grad()) db = Tensor<T>::zeros(b.shape());
                kernels::par::conv3x3_bwd(x.value().data(), w.value().data(), self->grad.data(),
                                          dx.defined() ? dx.data() : nullptr,
                                          dw.defined() ? dw.data() : nullptr,
                                          db.defined() ? db.data() : nullptr, H, W, Cin, Cout);
                if (dx.defined()) x.raw()->accumulate(dx);
                if (dw.defined()) w.raw()->accumulate(dw);
                if (db.defined()) b.raw()->accumulate(db);
            };
        });
}

// Depthwise 3x3, zero padding 1. w: (3,3,C).
template <typename T>
Var<T> dwconv3x3(const Var<T>& x, const Var<T>& w, const Var<T>& b = Var<T>()) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "dwconv3x3: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], C = xs[2];
    require(w.shape().size() == 3 && w.shape()[0] == 3 && w.shape()[1] == 3 && w.shape()[2] == C,
            "dwconv3x3: weight must be (3,3,C) with C = " + std::to_string(C));
    Tensor<T> out({H, W, C});
    kernels::par::dwconv3x3(x.value().data(), w.value().data(),
                            b.defined() ? b.value().data() : nullptr, out.data(), H, W, C);
    const bool rg = x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
    return detail::make_op<T>(std::move(out), "dwconv3x3", rg, [x, w, b, H, W, C](Node<T>* self) {
        return [x, w, b, H, W, C, self]() {
            Tensor<T> dx, dw, db;
            if (x.requires_grad()) dx = Tensor<T>::zeros(x.shape());
            if (w.requires_grad()) dw = Tensor<T>::zeros(w.shape());
            if (b.defined() && b.requires_grad()) db = Tensor<T>::zeros(b.shape());
            kernels::par::dwconv3x3_bwd(x.value().data(), w.value().data(), self->grad.data(),
                                        dx.defined() ? dx.data() : nullptr,
                                        dw.defined() ? dw.data() : nullptr,
                                        db.defined() ? db.data() : nullptr, H, W, C);
            if (dx.defined()) x.raw()->accumulate(dx);
            if (dw.defined()) w.raw()->accumulate(dw);
            if (db.defined()) b.raw()->accumulate(db);
        };
    });
}

// ---- shape manipulation ----

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    Tensor<T> out = x.value().reshaped(std::move(shape));
    return detail::make_op<T>(std::move(out), "reshape", x.requires_grad(), [x](Node<T>* self) {
        return [x, self]() { x.raw()->accumulate(self->grad.reshaped(x.shape())); };
    });
}

template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<int64_t>& perm) {
    const Shape& in = x.shape();
    const int64_t r = static_cast<int64_t>(in.size());
    require(static_cast<int64_t>(perm.size()) == r, "permute: rank mismatch");
    Shape os(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) os[static_cast<size_t>(i)] = in[static_cast<size_t>(perm[i])];
    const Shape ost = row_major_strides(os);
    // out_stride_of_in[d]: stride of the output dim that input dim d lands in
    Shape osoi(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) osoi[static_cast<size_t>(perm[i])] = ost[static_cast<size_t>(i)];
    Tensor<T> out(os);
    kernels::par::permute_copy(x.value().data(), out.data(), in.data(), osoi.data(), r,
                               out.size());
    return detail::make_op<T>(
        std::move(out), "permute", x.requires_grad(), [x, perm](Node<T>* self) {
            return [x, perm, self]() {
                const int64_t rr = static_cast<int64_t>(perm.size());
                const Shape& gdims = self->grad.shape();
                const Shape xst = row_major_strides(x.shape());
                Shape osoi2(static_cast<size_t>(rr));
                for (int64_t i = 0; i < rr; ++i)
                    osoi2[static_cast<size_t>(i)] = xst[static_cast<size_t>(perm[i])];
                Tensor<T> dx(x.shape());
                kernels::par::permute_copy(self->grad.data(), dx.data(), gdims.data(),
                                           osoi2.data(), rr, dx.size());
                x.raw()->accumulate(dx);
            };
        });
}

template <typename T>
Var<T> concat_lastdim(const Var<T>& a, const Var<T>& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    require(as.size() == bs.size() && as.size() >= 1, "concat: rank mismatch");
    for (size_t i = 0; i + 1 < as.size(); ++i)
        require(as[i] == bs[i], "concat: leading dims must match");
    const int64_t ca = as.back(), cb = bs.back();
    const int64_t rows = numel(as) / ca;
    Shape os = as;
    os.back() = ca + cb;
    Tensor<T> out(os);
    kernels::par::concat_lastdim(a.value().data(), b.value().data(), out.data(), rows, ca, cb);
    return detail::make_op<T>(std::move(out), "concat", a.requires_grad() || b.requires_grad(),
                              [a, b, rows, ca, cb](Node<T>* self) {
                                  return [a, b, rows, ca, cb, self]() {
                                      if (a.requires_grad()) {
                                          Tensor<T> da = Tensor<T>::zeros(a.shape());
                                          kernels::par::slice_lastdim_add(self->grad.data(),
                                                                          da.data(), rows, ca + cb,
                                                                          0, ca);
                                          a.raw()->accumulate(da);
                                      }
                                      if (b.requires_grad()) {
                                          Tensor<T> db = Tensor<T>::zeros(b.shape());
                                          kernels::par::slice_lastdim_add(self->grad.data(),
                                                                          db.data(), rows, ca + cb,
                                                                          ca, cb);
                                          b.raw()->accumulate(db);
                                      }
                                  };
                              });
}

// ---- reductions ----

// Mean over one axis; that axis is removed from the shape.
template <typename T>
Var<T> mean_axis(const Var<T>& x, int64_t axis) {
    const Shape& xs = x.shape();
    const int64_t r = static_cast<int64_t>(xs.size());
    if (axis < 0) axis += r;
    require(axis >= 0 && axis < r, "mean_axis: axis out of range");
    int64_t outer = 1, inner = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= xs[static_cast<size_t>(i)];
    for (int64_t i = axis + 1; i < r; ++i) inner *= xs[static_cast<size_t>(i)];
    const int64_t A = xs[static_cast<size_t>(axis)];
    Shape os;
    for (int64_t i = 0; i < r; ++i)
        if (i != axis) os.push_back(xs[static_cast<size_t>(i)]);
    if (os.empty()) os = {1};
    Tensor<T> out(os);
    kernels::par::mean_axis(x.value().data(), out.data(), outer, A, inner);
    return detail::make_op<T>(std::move(out), "mean_axis", x.requires_grad(),
                              [x, outer, A, inner](Node<T>* self) {
                                  return [x, outer, A, inner, self]() {
                                      Tensor<T> dx = Tensor<T>::zeros(x.shape());
                                      kernels::par::mean_axis_bwd(self->grad.data(), dx.data(),
                                                                  outer, A, inner);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    Tensor<T> out({1});
    out[0] = kernels::par::sum_all(x.value().data(), x.value().size());
    return detail::make_op<T>(std::move(out), "sum_all", x.requires_grad(), [x](Node<T>* self) {
        return [x, self]() {
            const T g = self->grad[0];
            Tensor<T> dx = Tensor<T>::full(x.shape(), g);
            x.raw()->accumulate(dx);
        };
    });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    return mul_scalar(sum_all(x), static_cast<T>(1) / static_cast<T>(x.value().size()));
}

// ---- resampling ----

// (H, W, C*r*r) -> (H*r, W*r, C)
template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int64_t r) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "pixel_shuffle: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], Cin = xs[2];
    require(Cin % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
    const int64_t Cout = Cin / (r * r);
    Tensor<T> out({H * r, W * r, Cout});
    kernels::par::pixel_shuffle(x.value().data(), out.data(), H, W, Cout, r);
    return detail::make_op<T>(std::move(out), "pixel_shuffle", x.requires_grad(),
                              [x, H, W, Cout, r](Node<T>* self) {
                                  return [x, H, W, Cout, r, self]() {
                                      Tensor<T> dx(x.shape());
                                      kernels::par::pixel_unshuffle(self->grad.data(), dx.data(),
                                                                    H, W, Cout, r);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

template <typename T>
Var<T> bilinear_up(const Var<T>& x, int64_t r) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "bilinear_up: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], C = xs[2];
    Tensor<T> out({H * r, W * r, C});
    kernels::par::bilinear_up(x.value().data(), out.data(), H, W, C, r);
    return detail::make_op<T>(std::move(out), "bilinear_up", x.requires_grad(),
                              [x, H, W, C, r](Node<T>* self) {
                                  return [x, H, W, C, r, self]() {
                                      Tensor<T> dx = Tensor<T>::zeros(x.shape());
                                      kernels::par::bilinear_up_bwd(self->grad.data(), dx.data(),
                                                                    H, W, C, r);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

template <typename T>
Var<T> reflect_pad_br(const Var<T>& x, int64_t ph, int64_t pw) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "reflect_pad_br: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], C = xs[2];
    require(ph < H && pw < W, "reflect_pad_br: pad must be smaller than dim");
    if (ph == 0 && pw == 0) return x;
    Tensor<T> out({H + ph, W + pw, C});
    kernels::par::reflect_pad_br(x.value().data(), out.data(), H, W, C, ph, pw);
    return detail::make_op<T>(std::move(out), "reflect_pad", x.requires_grad(),
                              [x, H, W, C, ph, pw](Node<T>* self) {
                                  return [x, H, W, C, ph, pw, self]() {
                                      Tensor<T> dx = Tensor<T>::zeros(x.shape());
                                      kernels::par::reflect_pad_br_bwd(self->grad.data(),
                                                                       dx.data(), H, W, C, ph, pw);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

template <typename T>
Var<T> crop_tl(const Var<T>& x, int64_t oh, int64_t ow) {
    const Shape& xs = x.shape();
    require(xs.size() == 3, "crop_tl: input must be (H,W,C)");
    const int64_t H = xs[0], W = xs[1], C = xs[2];
    require(oh <= H && ow <= W, "crop_tl: crop larger than input");
    if (oh == H && ow == W) return x;
    Tensor<T> out({oh, ow, C});
    kernels::par::crop_tl(x.value().data(), out.data(), H, W, C, oh, ow);
    return detail::make_op<T>(std::move(out), "crop", x.requires_grad(),
                              [x, H, W, C, oh, ow](Node<T>* self) {
                                  return [x, H, W, C, oh, ow, self]() {
                                      Tensor<T> dx = Tensor<T>::zeros(x.shape());
                                      kernels::par::crop_tl_bwd(self->grad.data(), dx.data(), H, W,
                                                                C, oh, ow);
                                      x.raw()->accumulate(dx);
                                  };
                              });
}

// ---- stochastic ----

// Straight-through Gumbel-Softmax over the last dim of (rows, n) logits.
// Forward emits exact one-hot rows; backward flows through the softened
// distribution divided by tau. Chosen indices are reported via `picks`.
template <typename T>
Var<T> gumbel_softmax_st(const Var<T>& logits, T tau, Rng& rng,
                         std::vector<int64_t>* picks = nullptr) {
    require<ValueError>(tau > T(0), "gumbel_softmax_st: tau must be positive");
    const Shape& ls = logits.shape();
    require(ls.size() == 2, "gumbel_softmax_st: logits must be (rows, n)");
    const int64_t rows = ls[0], n = ls[1];
    require<ValueError>(n > 0, "gumbel_softmax_st: empty category set");
    Tensor<T> soft(ls);
    Tensor<T> out(ls);
    std::vector<int64_t> idx(static_cast<size_t>(rows));
    std::vector<T> pert(static_cast<size_t>(n));
    for (int64_t r = 0; r < rows; ++r) {
        const T* lp = logits.value().data() + r * n;
        for (int64_t j = 0; j < n; ++j) {
            double u = rng.unit();
            u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
            const T g = static_cast<T>(-std::log(-std::log(u)));
            pert[static_cast<size_t>(j)] = (lp[j] + g) / tau;
        }
        int64_t best = 0;
        for (int64_t j = 1; j < n; ++j)
            if (pert[static_cast<size_t>(j)] > pert[static_cast<size_t>(best)]) best = j;
        idx[static_cast<size_t>(r)] = best;
        kernels::detail::softmax_row(pert.data(), soft.data() + r * n, n);
        T* op = out.data() + r * n;
        for (int64_t j = 0; j < n; ++j) op[j] = j == best ? T(1) : T(0);
    }
    if (picks) *picks = idx;
    return detail::make_op<T>(std::move(out), "gumbel_st", logits.requires_grad(),
                              [logits, soft, rows, n, tau](Node<T>* self) {
                                  return [logits, soft, rows, n, tau, self]() {
                                      Tensor<T> dp = Tensor<T>::zeros(logits.shape());
                                      kernels::par::softmax_rows_grad(soft.data(),
                                                                      self->grad.data(), dp.data(),
                                                                      rows, n);
                                      detail::accumulate_reduced(logits, dp, T(1) / tau);
                                  };
                              });
}

// ---- losses ----

template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
    require(a.shape() == b.shape(), "l1_loss: shape mismatch " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
    return mean_all(abs_of(sub(a, b)));
}

}  // namespace spiffnet
