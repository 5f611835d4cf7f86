#pragma once

// Central finite-difference verification of reverse-mode gradients.
// A check owns requires-grad leaves and a forward closure that rebuilds the
// graph from their current values; we compare tape gradients against
// symmetric difference quotients on sampled coordinates plus a few random
// directions, and report one global relative error.

#include <functional>

#include "spiffnet/nn.hpp"

namespace spiffnet::gc {

template <typename T>
struct Check {
    std::string name;
    std::vector<Var<T>> inputs;        // leaves to differentiate against
    std::function<Var<T>()> forward;   // rebuilds graph -> scalar Var
};

template <typename T>
struct Result {
    std::string name;
    double rel_err = 0.0;
    bool pass = false;
};

namespace detail {

template <typename T>
double eval_scalar(const std::function<Var<T>()>& f) {
    Var<T> y = f();  // no tape active: value-only
    require<ValueError>(y.value().size() == 1, "gradcheck: forward must be scalar");
    return static_cast<double>(y.value()[0]);
}

}  // namespace detail

template <typename T>
Result<T> run_check(Check<T>& c, T h, double tol, Rng& rng, int64_t max_coords = 48,
                    int64_t n_dirs = 8) {
    // reverse-mode gradients at the base point
    std::vector<Tensor<T>> grads;
    {
        Tape<T> tape;
        TapeScope<T> scope(tape);
        Var<T> y = c.forward();
        require<ValueError>(y.value().size() == 1, "gradcheck: forward must be scalar");
        for (auto& v : c.inputs) v.zero_grad();
        tape.backward(y);
        for (auto& v : c.inputs) grads.push_back(v.grad().clone());
        for (auto& v : c.inputs) v.zero_grad();
    }

    double num2 = 0.0, fd2 = 0.0, ad2 = 0.0;
    auto add_pair = [&](double fd, double ad) {
        num2 += (fd - ad) * (fd - ad);
        fd2 += fd * fd;
        ad2 += ad * ad;
    };

    // per-coordinate quotients (every coordinate when small, sampled otherwise)
    for (size_t ti = 0; ti < c.inputs.size(); ++ti) {
        Tensor<T>& x = c.inputs[ti].value();
        const int64_t n = x.size();
        std::vector<int64_t> coords;
        if (n <= max_coords) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int64_t i = 0; i < max_coords; ++i) coords.push_back(rng.index(n));
        }
        for (int64_t i : coords) {
            const T save = x[i];
            x[i] = save + h;
            const double fp = detail::eval_scalar(c.forward);
            x[i] = save - h;
            const double fm = detail::eval_scalar(c.forward);
            x[i] = save;
            add_pair((fp - fm) / (2.0 * static_cast<double>(h)),
                     static_cast<double>(grads[ti][i]));
        }
    }

    // random-direction quotients across all inputs jointly
    for (int64_t d = 0; d < n_dirs; ++d) {
        std::vector<Tensor<T>> dir;
        double norm2 = 0.0, dot_ad = 0.0;
        for (size_t ti = 0; ti < c.inputs.size(); ++ti) {
            Tensor<T> v(c.inputs[ti].shape());
            for (int64_t i = 0; i < v.size(); ++i) {
                v[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
                norm2 += static_cast<double>(v[i]) * static_cast<double>(v[i]);
            }
            dir.push_back(v);
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (size_t ti = 0; ti < c.inputs.size(); ++ti)
            for (int64_t i = 0; i < dir[ti].size(); ++i) {
                dir[ti][i] = static_cast<T>(static_cast<double>(dir[ti][i]) * inv);
                dot_ad += static_cast<double>(dir[ti][i]) * static_cast<double>(grads[ti][i]);
            }
        auto shift = [&](T s) {
            for (size_t ti = 0; ti < c.inputs.size(); ++ti) {
                Tensor<T>& x = c.inputs[ti].value();
                for (int64_t i = 0; i < x.size(); ++i) x[i] += s * dir[ti][i];
            }
        };
        shift(h);
        const double fp = detail::eval_scalar(c.forward);
        shift(static_cast<T>(-2) * h);
        const double fm = detail::eval_scalar(c.forward);
        shift(h);
        add_pair((fp - fm) / (2.0 * static_cast<double>(h)), dot_ad);
    }

    Result<T> r;
    r.name = c.name;
    const double denom = std::max(std::sqrt(fd2), std::sqrt(ad2));
    r.rel_err = denom > 0.0 ? std::sqrt(num2) / denom : std::sqrt(num2);
    r.pass = r.rel_err < tol;
    return r;
}

// Scalar probe: fixed random weights scaled so the objective stays O(1).
template <typename T>
Var<T> probe(const Var<T>& y, const Tensor<T>& w) {
    return sum_all(mul(y, constant(w.reshaped(y.value().shape()))));
}

template <typename T>
Tensor<T> make_probe_weights(const Shape& shape, Rng& rng) {
    Tensor<T> w(shape);
    const double s = 1.0 / std::sqrt(static_cast<double>(w.size()));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-s, s));
    return w;
}

}  // namespace spiffnet::gc
