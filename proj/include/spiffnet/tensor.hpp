#pragma once

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <memory>

#include "spiffnet/common.hpp"

namespace spiffnet {

// Dense row-major tensor. Storage is shared between copies; ops treat
// tensors as immutable once produced, so sharing is safe. Reshape is O(1).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(static_cast<size_t>(numel(shape_)), T(0))) {
        for (int64_t d : shape_) require(d > 0, "Tensor: dims must be positive " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    static Tensor from(Shape shape, std::initializer_list<T> vals) {
        Tensor t(std::move(shape));
        require(static_cast<int64_t>(vals.size()) == t.size(),
                "Tensor::from: value count mismatch");
        std::copy(vals.begin(), vals.end(), t.data());
        return t;
    }

    static Tensor from_vec(Shape shape, const std::vector<T>& vals) {
        Tensor t(std::move(shape));
        require(static_cast<int64_t>(vals.size()) == t.size(),
                "Tensor::from_vec: value count mismatch");
        std::copy(vals.begin(), vals.end(), t.data());
        return t;
    }

    bool defined() const { return static_cast<bool>(data_); }
    const Shape& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    T* data() { return data_->data(); }
    const T* data() const { return data_->data(); }

    T& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    T& at(std::initializer_list<int64_t> idx) {
        return (*data_)[static_cast<size_t>(flat(idx))];
    }
    T at(std::initializer_list<int64_t> idx) const {
        return (*data_)[static_cast<size_t>(flat(idx))];
    }

    void fill(T v) { std::fill(data_->begin(), data_->end(), v); }

    // New view of the same storage.
    Tensor reshaped(Shape shape) const {
        require(numel(shape) == size(),
                "reshape: numel mismatch " + shape_str(shape_) + " -> " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<T>>(*data_);
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> t{shape_};
        const T* s = data();
        U* d = t.data();
        for (int64_t i = 0; i < size(); ++i) d[i] = static_cast<U>(s[i]);
        return t;
    }

    bool same_values(const Tensor& o) const {
        if (shape_ != o.shape_) return false;
        return std::memcmp(data(), o.data(), sizeof(T) * static_cast<size_t>(size())) == 0;
    }

    bool all_finite() const {
        for (int64_t i = 0; i < size(); ++i)
            if (!std::isfinite((*data_)[static_cast<size_t>(i)])) return false;
        return true;
    }

private:
    int64_t flat(std::initializer_list<int64_t> idx) const {
        require(static_cast<int64_t>(idx.size()) == rank(), "at: rank mismatch");
        int64_t off = 0, i = 0;
        for (int64_t v : idx) {
            require(v >= 0 && v < shape_[static_cast<size_t>(i)], "at: index out of range");
            off = off * shape_[static_cast<size_t>(i)] + v;
            ++i;
        }
        return off;
    }

    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
    T m = 0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename T>
Tensor<T> random_uniform(Shape shape, Rng& rng, T lo, T hi) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

}  // namespace spiffnet
