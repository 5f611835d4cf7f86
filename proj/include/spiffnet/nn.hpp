#pragma once

#include <cmath>
#include <deque>
#include <unordered_map>

#include "spiffnet/ops.hpp"

namespace spiffnet {

namespace init {

template <typename T>
Tensor<T> zeros(Shape shape) {
    return Tensor<T>::zeros(std::move(shape));
}

template <typename T>
Tensor<T> ones(Shape shape) {
    return Tensor<T>::full(std::move(shape), T(1));
}

// Zero-mean uniform with variance 1/fan_in.
template <typename T>
Tensor<T> lecun_uniform(Shape shape, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace init

// Named trainable tensors in a stable creation order (the order defines the
// checkpoint layout).
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Var<T> var;
    };

    Var<T> create(const std::string& name, Tensor<T> value) {
        require<ValueError>(!index_.count(name), "duplicate parameter name: " + name);
        entries_.push_back(Entry{name, Var<T>()});
        Entry& e = entries_.back();
        e.var = Var<T>::leaf(std::move(value), true, e.name.c_str());
        index_[name] = entries_.size() - 1;
        return e.var;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Var<T> get(const std::string& name) const {
        auto it = index_.find(name);
        require<ValueError>(it != index_.end(), "unknown parameter: " + name);
        return entries_[it->second].var;
    }

    const std::deque<Entry>& entries() const { return entries_; }
    std::deque<Entry>& entries() { return entries_; }
    size_t count() const { return entries_.size(); }

    int64_t total_params() const {
        int64_t n = 0;
        for (const Entry& e : entries_) n += e.var.value().size();
        return n;
    }

    void zero_grad() {
        for (Entry& e : entries_) e.var.zero_grad();
    }

private:
    std::deque<Entry> entries_;  // deque: stable c_str() labels
    std::unordered_map<std::string, size_t> index_;
};

template <typename T>
struct AdamConfig {
    T beta1 = static_cast<T>(0.9);
    T beta2 = static_cast<T>(0.99);
    T eps = static_cast<T>(1e-8);
};

template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig<T> cfg = {}) : cfg_(cfg) {}

    void step(ParamStore<T>& params, T lr) {
        if (slots_.empty()) {
            for (const auto& e : params.entries())
                slots_.push_back({Tensor<T>::zeros(e.var.shape()), Tensor<T>::zeros(e.var.shape())});
        }
        require<ValueError>(slots_.size() == params.count(), "Adam: parameter set changed");
        ++t_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
        size_t si = 0;
        for (auto& e : params.entries()) {
            Tensor<T>& m = slots_[si].m;
            Tensor<T>& v = slots_[si].v;
            ++si;
            const Tensor<T>& g = e.var.grad();
            if (!g.defined()) continue;  // never touched by backward: no update
            T* pm = m.data();
            T* pv = v.data();
            T* pp = e.var.value().data();
            const T* pg = g.data();
            const int64_t n = m.size();
            const T b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.eps;
#pragma omp parallel for if (n > kernels::par::kParGrain) schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                pm[i] = b1 * pm[i] + (T(1) - b1) * pg[i];
                pv[i] = b2 * pv[i] + (T(1) - b2) * pg[i] * pg[i];
                const T mhat = pm[i] / bc1;
                const T vhat = pv[i] / bc2;
                pp[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    int64_t t() const { return t_; }
    void set_t(int64_t t) { t_ = t; }

    struct Slot {
        Tensor<T> m, v;
    };
    std::vector<Slot>& slots() { return slots_; }
    void ensure_slots(const ParamStore<T>& params) {
        if (slots_.empty())
            for (const auto& e : params.entries())
                slots_.push_back({Tensor<T>::zeros(e.var.shape()), Tensor<T>::zeros(e.var.shape())});
    }

private:
    AdamConfig<T> cfg_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

// lr(0) = lr0, lr(total) = lr_min, half-cosine in between.
inline double cosine_lr(int64_t epoch, int64_t total_epochs, double lr0, double lr_min) {
    require<ValueError>(total_epochs > 0, "cosine_lr: total_epochs must be positive");
    require<ValueError>(epoch >= 0 && epoch <= total_epochs, "cosine_lr: epoch out of range");
    const double c = std::cos(M_PI * static_cast<double>(epoch) / static_cast<double>(total_epochs));
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + c);
}

}  // namespace spiffnet
