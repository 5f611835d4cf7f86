#pragma once

#include <functional>
#include <memory>

#include "spiffnet/kernels/par.hpp"
#include "spiffnet/tensor.hpp"

namespace spiffnet {

// Tape-based reverse mode. Ops append nodes in creation order, which is a
// valid topological order, so backward() is a single reverse sweep with no
// graph walk. When no tape is active (inference) ops build free-floating
// value nodes that are reclaimed as soon as the last handle drops.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    const char* label = "";
    std::function<void()> backprop;  // reads this->grad, accumulates into parents

    void accumulate(const Tensor<T>& g) {
        if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
        require(g.shape() == grad.shape(),
                std::string("grad shape mismatch at ") + label + ": " + shape_str(g.shape()) +
                    " vs " + shape_str(grad.shape()));
        kernels::par::axpy(g.data(), grad.data(), g.size(), T(1));
    }
};

template <typename T>
class Var;

template <typename T>
class Tape {
public:
    static Tape*& current() {
        static thread_local Tape* cur = nullptr;
        return cur;
    }

    void record(std::shared_ptr<Node<T>> n) { order_.push_back(std::move(n)); }

    // Root must be scalar (one element). Populates .grad of every node that
    // (transitively) influenced it and requires grad.
    void backward(const Var<T>& root);

    void clear() {
        // children die before parents: no recursive teardown cascades
        for (size_t i = order_.size(); i-- > 0;) order_[i].reset();
        order_.clear();
    }

    size_t size() const { return order_.size(); }
    const std::vector<std::shared_ptr<Node<T>>>& nodes() const { return order_; }

    ~Tape() { clear(); }

private:
    std::vector<std::shared_ptr<Node<T>>> order_;
};

// RAII activation of a tape for the current thread.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& t) : prev_(Tape<T>::current()) { Tape<T>::current() = &t; }
    ~TapeScope() { Tape<T>::current() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* prev_;
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    // Leaf holding a value; requires_grad leaves accumulate gradients.
    static Var leaf(Tensor<T> value, bool requires_grad = false, const char* label = "leaf") {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        n->label = label;
        return Var(std::move(n));
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& value() { return n_->value; }
    const Tensor<T>& grad() const { return n_->grad; }
    Tensor<T>& grad() { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    const Shape& shape() const { return n_->value.shape(); }
    const char* label() const { return n_->label; }

    void zero_grad() {
        if (!n_->grad.defined()) n_->grad = Tensor<T>::zeros(n_->value.shape());
        else n_->grad.fill(T(0));
    }

    std::shared_ptr<Node<T>> node() const { return n_; }
    Node<T>* raw() const { return n_.get(); }

private:
    std::shared_ptr<Node<T>> n_;
};

template <typename T>
void Tape<T>::backward(const Var<T>& root) {
    require<ValueError>(root.value().size() == 1, "backward: root must be scalar");
    require<ValueError>(root.requires_grad(), "backward: root does not require grad");
    root.raw()->accumulate(Tensor<T>::full(root.shape(), T(1)));
    for (size_t i = order_.size(); i-- > 0;) {
        Node<T>& n = *order_[i];
        if (n.backprop && n.grad.defined()) n.backprop();
    }
}

namespace detail {

// Assemble an op node: value + backprop closure. The closure is only
// attached when a tape is active and some parent needs gradients.
template <typename T>
Var<T> make_op(Tensor<T> value, const char* label, bool any_parent_grad,
               std::function<void()> (*)(Node<T>*) = nullptr) = delete;

template <typename T, typename MakeBackprop>
Var<T> make_op(Tensor<T> value, const char* label, bool any_parent_grad,
               MakeBackprop&& make_backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->label = label;
    Tape<T>* tape = Tape<T>::current();
    if (tape && any_parent_grad) {
        n->requires_grad = true;
        n->backprop = make_backprop(n.get());
        tape->record(n);
    }
    return Var<T>(std::move(n));
}

}  // namespace detail

}  // namespace spiffnet
