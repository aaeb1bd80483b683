#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dect/error.hpp"

namespace dect {

// Operation tags recorded on the tape. Kept for introspection; the backward
// implementation itself is attached to each node as a function pointer.
enum class Op : uint8_t {
    leaf,
    add,
    sub,
    mul,
    neg,
    abs,
    log,
    clamp,
    relu,
    leaky_relu,
    tanh,
    sigmoid,
    conv2d,
    upsample_nearest,
    instance_norm,
    mean_all,
    mean_hw,
    reshape,
    bce_with_logits,
};

template <typename T>
struct Node {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated on first use, same length as value
    bool requires_grad = false;
    Op op = Op::leaf;
    std::vector<std::shared_ptr<Node<T>>> inputs;
    std::vector<T> saved;        // op-specific cached numbers for the backward pass
    std::vector<int64_t> attrs;  // op-specific integer attributes (strides, dims, ...)
    void (*backward_fn)(Node<T>&) = nullptr;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Tape recording is on by default and can be suspended for inference.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

inline int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

// Dense n-d array holding a node of the differentiation graph. Copies are
// shallow; all ops allocate a fresh output node. The element type is the
// graph dtype, so mixing 32- and 64-bit tensors in one expression is a
// compile error rather than a runtime one.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static Tensor leaf(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
        for (int d : shape)
            if (d <= 0) throw DimError("tensor dimensions must be positive, got " + shape_str(shape));
        if (shape_numel(shape) != static_cast<int64_t>(values.size()))
            throw DimError("shape " + shape_str(shape) + " does not match buffer of " +
                           std::to_string(values.size()) + " elements");
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        std::vector<T> v(static_cast<size_t>(shape_numel(shape)), T(0));
        return leaf(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(std::vector<int> shape, T value, bool requires_grad = false) {
        std::vector<T> v(static_cast<size_t>(shape_numel(shape)), value);
        return leaf(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return leaf({1}, {value}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }
    Op op() const { return node_->op; }

    const std::vector<T>& values() const { return node_->value; }
    std::vector<T>& mutable_values() { return node_->value; }

    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    const std::vector<T>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }
    void drop_grad() { node_->grad.clear(); }

    T item() const {
        if (numel() != 1) throw ContractError("item() requires a scalar tensor, shape is " + shape_str(shape()));
        return node_->value[0];
    }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Creates the output node; the tape edge is recorded only while grad mode is
// on and at least one input participates in differentiation.
template <typename T>
std::shared_ptr<Node<T>> make_op_node(Op op, std::vector<int> shape,
                                      std::vector<std::shared_ptr<Node<T>>> inputs,
                                      void (*backward_fn)(Node<T>&)) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value.resize(static_cast<size_t>(shape_numel(n->shape)));
    n->op = op;
    bool needs = false;
    for (const auto& in : inputs)
        if (in->requires_grad) needs = true;
    if (grad_enabled() && needs) {
        n->requires_grad = true;
        n->inputs = std::move(inputs);
        n->backward_fn = backward_fn;
    }
    return n;
}

template <typename T>
void accumulate(Node<T>& target, const std::vector<T>& contribution) {
    target.ensure_grad();
    for (size_t i = 0; i < contribution.size(); ++i) target.grad[i] += contribution[i];
}

enum class BroadcastKind { same, a_scalar, b_scalar };

template <typename T>
BroadcastKind binary_broadcast(const Node<T>& a, const Node<T>& b) {
    if (a.shape == b.shape) return BroadcastKind::same;
    if (a.numel() == 1) return BroadcastKind::a_scalar;
    if (b.numel() == 1) return BroadcastKind::b_scalar;
    throw DimError("incompatible shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) +
                   "; shapes must match or one operand must be a scalar");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary arithmetic (equal shapes, or one scalar operand).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    auto& an = *a.node();
    auto& bn = *b.node();
    auto kind = detail::binary_broadcast(an, bn);
    const auto& out_shape = (kind == detail::BroadcastKind::a_scalar) ? bn.shape : an.shape;
    auto n = detail::make_op_node<T>(Op::add, out_shape, {a.node(), b.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        auto& B = *node.inputs[1];
        if (A.requires_grad) {
            A.ensure_grad();
            if (A.numel() == node.numel()) {
                for (size_t i = 0; i < node.grad.size(); ++i) A.grad[i] += node.grad[i];
            } else {
                T s = 0;
                for (T g : node.grad) s += g;
                A.grad[0] += s;
            }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            if (B.numel() == node.numel()) {
                for (size_t i = 0; i < node.grad.size(); ++i) B.grad[i] += node.grad[i];
            } else {
                T s = 0;
                for (T g : node.grad) s += g;
                B.grad[0] += s;
            }
        }
    });
    size_t count = n->value.size();
    switch (kind) {
        case detail::BroadcastKind::same:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] + bn.value[i];
            break;
        case detail::BroadcastKind::a_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[0] + bn.value[i];
            break;
        case detail::BroadcastKind::b_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] + bn.value[0];
            break;
    }
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    auto& an = *a.node();
    auto& bn = *b.node();
    auto kind = detail::binary_broadcast(an, bn);
    const auto& out_shape = (kind == detail::BroadcastKind::a_scalar) ? bn.shape : an.shape;
    auto n = detail::make_op_node<T>(Op::sub, out_shape, {a.node(), b.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        auto& B = *node.inputs[1];
        if (A.requires_grad) {
            A.ensure_grad();
            if (A.numel() == node.numel()) {
                for (size_t i = 0; i < node.grad.size(); ++i) A.grad[i] += node.grad[i];
            } else {
                T s = 0;
                for (T g : node.grad) s += g;
                A.grad[0] += s;
            }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            if (B.numel() == node.numel()) {
                for (size_t i = 0; i < node.grad.size(); ++i) B.grad[i] -= node.grad[i];
            } else {
                T s = 0;
                for (T g : node.grad) s += g;
                B.grad[0] -= s;
            }
        }
    });
    size_t count = n->value.size();
    switch (kind) {
        case detail::BroadcastKind::same:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] - bn.value[i];
            break;
        case detail::BroadcastKind::a_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[0] - bn.value[i];
            break;
        case detail::BroadcastKind::b_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] - bn.value[0];
            break;
    }
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    auto& an = *a.node();
    auto& bn = *b.node();
    auto kind = detail::binary_broadcast(an, bn);
    const auto& out_shape = (kind == detail::BroadcastKind::a_scalar) ? bn.shape : an.shape;
    auto n = detail::make_op_node<T>(Op::mul, out_shape, {a.node(), b.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        auto& B = *node.inputs[1];
        size_t count = node.value.size();
        if (A.requires_grad) {
            A.ensure_grad();
            if (A.numel() == node.numel()) {
                if (B.numel() == node.numel()) {
                    for (size_t i = 0; i < count; ++i) A.grad[i] += node.grad[i] * B.value[i];
                } else {
                    for (size_t i = 0; i < count; ++i) A.grad[i] += node.grad[i] * B.value[0];
                }
            } else {
                T s = 0;
                for (size_t i = 0; i < count; ++i) s += node.grad[i] * B.value[i];
                A.grad[0] += s;
            }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            if (B.numel() == node.numel()) {
                if (A.numel() == node.numel()) {
                    for (size_t i = 0; i < count; ++i) B.grad[i] += node.grad[i] * A.value[i];
                } else {
                    for (size_t i = 0; i < count; ++i) B.grad[i] += node.grad[i] * A.value[0];
                }
            } else {
                T s = 0;
                for (size_t i = 0; i < count; ++i) s += node.grad[i] * A.value[i];
                B.grad[0] += s;
            }
        }
    });
    size_t count = n->value.size();
    switch (kind) {
        case detail::BroadcastKind::same:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] * bn.value[i];
            break;
        case detail::BroadcastKind::a_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[0] * bn.value[i];
            break;
        case detail::BroadcastKind::b_scalar:
            for (size_t i = 0; i < count; ++i) n->value[i] = an.value[i] * bn.value[0];
            break;
    }
    return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// Elementwise unary ops.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::neg, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) A.grad[i] -= node.grad[i];
    });
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = -an.value[i];
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::abs, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) {
            T x = A.value[i];
            if (x > 0)
                A.grad[i] += node.grad[i];
            else if (x < 0)
                A.grad[i] -= node.grad[i];
        }
    });
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::abs(an.value[i]);
    return Tensor<T>(n);
}

inline constexpr double kLogFloor = 1e-12;

// Natural log with the argument floored at 1e-12; the floored region has
// zero gradient, consistent with the flat forward value.
template <typename T>
Tensor<T> log(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::log, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) {
            T x = A.value[i];
            if (x > static_cast<T>(kLogFloor)) A.grad[i] += node.grad[i] / x;
        }
    });
    for (size_t i = 0; i < n->value.size(); ++i)
        n->value[i] = std::log(std::max(an.value[i], static_cast<T>(kLogFloor)));
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
    if (!(lo <= hi)) throw ContractError("clamp requires lo <= hi");
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::clamp, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        T lo = node.saved[0], hi = node.saved[1];
        for (size_t i = 0; i < node.grad.size(); ++i) {
            T x = A.value[i];
            if (x >= lo && x <= hi) A.grad[i] += node.grad[i];
        }
    });
    n->saved = {lo, hi};
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::min(std::max(an.value[i], lo), hi);
    return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// Activations.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::relu, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i)
            if (A.value[i] > 0) A.grad[i] += node.grad[i];
    });
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = an.value[i] > 0 ? an.value[i] : T(0);
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2)) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::leaky_relu, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        T slope = node.saved[0];
        for (size_t i = 0; i < node.grad.size(); ++i)
            A.grad[i] += A.value[i] > 0 ? node.grad[i] : slope * node.grad[i];
    });
    n->saved = {slope};
    for (size_t i = 0; i < n->value.size(); ++i)
        n->value[i] = an.value[i] > 0 ? an.value[i] : slope * an.value[i];
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::tanh, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) {
            T y = node.value[i];
            A.grad[i] += node.grad[i] * (T(1) - y * y);
        }
    });
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::tanh(an.value[i]);
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto& an = *a.node();
    auto n = detail::make_op_node<T>(Op::sigmoid, an.shape, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) {
            T y = node.value[i];
            A.grad[i] += node.grad[i] * y * (T(1) - y);
        }
    });
    for (size_t i = 0; i < n->value.size(); ++i) {
        T x = an.value[i];
        n->value[i] = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    }
    return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// Reductions and views.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    auto& an = *a.node();
    if (an.numel() == 0) throw DegenerateInputError("mean of an empty tensor is undefined");
    auto n = detail::make_op_node<T>(Op::mean_all, {1}, {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        T g = node.grad[0] / static_cast<T>(A.numel());
        for (size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += g;
    });
    T s = 0;
    for (T v : an.value) s += v;
    n->value[0] = s / static_cast<T>(an.numel());
    return Tensor<T>(n);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<int> new_shape) {
    auto& an = *a.node();
    if (shape_numel(new_shape) != an.numel())
        throw DimError("cannot reshape " + shape_str(an.shape) + " to " + shape_str(new_shape));
    auto n = detail::make_op_node<T>(Op::reshape, std::move(new_shape), {a.node()}, [](Node<T>& node) {
        auto& A = *node.inputs[0];
        if (!A.requires_grad) return;
        detail::accumulate(A, node.grad);
    });
    n->value = an.value;
    return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// Backward pass.
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Visits the tape in reverse
// topological order (inputs of a node always enumerated in recorded order),
// so repeated runs on the same tape are bit-identical. Gradients accumulate
// additively into any leaf already holding a gradient.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw ContractError("backward requires a scalar loss, shape is " + shape_str(loss.shape()));
    Node<T>* root = loss.node().get();
    if (!root->requires_grad) return;

    // Iterative DFS post-order: producers end up before consumers.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->inputs.size()) {
            Node<T>* next = node->inputs[idx++].get();
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

// ---------------------------------------------------------------------------
// Generic elementwise dispatcher. The named functions above are the primary
// API; this exists for callers that select the operation at runtime and it
// enforces the unary/binary arity contract.
// ---------------------------------------------------------------------------

enum class ElementwiseKind { add, sub, mul, neg, abs, log, clamp };

// Unary form; binary kinds reject it with an arity error.
template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a, T clamp_lo = T(-1), T clamp_hi = T(1)) {
    switch (kind) {
        case ElementwiseKind::add:
        case ElementwiseKind::sub:
        case ElementwiseKind::mul:
            throw DimError("binary elementwise kind requires two operands");
        case ElementwiseKind::neg: return neg(a);
        case ElementwiseKind::abs: return abs(a);
        case ElementwiseKind::log: return log(a);
        case ElementwiseKind::clamp: return clamp(a, clamp_lo, clamp_hi);
    }
    throw ContractError("unknown elementwise kind");
}

// Binary form; unary kinds reject the extra operand.
template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a, const Tensor<T>& b) {
    switch (kind) {
        case ElementwiseKind::add: return add(a, b);
        case ElementwiseKind::sub: return sub(a, b);
        case ElementwiseKind::mul: return mul(a, b);
        case ElementwiseKind::neg:
        case ElementwiseKind::abs:
        case ElementwiseKind::log:
        case ElementwiseKind::clamp:
            throw DimError("unary elementwise kind takes a single operand");
    }
    throw ContractError("unknown elementwise kind");
}

}  // namespace dect
