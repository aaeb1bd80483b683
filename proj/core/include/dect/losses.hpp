#pragma once

#include <cstdint>
#include <vector>

#include "dect/tensor.hpp"

namespace dect {

// Mean absolute error over all elements.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape())
        throw DimError("l1_loss shapes differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    return mean_all(abs(sub(pred, target)));
}

namespace detail {

template <typename T>
void bce_backward(Node<T>& node) {
    auto& logits = *node.inputs[0];
    if (!logits.requires_grad) return;
    logits.ensure_grad();
    const T g = node.grad[0] / static_cast<T>(logits.numel());
    // saved holds d(per-element loss)/d(logit), zero where the probability
    // clamp flattened the loss.
    for (size_t i = 0; i < logits.grad.size(); ++i) logits.grad[i] += g * node.saved[i];
}

}  // namespace detail

// Binary cross-entropy on raw logits, mean over the batch. The sigmoid is
// never materialized: each element is computed as
//   max(l, 0) - l*z + log1p(exp(-|l|))
// which is exact and overflow-free for any logit. The implied probability is
// clamped to [1e-12, 1 - 1e-12], so per-element losses are capped at
// -log(1e-12) and the clamped region contributes zero gradient.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<uint8_t>& labels) {
    const auto& ln = *logits.node();
    if (ln.numel() != static_cast<int64_t>(labels.size()))
        throw DimError("bce_with_logits needs one logit per label: " + std::to_string(ln.numel()) + " logits vs " +
                       std::to_string(labels.size()) + " labels");
    if (ln.numel() == 0) throw DegenerateInputError("bce_with_logits on an empty batch");
    for (uint8_t z : labels)
        if (z > 1) throw ContractError("labels must be 0 or 1, got " + std::to_string(int(z)));

    auto out = detail::make_op_node<T>(Op::bce_with_logits, {1}, {logits.node()}, &detail::bce_backward<T>);
    out->saved.resize(labels.size());
    const T loss_lo = -std::log1p(static_cast<T>(-kLogFloor));  // -log(1 - 1e-12)
    const T loss_hi = -std::log(static_cast<T>(kLogFloor));     // -log(1e-12)
    T total = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const T l = ln.value[i];
        const T z = static_cast<T>(labels[i]);
        const T raw = std::max(l, T(0)) - l * z + std::log1p(std::exp(-std::abs(l)));
        if (raw < loss_lo) {
            total += loss_lo;
            out->saved[i] = T(0);
        } else if (raw > loss_hi) {
            total += loss_hi;
            out->saved[i] = T(0);
        } else {
            total += raw;
            const T sig = l >= 0 ? T(1) / (T(1) + std::exp(-l)) : std::exp(l) / (T(1) + std::exp(l));
            out->saved[i] = sig - z;
        }
    }
    out->value[0] = total / static_cast<T>(labels.size());
    return Tensor<T>(out);
}

// Scalar summary of a mixed-batch loss; `combined` follows the marker
// formulation: mean(marker) weights the classification term, its complement
// the translation term, and an empty subset contributes zero with zero
// weight.
struct LossBreakdown {
    double l1 = 0.0;
    double cls = 0.0;
    double combined = 0.0;
    int n_paired = 0;
    int n_labeled = 0;
};

inline LossBreakdown make_breakdown(double l1, double cls, int n_paired, int n_labeled) {
    LossBreakdown b;
    b.l1 = l1;
    b.cls = cls;
    b.n_paired = n_paired;
    b.n_labeled = n_labeled;
    const int batch = n_paired + n_labeled;
    if (batch == 0) return b;
    const double mbar = static_cast<double>(n_labeled) / batch;
    b.combined = mbar * cls + (1.0 - mbar) * l1;
    return b;
}

// Per-sample marker consistency: a training sample must carry exactly one
// annotation, and the marker must select the matching loss branch.
inline void check_marker_consistency(const std::vector<uint8_t>& markers, const std::vector<bool>& has_mono,
                                     const std::vector<bool>& has_label) {
    if (markers.size() != has_mono.size() || markers.size() != has_label.size())
        throw ContractError("marker/annotation lists must have equal length");
    for (size_t i = 0; i < markers.size(); ++i) {
        if (has_mono[i] == has_label[i])
            throw ContractError("sample " + std::to_string(i) + " must carry exactly one of {mono target, label}");
        if (markers[i] > 1) throw ContractError("marker must be 0 or 1");
        const bool labeled = markers[i] == 1;
        if (labeled != has_label[i])
            throw ContractError("sample " + std::to_string(i) + " marker does not match its annotation");
    }
}

template <typename T>
struct CombinedLoss {
    Tensor<T> combined;  // differentiable scalar
    Tensor<T> l1_term;   // defined iff the batch has paired samples
    Tensor<T> cls_term;  // defined iff the batch has labeled samples
    LossBreakdown values;
};

// Marker-switched loss over a mixed batch. `gen_out`/`mono_targets` cover the
// marker-0 subset and `logits`/`labels` the marker-1 subset, in batch order.
// With a single-domain batch the combined tensor IS the corresponding subset
// loss, so the endpoint equivalences hold bitwise.
template <typename T>
CombinedLoss<T> combined_loss(const std::vector<uint8_t>& markers, const Tensor<T>& gen_out,
                              const Tensor<T>& mono_targets, const Tensor<T>& logits,
                              const std::vector<uint8_t>& labels) {
    int n_paired = 0, n_labeled = 0;
    for (uint8_t m : markers) {
        if (m > 1) throw ContractError("marker must be 0 or 1");
        m ? ++n_labeled : ++n_paired;
    }
    if (n_paired + n_labeled == 0) throw DegenerateInputError("combined_loss on an empty batch");
    const int gen_n = gen_out.defined() ? gen_out.shape()[0] : 0;
    const int logit_n = logits.defined() ? static_cast<int>(logits.numel()) : 0;
    if (gen_n != n_paired)
        throw ContractError("generator outputs cover " + std::to_string(gen_n) + " samples but batch has " +
                            std::to_string(n_paired) + " paired markers");
    if (logit_n != n_labeled || static_cast<int>(labels.size()) != n_labeled)
        throw ContractError("logits/labels cover " + std::to_string(logit_n) + " samples but batch has " +
                            std::to_string(n_labeled) + " labeled markers");

    CombinedLoss<T> out;
    out.values.n_paired = n_paired;
    out.values.n_labeled = n_labeled;
    if (n_paired > 0) {
        out.l1_term = l1_loss(gen_out, mono_targets);
        out.values.l1 = static_cast<double>(out.l1_term.item());
    }
    if (n_labeled > 0) {
        out.cls_term = bce_with_logits(logits, labels);
        out.values.cls = static_cast<double>(out.cls_term.item());
    }
    if (n_labeled == 0) {
        out.combined = out.l1_term;
    } else if (n_paired == 0) {
        out.combined = out.cls_term;
    } else {
        const T mbar = static_cast<T>(n_labeled) / static_cast<T>(n_paired + n_labeled);
        out.combined = add(mul(Tensor<T>::scalar(mbar), out.cls_term),
                           mul(Tensor<T>::scalar(T(1) - mbar), out.l1_term));
    }
    out.values.combined = static_cast<double>(out.combined.item());
    return out;
}

}  // namespace dect
