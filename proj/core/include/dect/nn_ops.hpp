#pragma once

#include <cmath>
#include <vector>

#include "dect/gemm.hpp"
#include "dect/tensor.hpp"

namespace dect {

namespace detail {

// Mirror index for reflection padding without edge repetition; valid for
// offsets up to n-1 past either border.
inline int reflect_index(int t, int n) {
    if (t < 0) return -t;
    if (t >= n) return 2 * n - 2 - t;
    return t;
}

template <typename T>
std::vector<T>& conv_scratch(int which) {
    thread_local std::vector<T> buffers[5];
    return buffers[which];
}

template <typename T>
void reflect_pad_plane(const T* src, int h, int w, int pad, T* dst) {
    const int hp = h + 2 * pad, wp = w + 2 * pad;
    for (int y = 0; y < hp; ++y) {
        const T* srow = src + static_cast<size_t>(reflect_index(y - pad, h)) * w;
        T* drow = dst + static_cast<size_t>(y) * wp;
        for (int x = 0; x < wp; ++x) drow[x] = srow[reflect_index(x - pad, w)];
    }
}

// col[(i*K+ky)*K+kx][oy*Wo+ox] = padded[i][oy*s+ky][ox*s+kx]
template <typename T>
void im2col(const T* padded, int channels, int hp, int wp, int k, int stride, int ho, int wo, T* col) {
    for (int i = 0; i < channels; ++i) {
        const T* plane = padded + static_cast<size_t>(i) * hp * wp;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* crow = col + (static_cast<size_t>(i) * k * k + ky * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const T* srow = plane + static_cast<size_t>(oy * stride + ky) * wp + kx;
                    T* drow = crow + static_cast<size_t>(oy) * wo;
                    if (stride == 1) {
                        for (int ox = 0; ox < wo; ++ox) drow[ox] = srow[ox];
                    } else {
                        for (int ox = 0; ox < wo; ++ox) drow[ox] = srow[ox * stride];
                    }
                }
            }
    }
}

template <typename T>
void col2im_add(const T* col, int channels, int hp, int wp, int k, int stride, int ho, int wo, T* padded) {
    for (int i = 0; i < channels; ++i) {
        T* plane = padded + static_cast<size_t>(i) * hp * wp;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* crow = col + (static_cast<size_t>(i) * k * k + ky * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    T* drow = plane + static_cast<size_t>(oy * stride + ky) * wp + kx;
                    const T* srow = crow + static_cast<size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) drow[ox * stride] += srow[ox];
                }
            }
    }
}

template <typename T>
void conv2d_backward(Node<T>& node);

}  // namespace detail

// 2-d cross-correlation with reflection padding.
//
// input (N,I,H,W), weight (O,I,K,K), bias (O); output spatial size is
// floor((H + 2*pad - K) / stride) + 1. The forward pass runs one
// im2col + GEMM per sample, parallelized over the batch; outputs are
// disjoint per sample so the result does not depend on thread count.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride = 1, int reflect_pad = 0) {
    const auto& in = *input.node();
    const auto& wn = *weight.node();
    const auto& bn = *bias.node();
    if (in.shape.size() != 4) throw DimError("conv2d input must be NCHW, got " + shape_str(in.shape));
    if (wn.shape.size() != 4) throw DimError("conv2d weight must be OIKK, got " + shape_str(wn.shape));
    const int n = in.shape[0], ci = in.shape[1], h = in.shape[2], w = in.shape[3];
    const int co = wn.shape[0], k = wn.shape[2];
    if (wn.shape[1] != ci)
        throw DimError("conv2d channel mismatch: input has " + std::to_string(ci) + ", weight expects " +
                       std::to_string(wn.shape[1]));
    if (wn.shape[2] != wn.shape[3]) throw DimError("conv2d kernel must be square, got " + shape_str(wn.shape));
    if (bn.shape.size() != 1 || bn.shape[0] != co)
        throw DimError("conv2d bias must have shape (" + std::to_string(co) + "), got " + shape_str(bn.shape));
    if (stride < 1) throw ContractError("conv2d stride must be >= 1");
    if (reflect_pad < 0) throw ContractError("conv2d padding must be >= 0");
    if (reflect_pad >= h || reflect_pad >= w)
        throw DimError("reflection padding " + std::to_string(reflect_pad) + " too large for " + shape_str(in.shape));
    const int hp = h + 2 * reflect_pad, wp = w + 2 * reflect_pad;
    if (hp < k || wp < k)
        throw DimError("padded spatial dims " + std::to_string(hp) + "x" + std::to_string(wp) +
                       " smaller than kernel " + std::to_string(k));
    const int ho = (hp - k) / stride + 1, wo = (wp - k) / stride + 1;

    auto out = detail::make_op_node<T>(Op::conv2d, {n, co, ho, wo}, {input.node(), weight.node(), bias.node()},
                                       &detail::conv2d_backward<T>);
    out->attrs = {stride, reflect_pad, n, ci, h, w, co, k, ho, wo};

    const int cols = ci * k * k;
    const int pos = ho * wo;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        auto& padded = detail::conv_scratch<T>(0);
        auto& col = detail::conv_scratch<T>(1);
        padded.resize(static_cast<size_t>(ci) * hp * wp);
        col.resize(static_cast<size_t>(cols) * pos);
        const T* src = in.value.data() + static_cast<size_t>(s) * ci * h * w;
        for (int i = 0; i < ci; ++i)
            detail::reflect_pad_plane(src + static_cast<size_t>(i) * h * w, h, w, reflect_pad,
                                      padded.data() + static_cast<size_t>(i) * hp * wp);
        detail::im2col(padded.data(), ci, hp, wp, k, stride, ho, wo, col.data());
        T* dst = out->value.data() + static_cast<size_t>(s) * co * pos;
        for (int o = 0; o < co; ++o)
            for (int p = 0; p < pos; ++p) dst[static_cast<size_t>(o) * pos + p] = bn.value[o];
        detail::gemm_acc(co, pos, cols, wn.value.data(), col.data(), dst);
    }
    return Tensor<T>(out);
}

namespace detail {

template <typename T>
void conv2d_backward(Node<T>& node) {
    auto& in = *node.inputs[0];
    auto& wn = *node.inputs[1];
    auto& bn = *node.inputs[2];
    const int stride = static_cast<int>(node.attrs[0]);
    const int pad = static_cast<int>(node.attrs[1]);
    const int n = static_cast<int>(node.attrs[2]), ci = static_cast<int>(node.attrs[3]);
    const int h = static_cast<int>(node.attrs[4]), w = static_cast<int>(node.attrs[5]);
    const int co = static_cast<int>(node.attrs[6]), k = static_cast<int>(node.attrs[7]);
    const int ho = static_cast<int>(node.attrs[8]), wo = static_cast<int>(node.attrs[9]);
    const int hp = h + 2 * pad, wp = w + 2 * pad;
    const int cols = ci * k * k;
    const int pos = ho * wo;

    if (bn.requires_grad) {
        bn.ensure_grad();
        for (int s = 0; s < n; ++s) {
            const T* g = node.grad.data() + static_cast<size_t>(s) * co * pos;
            for (int o = 0; o < co; ++o) {
                T acc = 0;
                const T* row = g + static_cast<size_t>(o) * pos;
                for (int p = 0; p < pos; ++p) acc += row[p];
                bn.grad[o] += acc;
            }
        }
    }

    const bool need_w = wn.requires_grad;
    const bool need_x = in.requires_grad;
    if (!need_w && !need_x) return;
    if (need_w) wn.ensure_grad();
    if (need_x) in.ensure_grad();

    // Transposed weight view for the input gradient, built once.
    std::vector<T> wt;
    if (need_x) {
        wt.resize(static_cast<size_t>(cols) * co);
        transpose(co, cols, wn.value.data(), wt.data());
    }
    // Per-sample weight-gradient slabs; reduced serially afterwards so the
    // accumulation order is independent of the thread schedule.
    std::vector<T> wslab;
    if (need_w) wslab.assign(static_cast<size_t>(n) * co * cols, T(0));

#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        auto& padded = conv_scratch<T>(0);
        auto& col = conv_scratch<T>(1);
        auto& colt = conv_scratch<T>(2);
        auto& gcol = conv_scratch<T>(3);
        auto& gpad = conv_scratch<T>(4);
        padded.resize(static_cast<size_t>(ci) * hp * wp);
        col.resize(static_cast<size_t>(cols) * pos);
        const T* src = in.value.data() + static_cast<size_t>(s) * ci * h * w;
        for (int i = 0; i < ci; ++i)
            reflect_pad_plane(src + static_cast<size_t>(i) * h * w, h, w, pad,
                              padded.data() + static_cast<size_t>(i) * hp * wp);
        im2col(padded.data(), ci, hp, wp, k, stride, ho, wo, col.data());
        const T* g = node.grad.data() + static_cast<size_t>(s) * co * pos;

        if (need_w) {
            colt.resize(static_cast<size_t>(pos) * cols);
            transpose(cols, pos, col.data(), colt.data());
            gemm_acc(co, cols, pos, g, colt.data(), wslab.data() + static_cast<size_t>(s) * co * cols);
        }
        if (need_x) {
            gcol.assign(static_cast<size_t>(cols) * pos, T(0));
            gemm_acc(cols, pos, co, wt.data(), g, gcol.data());
            gpad.assign(static_cast<size_t>(ci) * hp * wp, T(0));
            col2im_add(gcol.data(), ci, hp, wp, k, stride, ho, wo, gpad.data());
            // Fold the padded-plane gradient back through the reflection map.
            T* gx = in.grad.data() + static_cast<size_t>(s) * ci * h * w;
            for (int i = 0; i < ci; ++i) {
                const T* gp = gpad.data() + static_cast<size_t>(i) * hp * wp;
                T* gxi = gx + static_cast<size_t>(i) * h * w;
                for (int y = 0; y < hp; ++y) {
                    const int ry = reflect_index(y - pad, h);
                    const T* grow = gp + static_cast<size_t>(y) * wp;
                    T* drow = gxi + static_cast<size_t>(ry) * w;
                    for (int x = 0; x < wp; ++x) drow[reflect_index(x - pad, w)] += grow[x];
                }
            }
        }
    }

    if (need_w) {
        for (int s = 0; s < n; ++s) {
            const T* slab = wslab.data() + static_cast<size_t>(s) * co * cols;
            for (size_t i = 0; i < wn.grad.size(); ++i) wn.grad[i] += slab[i];
        }
    }
}

template <typename T>
void upsample_backward(Node<T>& node) {
    auto& in = *node.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    const int f = static_cast<int>(node.attrs[0]);
    const int n = static_cast<int>(node.attrs[1]), c = static_cast<int>(node.attrs[2]);
    const int h = static_cast<int>(node.attrs[3]), w = static_cast<int>(node.attrs[4]);
    const int wf = w * f;
#pragma omp parallel for schedule(static)
    for (int plane = 0; plane < n * c; ++plane) {
        const T* g = node.grad.data() + static_cast<size_t>(plane) * h * f * wf;
        T* gx = in.grad.data() + static_cast<size_t>(plane) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                T acc = 0;
                for (int dy = 0; dy < f; ++dy) {
                    const T* row = g + static_cast<size_t>(y * f + dy) * wf + x * f;
                    for (int dx = 0; dx < f; ++dx) acc += row[dx];
                }
                gx[static_cast<size_t>(y) * w + x] += acc;
            }
    }
}

template <typename T>
void instance_norm_backward(Node<T>& node) {
    auto& in = *node.inputs[0];
    auto& gain = *node.inputs[1];
    auto& shift = *node.inputs[2];
    const int n = static_cast<int>(node.attrs[0]), c = static_cast<int>(node.attrs[1]);
    const int h = static_cast<int>(node.attrs[2]), w = static_cast<int>(node.attrs[3]);
    const int hw = h * w;
    const bool need_x = in.requires_grad;
    if (need_x) in.ensure_grad();
    if (gain.requires_grad) gain.ensure_grad();
    if (shift.requires_grad) shift.ensure_grad();

    // One thread owns a channel: its gain/shift slots and all of the
    // channel's input-gradient planes, keeping writes disjoint.
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        for (int s = 0; s < n; ++s) {
            const size_t base = (static_cast<size_t>(s) * c + ch) * hw;
            const T mean = node.saved[static_cast<size_t>(s) * c + ch];
            const T inv = node.saved[static_cast<size_t>(n) * c + static_cast<size_t>(s) * c + ch];
            const T* g = node.grad.data() + base;
            const T* x = in.value.data() + base;
            T sum_g = 0, sum_gxh = 0;
            for (int i = 0; i < hw; ++i) {
                const T xh = (x[i] - mean) * inv;
                sum_g += g[i];
                sum_gxh += g[i] * xh;
            }
            if (shift.requires_grad) shift.grad[ch] += sum_g;
            if (gain.requires_grad) gain.grad[ch] += sum_gxh;
            if (need_x) {
                const T scale = gain.value[ch] * inv;
                const T mg = sum_g / static_cast<T>(hw);
                const T mgxh = sum_gxh / static_cast<T>(hw);
                T* gx = in.grad.data() + base;
                for (int i = 0; i < hw; ++i) {
                    const T xh = (x[i] - mean) * inv;
                    gx[i] += scale * (g[i] - mg - xh * mgxh);
                }
            }
        }
    }
}

template <typename T>
void mean_hw_backward(Node<T>& node) {
    auto& in = *node.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    const int n = static_cast<int>(node.attrs[0]), c = static_cast<int>(node.attrs[1]);
    const int hw = static_cast<int>(node.attrs[2]) * static_cast<int>(node.attrs[3]);
    for (int plane = 0; plane < n * c; ++plane) {
        const T g = node.grad[plane] / static_cast<T>(hw);
        T* gx = in.grad.data() + static_cast<size_t>(plane) * hw;
        for (int i = 0; i < hw; ++i) gx[i] += g;
    }
}

}  // namespace detail

// Nearest-neighbor upsampling by an integer factor: (N,C,H,W) -> (N,C,fH,fW).
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, int factor) {
    const auto& in = *input.node();
    if (in.shape.size() != 4) throw DimError("upsample_nearest input must be NCHW, got " + shape_str(in.shape));
    if (factor < 1) throw ContractError("upsample factor must be >= 1");
    const int n = in.shape[0], c = in.shape[1], h = in.shape[2], w = in.shape[3];
    auto out = detail::make_op_node<T>(Op::upsample_nearest, {n, c, h * factor, w * factor}, {input.node()},
                                       &detail::upsample_backward<T>);
    out->attrs = {factor, n, c, h, w};
    const int wf = w * factor;
#pragma omp parallel for schedule(static)
    for (int plane = 0; plane < n * c; ++plane) {
        const T* src = in.value.data() + static_cast<size_t>(plane) * h * w;
        T* dst = out->value.data() + static_cast<size_t>(plane) * h * factor * wf;
        for (int y = 0; y < h * factor; ++y) {
            const T* srow = src + static_cast<size_t>(y / factor) * w;
            T* drow = dst + static_cast<size_t>(y) * wf;
            for (int x = 0; x < wf; ++x) drow[x] = srow[x / factor];
        }
    }
    return Tensor<T>(out);
}

// Per-sample, per-channel standardization over the spatial extent followed by
// a learnable affine map. Population variance with eps added before the
// square root.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gain, const Tensor<T>& shift,
                        T eps = T(1e-5)) {
    const auto& in = *input.node();
    if (in.shape.size() != 4) throw DimError("instance_norm input must be NCHW, got " + shape_str(in.shape));
    const int n = in.shape[0], c = in.shape[1], h = in.shape[2], w = in.shape[3];
    if (gain.shape() != std::vector<int>{c} || shift.shape() != std::vector<int>{c})
        throw DimError("instance_norm gain/shift must have shape (" + std::to_string(c) + ")");
    if (h * w < 2) throw DegenerateInputError("instance_norm needs at least 2 spatial elements");
    auto out = detail::make_op_node<T>(Op::instance_norm, in.shape, {input.node(), gain.node(), shift.node()},
                                       &detail::instance_norm_backward<T>);
    out->attrs = {n, c, h, w};
    out->saved.resize(static_cast<size_t>(2) * n * c);
    const int hw = h * w;
#pragma omp parallel for schedule(static)
    for (int plane = 0; plane < n * c; ++plane) {
        const int ch = plane % c;
        const T* x = in.value.data() + static_cast<size_t>(plane) * hw;
        T sum = 0;
        for (int i = 0; i < hw; ++i) sum += x[i];
        const T mean = sum / static_cast<T>(hw);
        T var = 0;
        for (int i = 0; i < hw; ++i) {
            const T d = x[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(hw);
        const T inv = T(1) / std::sqrt(var + eps);
        out->saved[plane] = mean;
        out->saved[static_cast<size_t>(n) * c + plane] = inv;
        const T g = gain.values()[ch], b = shift.values()[ch];
        T* y = out->value.data() + static_cast<size_t>(plane) * hw;
        for (int i = 0; i < hw; ++i) y[i] = g * (x[i] - mean) * inv + b;
    }
    return Tensor<T>(out);
}

// Spatial mean per sample and channel: (N,C,H,W) -> (N,C,1,1).
template <typename T>
Tensor<T> mean_hw(const Tensor<T>& input) {
    const auto& in = *input.node();
    if (in.shape.size() != 4) throw DimError("mean_hw input must be NCHW, got " + shape_str(in.shape));
    const int n = in.shape[0], c = in.shape[1], h = in.shape[2], w = in.shape[3];
    auto out = detail::make_op_node<T>(Op::mean_hw, {n, c, 1, 1}, {input.node()}, &detail::mean_hw_backward<T>);
    out->attrs = {n, c, h, w};
    const int hw = h * w;
    for (int plane = 0; plane < n * c; ++plane) {
        const T* x = in.value.data() + static_cast<size_t>(plane) * hw;
        T sum = 0;
        for (int i = 0; i < hw; ++i) sum += x[i];
        out->value[plane] = sum / static_cast<T>(hw);
    }
    return Tensor<T>(out);
}

}  // namespace dect
