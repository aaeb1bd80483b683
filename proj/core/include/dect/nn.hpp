#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dect/nn_ops.hpp"
#include "dect/rng.hpp"
#include "dect/tensor.hpp"

namespace dect {

// A named, optimizable tensor. Frozen parameters still participate in the
// forward/backward pass (their gradients are computed and may accumulate);
// the optimizer just never touches them.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    bool frozen = false;
    std::vector<T> adam_m, adam_v;
    int64_t step_count = 0;

    Parameter() = default;
    // Copying would silently alias the underlying tensor between two owners.
    Parameter(const Parameter&) = delete;
    Parameter& operator=(const Parameter&) = delete;
    Parameter(Parameter&&) = default;
    Parameter& operator=(Parameter&&) = default;

    void init(std::string param_name, Tensor<T> v) {
        name = std::move(param_name);
        value = std::move(v);
        adam_m.assign(value.values().size(), T(0));
        adam_v.assign(value.values().size(), T(0));
        step_count = 0;
    }
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 1e-5;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0)) throw ContractError("adam lr must be positive");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ContractError("adam betas must lie in [0, 1)");
    }
};

// Classic Adam with bias correction. Weight decay is folded into the
// gradient (g += wd * theta) before the moment updates. Frozen parameters
// are skipped entirely, including their step counters.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, const AdamConfig& cfg, double lr_now) {
    if (lr_now < 0) throw ContractError("adam lr_now must be >= 0");
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T wd = static_cast<T>(cfg.weight_decay), eps = static_cast<T>(cfg.eps);
    const T lr = static_cast<T>(lr_now);
    for (Parameter<T>* p : params) {
        if (p->frozen) continue;
        if (!p->value.has_grad())
            throw ContractError("parameter '" + p->name + "' has no gradient but is not frozen");
        p->step_count += 1;
        const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(p->step_count)));
        const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(p->step_count)));
        auto& theta = p->value.mutable_values();
        const auto& grad = p->value.grad();
        for (size_t i = 0; i < theta.size(); ++i) {
            const T g = grad[i] + wd * theta[i];
            p->adam_m[i] = b1 * p->adam_m[i] + (T(1) - b1) * g;
            p->adam_v[i] = b2 * p->adam_v[i] + (T(1) - b2) * g * g;
            const T mhat = p->adam_m[i] / bc1;
            const T vhat = p->adam_v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
    for (Parameter<T>* p : params) p->value.zero_grad();
}

template <typename T>
std::vector<std::vector<T>> snapshot_params(const std::vector<Parameter<T>*>& params) {
    std::vector<std::vector<T>> snap;
    snap.reserve(params.size());
    for (const Parameter<T>* p : params) snap.push_back(p->value.values());
    return snap;
}

template <typename T>
void restore_params(const std::vector<Parameter<T>*>& params, const std::vector<std::vector<T>>& snap) {
    if (params.size() != snap.size()) throw ContractError("snapshot does not match parameter list");
    for (size_t i = 0; i < params.size(); ++i) params[i]->value.mutable_values() = snap[i];
}

// ---------------------------------------------------------------------------
// Layers.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dLayer {
    Parameter<T> weight, bias;
    int stride = 1;
    int pad = 0;

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight.value, bias.value, stride, pad); }
};

template <typename T>
struct InstanceNormLayer {
    Parameter<T> gain, shift;

    Tensor<T> forward(const Tensor<T>& x) const {
        return instance_norm(x, gain.value, shift.value, T(1e-5));
    }
};

namespace detail {

// Scaled normal (fan-in) initialization; `gain` is sqrt(2) in front of
// rectified units and 1 elsewhere. Biases start at zero.
template <typename T>
Conv2dLayer<T> make_conv(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad,
                         double gain, Rng& rng) {
    Conv2dLayer<T> layer;
    layer.stride = stride;
    layer.pad = pad;
    const double stddev = gain / std::sqrt(static_cast<double>(in_ch) * k * k);
    std::vector<T> w(static_cast<size_t>(out_ch) * in_ch * k * k);
    for (auto& v : w) v = static_cast<T>(rng.normal() * stddev);
    layer.weight.init(name + ".weight", Tensor<T>::leaf({out_ch, in_ch, k, k}, std::move(w), true));
    layer.bias.init(name + ".bias", Tensor<T>::zeros({out_ch}, true));
    return layer;
}

template <typename T>
Conv2dLayer<T> make_zero_conv(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad) {
    Conv2dLayer<T> layer;
    layer.stride = stride;
    layer.pad = pad;
    layer.weight.init(name + ".weight", Tensor<T>::zeros({out_ch, in_ch, k, k}, true));
    layer.bias.init(name + ".bias", Tensor<T>::zeros({out_ch}, true));
    return layer;
}

template <typename T>
InstanceNormLayer<T> make_norm(const std::string& name, int channels) {
    InstanceNormLayer<T> layer;
    layer.gain.init(name + ".gain", Tensor<T>::full({channels}, T(1), true));
    layer.shift.init(name + ".shift", Tensor<T>::zeros({channels}, true));
    return layer;
}

template <typename T>
void collect(Conv2dLayer<T>& l, std::vector<Parameter<T>*>& out) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
}

template <typename T>
void collect(InstanceNormLayer<T>& l, std::vector<Parameter<T>*>& out) {
    out.push_back(&l.gain);
    out.push_back(&l.shift);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator: fully convolutional residual encoder-decoder. Two stride-2
// stages behind a 7x7 stem, n_blocks residual blocks at the bottleneck, two
// nearest-neighbor-upsample + conv stages, and a 7x7 tanh head. Reflection
// padding throughout; output shape and range match the input shape and
// [-1, 1].
// ---------------------------------------------------------------------------

template <typename T>
struct GenResidualBlock {
    Conv2dLayer<T> conv1, conv2;
    InstanceNormLayer<T> norm1, norm2;
};

template <typename T>
struct GeneratorNet {
    int base_channels = 0;
    int n_blocks = 0;
    Conv2dLayer<T> stem;
    InstanceNormLayer<T> stem_norm;
    Conv2dLayer<T> down1, down2;
    InstanceNormLayer<T> down1_norm, down2_norm;
    std::vector<GenResidualBlock<T>> blocks;
    Conv2dLayer<T> up1, up2;
    InstanceNormLayer<T> up1_norm, up2_norm;
    Conv2dLayer<T> head;

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out;
        detail::collect(stem, out);
        detail::collect(stem_norm, out);
        detail::collect(down1, out);
        detail::collect(down1_norm, out);
        detail::collect(down2, out);
        detail::collect(down2_norm, out);
        for (auto& b : blocks) {
            detail::collect(b.conv1, out);
            detail::collect(b.norm1, out);
            detail::collect(b.conv2, out);
            detail::collect(b.norm2, out);
        }
        detail::collect(up1, out);
        detail::collect(up1_norm, out);
        detail::collect(up2, out);
        detail::collect(up2_norm, out);
        detail::collect(head, out);
        return out;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        const auto& s = x.shape();
        if (s.size() != 4 || s[1] != 1)
            throw DimError("generator input must be (N,1,H,W), got " + shape_str(s));
        if (s[2] % 4 != 0 || s[3] % 4 != 0)
            throw DimError("generator input spatial dims must be divisible by 4, got " + shape_str(s));
        auto t = relu(stem_norm.forward(stem.forward(x)));
        t = relu(down1_norm.forward(down1.forward(t)));
        t = relu(down2_norm.forward(down2.forward(t)));
        for (const auto& b : blocks) {
            auto u = relu(b.norm1.forward(b.conv1.forward(t)));
            u = b.norm2.forward(b.conv2.forward(u));
            t = add(t, u);
        }
        t = relu(up1_norm.forward(up1.forward(upsample_nearest(t, 2))));
        t = relu(up2_norm.forward(up2.forward(upsample_nearest(t, 2))));
        return dect::tanh(head.forward(t));
    }
};

template <typename T>
GeneratorNet<T> init_generator(int base_channels, int n_blocks, uint64_t seed) {
    if (base_channels < 4) throw ContractError("generator base_channels must be >= 4");
    if (n_blocks < 1) throw ContractError("generator needs at least one residual block");
    Rng rng(mix64(seed, 0x67656eull));  // stream tag "gen"
    GeneratorNet<T> net;
    net.base_channels = base_channels;
    net.n_blocks = n_blocks;
    const int c1 = base_channels, c2 = 2 * base_channels, c4 = 4 * base_channels;
    const double relu_gain = std::sqrt(2.0);
    net.stem = detail::make_conv<T>("stem", 1, c1, 7, 1, 3, relu_gain, rng);
    net.stem_norm = detail::make_norm<T>("stem_norm", c1);
    net.down1 = detail::make_conv<T>("down1", c1, c2, 3, 2, 1, relu_gain, rng);
    net.down1_norm = detail::make_norm<T>("down1_norm", c2);
    net.down2 = detail::make_conv<T>("down2", c2, c4, 3, 2, 1, relu_gain, rng);
    net.down2_norm = detail::make_norm<T>("down2_norm", c4);
    net.blocks.resize(n_blocks);
    for (int b = 0; b < n_blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b);
        net.blocks[b].conv1 = detail::make_conv<T>(prefix + ".conv1", c4, c4, 3, 1, 1, relu_gain, rng);
        net.blocks[b].norm1 = detail::make_norm<T>(prefix + ".norm1", c4);
        net.blocks[b].conv2 = detail::make_conv<T>(prefix + ".conv2", c4, c4, 3, 1, 1, 1.0, rng);
        net.blocks[b].norm2 = detail::make_norm<T>(prefix + ".norm2", c4);
    }
    net.up1 = detail::make_conv<T>("up1", c4, c2, 3, 1, 1, relu_gain, rng);
    net.up1_norm = detail::make_norm<T>("up1_norm", c2);
    net.up2 = detail::make_conv<T>("up2", c2, c1, 3, 1, 1, relu_gain, rng);
    net.up2_norm = detail::make_norm<T>("up2_norm", c1);
    net.head = detail::make_conv<T>("head", c1, 1, 7, 1, 3, 1.0, rng);
    return net;
}

// ---------------------------------------------------------------------------
// Classifier: small residual network with stride-2 stages, global average
// pooling and a zero-initialized 1x1 head producing one raw logit per sample.
// ---------------------------------------------------------------------------

template <typename T>
struct ClsStage {
    Conv2dLayer<T> conv1, conv2, proj;
    InstanceNormLayer<T> norm1, norm2, proj_norm;
};

template <typename T>
struct ClassifierNet {
    int base_channels = 0;
    int n_stages = 0;
    Conv2dLayer<T> stem;
    InstanceNormLayer<T> stem_norm;
    std::vector<ClsStage<T>> stages;
    Conv2dLayer<T> head;

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out;
        detail::collect(stem, out);
        detail::collect(stem_norm, out);
        for (auto& s : stages) {
            detail::collect(s.conv1, out);
            detail::collect(s.norm1, out);
            detail::collect(s.conv2, out);
            detail::collect(s.norm2, out);
            detail::collect(s.proj, out);
            detail::collect(s.proj_norm, out);
        }
        detail::collect(head, out);
        return out;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        const auto& s = x.shape();
        if (s.size() != 4 || s[1] != 1)
            throw DimError("classifier input must be (N,1,H,W), got " + shape_str(s));
        const int div = 1 << n_stages;
        if (s[2] % div != 0 || s[3] % div != 0)
            throw DimError("classifier input spatial dims must be divisible by " + std::to_string(div) +
                           ", got " + shape_str(s));
        auto t = leaky_relu(stem_norm.forward(stem.forward(x)));
        for (const auto& st : stages) {
            auto main = leaky_relu(st.norm1.forward(st.conv1.forward(t)));
            main = st.norm2.forward(st.conv2.forward(main));
            auto skip = st.proj_norm.forward(st.proj.forward(t));
            t = leaky_relu(add(main, skip));
        }
        auto pooled = mean_hw(t);
        auto logits = head.forward(pooled);
        return reshape(logits, {s[0], 1});
    }
};

template <typename T>
ClassifierNet<T> init_classifier(int base_channels, int n_stages, uint64_t seed) {
    if (base_channels < 4) throw ContractError("classifier base_channels must be >= 4");
    if (n_stages < 1) throw ContractError("classifier needs at least one stage");
    Rng rng(mix64(seed, 0x636c73ull));  // stream tag "cls"
    ClassifierNet<T> net;
    net.base_channels = base_channels;
    net.n_stages = n_stages;
    const double lrelu_gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
    net.stem = detail::make_conv<T>("stem", 1, base_channels, 3, 1, 1, lrelu_gain, rng);
    net.stem_norm = detail::make_norm<T>("stem_norm", base_channels);
    net.stages.resize(n_stages);
    int ch = base_channels;
    for (int i = 0; i < n_stages; ++i) {
        const std::string prefix = "stage" + std::to_string(i);
        const int out_ch = ch * 2;
        net.stages[i].conv1 = detail::make_conv<T>(prefix + ".conv1", ch, out_ch, 3, 2, 1, lrelu_gain, rng);
        net.stages[i].norm1 = detail::make_norm<T>(prefix + ".norm1", out_ch);
        net.stages[i].conv2 = detail::make_conv<T>(prefix + ".conv2", out_ch, out_ch, 3, 1, 1, 1.0, rng);
        net.stages[i].norm2 = detail::make_norm<T>(prefix + ".norm2", out_ch);
        net.stages[i].proj = detail::make_conv<T>(prefix + ".proj", ch, out_ch, 1, 2, 0, 1.0, rng);
        net.stages[i].proj_norm = detail::make_norm<T>(prefix + ".proj_norm", out_ch);
        ch = out_ch;
    }
    // Zero head: every input starts at logit 0, i.e. probability one half.
    net.head = detail::make_zero_conv<T>("head", ch, 1, 1, 1, 0);
    return net;
}

template <typename T>
void set_frozen(GeneratorNet<T>& net, bool frozen) {
    for (Parameter<T>* p : net.parameters()) p->frozen = frozen;
}

template <typename T>
void set_frozen(ClassifierNet<T>& net, bool frozen) {
    for (Parameter<T>* p : net.parameters()) p->frozen = frozen;
}

template <typename T>
int64_t parameter_count(std::vector<Parameter<T>*> params) {
    int64_t n = 0;
    for (const Parameter<T>* p : params) n += p->value.numel();
    return n;
}

}  // namespace dect
