#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dect/error.hpp"
#include "dect/io_util.hpp"
#include "dect/nn.hpp"

namespace dect {

enum class TrainMode { joint, sequential, classifier_only };
enum class ClassifierInput { generated, poly };

inline std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::joint: return "joint";
        case TrainMode::sequential: return "sequential";
        case TrainMode::classifier_only: return "classifier-only";
    }
    throw ContractError("unknown train mode");
}

inline TrainMode parse_train_mode(const std::string& s) {
    if (s == "joint") return TrainMode::joint;
    if (s == "sequential") return TrainMode::sequential;
    if (s == "classifier-only" || s == "classifier_only") return TrainMode::classifier_only;
    throw UsageError("unknown mode '" + s + "' (expected joint|sequential|classifier-only)");
}

inline std::string to_string(ClassifierInput c) {
    return c == ClassifierInput::generated ? "generated" : "poly";
}

inline ClassifierInput parse_classifier_input(const std::string& s) {
    if (s == "generated") return ClassifierInput::generated;
    if (s == "poly") return ClassifierInput::poly;
    throw UsageError("unknown classifier input '" + s + "' (expected generated|poly)");
}

// All training hyperparameters. Desk-scale defaults; paper_scale() restores
// the original large-scale settings for reference runs.
struct TrainConfig {
    TrainMode mode = TrainMode::joint;
    int epochs_const = 5;
    int epochs_decay = 5;
    int batch_size = 8;
    int image_size = 64;
    double mix_fraction = 0.5;
    uint64_t seed = 0;
    ClassifierInput classifier_input = ClassifierInput::generated;
    int gen_base_channels = 16;
    int gen_blocks = 4;
    int cls_base_channels = 16;
    int cls_stages = 3;
    AdamConfig adam;

    int total_epochs() const { return epochs_const + epochs_decay; }

    static TrainConfig paper_scale() {
        TrainConfig cfg;
        cfg.batch_size = 5;
        cfg.image_size = 512;
        cfg.gen_base_channels = 64;
        cfg.gen_blocks = 9;
        cfg.cls_base_channels = 64;
        cfg.cls_stages = 4;
        return cfg;
    }

    void validate() const {
        if (epochs_const < 1 || epochs_decay < 1) throw ContractError("epoch counts must be >= 1");
        if (batch_size < 1) throw ContractError("batch_size must be >= 1");
        if (image_size < 4 || image_size % 4 != 0)
            throw ContractError("image_size must be a positive multiple of 4");
        if (!(mix_fraction > 0.0 && mix_fraction < 1.0) && mode == TrainMode::joint)
            throw ContractError("mix_fraction must lie in (0, 1) for joint training");
        adam.validate();
    }
};

// Canonical key=value lines; parse(serialize(cfg)) is exact, including the
// floating-point fields (shortest round-trip formatting).
inline std::vector<std::string> serialize_config(const TrainConfig& cfg) {
    using detail::format_double;
    return {
        "mode=" + to_string(cfg.mode),
        "epochs_const=" + std::to_string(cfg.epochs_const),
        "epochs_decay=" + std::to_string(cfg.epochs_decay),
        "batch_size=" + std::to_string(cfg.batch_size),
        "image_size=" + std::to_string(cfg.image_size),
        "mix_fraction=" + format_double(cfg.mix_fraction),
        "seed=" + std::to_string(cfg.seed),
        "classifier_input=" + to_string(cfg.classifier_input),
        "gen_base_channels=" + std::to_string(cfg.gen_base_channels),
        "gen_blocks=" + std::to_string(cfg.gen_blocks),
        "cls_base_channels=" + std::to_string(cfg.cls_base_channels),
        "cls_stages=" + std::to_string(cfg.cls_stages),
        "adam_lr=" + format_double(cfg.adam.lr),
        "adam_beta1=" + format_double(cfg.adam.beta1),
        "adam_beta2=" + format_double(cfg.adam.beta2),
        "adam_weight_decay=" + format_double(cfg.adam.weight_decay),
        "adam_eps=" + format_double(cfg.adam.eps),
    };
}

inline void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_int;
    if (key == "mode") cfg.mode = parse_train_mode(value);
    else if (key == "epochs_const") cfg.epochs_const = static_cast<int>(parse_int(value));
    else if (key == "epochs_decay") cfg.epochs_decay = static_cast<int>(parse_int(value));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(value));
    else if (key == "image_size") cfg.image_size = static_cast<int>(parse_int(value));
    else if (key == "mix_fraction") cfg.mix_fraction = parse_double(value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value));
    else if (key == "classifier_input") cfg.classifier_input = parse_classifier_input(value);
    else if (key == "gen_base_channels") cfg.gen_base_channels = static_cast<int>(parse_int(value));
    else if (key == "gen_blocks") cfg.gen_blocks = static_cast<int>(parse_int(value));
    else if (key == "cls_base_channels") cfg.cls_base_channels = static_cast<int>(parse_int(value));
    else if (key == "cls_stages") cfg.cls_stages = static_cast<int>(parse_int(value));
    else if (key == "adam_lr") cfg.adam.lr = parse_double(value);
    else if (key == "adam_beta1") cfg.adam.beta1 = parse_double(value);
    else if (key == "adam_beta2") cfg.adam.beta2 = parse_double(value);
    else if (key == "adam_weight_decay") cfg.adam.weight_decay = parse_double(value);
    else if (key == "adam_eps") cfg.adam.eps = parse_double(value);
    else throw IntegrityError("unknown config key '" + key + "'");
}

}  // namespace dect
