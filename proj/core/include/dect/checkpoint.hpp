#pragma once

#include <optional>
#include <string>

#include "dect/config.hpp"
#include "dect/nn.hpp"

namespace dect {

// A checkpoint is a directory holding
//   manifest.txt  one line per parameter: "<name> <dim0> <dim1> ... <offset>"
//   params.bin    all parameter values, 32-bit little-endian, in manifest order
//   optim.bin     (optional) per parameter: f32 m[n], f32 v[n], u32 step_count
//   config.txt    training configuration echo plus "fold=" and "epoch=" lines
// Generator parameters carry the "gen." prefix and classifier parameters
// "cls."; the loader rebuilds the networks from the config echo and verifies
// every manifest extent against the blob.
struct Checkpoint {
    TrainConfig config;
    int fold = 0;
    int epoch = 0;
    std::optional<GeneratorNet<float>> gen;
    std::optional<ClassifierNet<float>> cls;
    bool has_optimizer_state = false;
};

// Either network pointer may be null; at least one must be present.
void save_checkpoint(const std::string& dir, const TrainConfig& config, int fold, int epoch,
                     GeneratorNet<float>* gen, ClassifierNet<float>* cls, bool with_optimizer_state);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace dect
