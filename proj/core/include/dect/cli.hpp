#pragma once

#include <cstdint>
#include <string>

namespace dect {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitIntegrity = 3;

struct GenDataOptions {
    uint64_t seed = 0;
    int n_patients = 0;
    int slices_per_patient = 0;
    std::string role;
    double lesion_prob = 0.5;
    int image_size = 64;
    std::string out;
};

struct TrainOptions {
    std::string mode;
    std::string paired_path;
    std::string labeled_path;
    std::string eval_path;
    int folds = 5;
    uint64_t seed = 0;
    std::string out_dir;
    // Hyperparameter overrides; negative values keep the defaults.
    int epochs_const = -1;
    int epochs_decay = -1;
    int batch_size = -1;
    double lr = -1.0;
    double beta1 = -1.0;
    double beta2 = -1.0;
    double weight_decay = -1.0;
    double mix_fraction = -1.0;
    int gen_base = -1;
    int gen_blocks = -1;
    int cls_base = -1;
    int cls_stages = -1;
};

struct EvalOptions {
    std::string checkpoint_dir;
    std::string eval_path;
    std::string out_csv;
};

struct ReportOptions {
    std::string logs_dir;
    std::string out_csv;
};

// Each command validates its flags before touching the filesystem and
// returns one of the exit codes above; failures are reported on stderr.
int cmd_gen_data(const GenDataOptions& opts);
int cmd_train(const TrainOptions& opts);
int cmd_eval(const EvalOptions& opts);
int cmd_report(const ReportOptions& opts);

}  // namespace dect
