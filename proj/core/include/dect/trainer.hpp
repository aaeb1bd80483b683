#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dect/config.hpp"
#include "dect/csv_log.hpp"
#include "dect/losses.hpp"
#include "dect/metrics.hpp"
#include "dect/nn.hpp"
#include "dect/phantom.hpp"

namespace dect {

// ---------------------------------------------------------------------------
// Cross-validation splits (patient-wise).
// ---------------------------------------------------------------------------

struct FoldSplit {
    int fold_id = 0;
    std::vector<uint32_t> train_patient_ids;
    std::vector<uint32_t> val_patient_ids;
    std::vector<uint32_t> test_patient_ids;
};

// Shuffles patients by seed and partitions them into k near-equal folds.
// Fold i tests on fold i, validates on fold (i+1) mod k and trains on the
// rest, so every patient appears in exactly one test fold.
std::vector<FoldSplit> kfold_split(std::vector<uint32_t> patient_ids, int k, uint64_t seed);

std::vector<uint32_t> unique_patients(const std::vector<SampleRecord>& pool);
std::vector<SampleRecord> filter_by_patients(const std::vector<SampleRecord>& pool,
                                             const std::vector<uint32_t>& ids);

// ---------------------------------------------------------------------------
// Schedule and batch mixing.
// ---------------------------------------------------------------------------

// Constant for the first epochs_const epochs, then a linear ramp toward zero
// over epochs_decay epochs. The ramp hits zero only after the final epoch;
// the final epoch itself trains at the last nonzero ramp value.
double lr_schedule(const TrainConfig& cfg, int epoch);

struct BatchSlot {
    uint32_t index = 0;  // position within the slot's source pool
    uint8_t marker = 0;  // 1 = labeled pool, 0 = paired pool
};
using BatchPlan = std::vector<BatchSlot>;

// One epoch's worth of mixed batches. Each slot draws its domain with
// probability mix_fraction (labeled), then takes the next sample from that
// pool's reshuffled-without-replacement cycle. Deterministic in epoch_seed.
std::vector<BatchPlan> mixed_batch_sampler(size_t n_paired, size_t n_labeled, const TrainConfig& cfg,
                                           uint64_t epoch_seed);

// ---------------------------------------------------------------------------
// Training steps.
// ---------------------------------------------------------------------------

// Materialized mixed batch: the marker-0 subset stacked as paired (x, y)
// image tensors, the marker-1 subset as images plus labels, both in slot
// order.
struct JointBatch {
    std::vector<uint8_t> markers;
    Tensor<float> paired_x, paired_y;
    Tensor<float> labeled_x;
    std::vector<uint8_t> labels;
    int n_paired = 0;
    int n_labeled = 0;
};

JointBatch assemble_batch(const std::vector<SampleRecord>& paired_pool,
                          const std::vector<SampleRecord>& labeled_pool, const BatchPlan& plan);

Tensor<float> stack_images(const std::vector<const std::vector<float>*>& images, int height, int width);

// One L1 update of the generator: zero grads, forward, backward, Adam.
// Returns the loss value.
double generator_l1_step(GeneratorNet<float>& gen, const std::vector<Parameter<float>*>& params,
                         const Tensor<float>& x, const Tensor<float>& y, const AdamConfig& adam,
                         double lr_now);

// One BCE update of the classifier on C(G(x)) (or C(x) when gen is null).
// Gradients propagate through the generator when present; whether the
// generator's parameters move is governed solely by their frozen flags.
double classifier_bce_step(const GeneratorNet<float>* gen, ClassifierNet<float>& cls,
                           const std::vector<Parameter<float>*>& params, const Tensor<float>& x,
                           const std::vector<uint8_t>& labels, const AdamConfig& adam, double lr_now);

// Alternating-freeze joint step: (i) classifier frozen, generator updated on
// the paired subset's L1 loss; (ii) generator frozen, classifier updated on
// the labeled subset's BCE loss computed through the frozen generator.
// Either sub-step is skipped when its subset is empty; gradients are zeroed
// between sub-steps and both nets are left unfrozen.
LossBreakdown train_step_joint(GeneratorNet<float>& gen, ClassifierNet<float>& cls, const JointBatch& batch,
                               const TrainConfig& cfg, double lr_now);

// ---------------------------------------------------------------------------
// Evaluation and model selection.
// ---------------------------------------------------------------------------

// Forward-only evaluation: PSNR/SSIM of G(x) against the mono target over
// samples that carry one, AuROC of the classifier scores over samples that
// carry a label. Metrics whose inputs are unavailable come back NaN; an
// AuROC that is undefined on single-class labels is reported as NaN with an
// explanatory note while the image metrics still fill in.
MetricsReport evaluate_epoch(const GeneratorNet<float>* gen, const ClassifierNet<float>* cls,
                             const std::vector<SampleRecord>& pool, ClassifierInput input_kind, int fold_id,
                             int epoch);

// Index of the epoch with the highest validation AuROC; earliest wins ties.
int select_best_by_val(const std::vector<double>& val_aurocs);

// ---------------------------------------------------------------------------
// Full runs.
// ---------------------------------------------------------------------------

struct FoldResult {
    int fold_id = 0;
    int best_epoch = 0;
    std::vector<double> val_aurocs;
    MetricsReport test_report;
    std::optional<MetricsReport> eval_report;
    std::optional<GeneratorNet<float>> gen;  // parameters of the selected epoch
    std::optional<ClassifierNet<float>> cls;
    std::vector<CsvRow> rows;
};

// Trains one fold per cfg.mode. `paired_pool` may be empty only in
// classifier-only mode; `eval_pool` is optional and adds a split=eval row
// computed with the selected checkpoint.
FoldResult run_fold(const TrainConfig& cfg, const std::vector<SampleRecord>& paired_pool,
                    const std::vector<SampleRecord>& labeled_train,
                    const std::vector<SampleRecord>& labeled_val,
                    const std::vector<SampleRecord>& labeled_test,
                    const std::vector<SampleRecord>* eval_pool, int fold_id);

struct TrainOutcome {
    std::vector<FoldResult> folds;
};

// K-fold cross-validated training over the labeled pool's patients. When
// out_dir is non-empty, writes out_dir/metrics.csv and per-fold best
// checkpoints under out_dir/fold_<i>/best.
TrainOutcome run_training(const TrainConfig& cfg, const std::vector<SampleRecord>& paired_pool,
                          const std::vector<SampleRecord>& labeled_pool,
                          const std::vector<SampleRecord>* eval_pool, int k_folds,
                          const std::string& out_dir);

}  // namespace dect
