#include "dect/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "dect/checkpoint.hpp"
#include "dect/rng.hpp"

namespace dect {

namespace {

constexpr uint64_t kGenInitTag = 0x67656e69ull;
constexpr uint64_t kClsInitTag = 0x636c7369ull;
constexpr uint64_t kEpochTag = 0x65706f63ull;
constexpr uint64_t kShuffleTag = 0x73687566ull;

double nan_value() { return std::nan(""); }

std::vector<Parameter<float>*> concat_params(GeneratorNet<float>* gen, ClassifierNet<float>* cls) {
    std::vector<Parameter<float>*> all;
    if (gen) {
        auto g = gen->parameters();
        all.insert(all.end(), g.begin(), g.end());
    }
    if (cls) {
        auto c = cls->parameters();
        all.insert(all.end(), c.begin(), c.end());
    }
    return all;
}

// Shuffled index batches over one pool; the trailing partial batch is kept.
std::vector<std::vector<uint32_t>> pool_batches(size_t n, int batch_size, uint64_t seed) {
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<uint32_t>> batches;
    for (size_t at = 0; at < n; at += batch_size) {
        const size_t end = std::min(n, at + batch_size);
        batches.emplace_back(order.begin() + at, order.begin() + end);
    }
    return batches;
}

double score_logit(float logit) {
    const double l = logit;
    return l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
}

CsvRow base_row(const TrainConfig& cfg, int fold, int epoch, const std::string& split) {
    CsvRow row;
    row.mode = to_string(cfg.mode);
    row.fold = fold;
    row.epoch = epoch;
    row.split = split;
    row.loss_l1 = nan_value();
    row.loss_cls = nan_value();
    row.psnr_mean = nan_value();
    row.psnr_std = nan_value();
    row.ssim_mean = nan_value();
    row.ssim_std = nan_value();
    row.auroc = nan_value();
    return row;
}

CsvRow report_row(const TrainConfig& cfg, const MetricsReport& rep, const std::string& split) {
    CsvRow row = base_row(cfg, rep.fold_id, rep.epoch, split);
    row.psnr_mean = rep.psnr_mean;
    row.psnr_std = rep.psnr_std;
    row.ssim_mean = rep.ssim_mean;
    row.ssim_std = rep.ssim_std;
    row.auroc = rep.auroc;
    return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// Splits.
// ---------------------------------------------------------------------------

std::vector<uint32_t> unique_patients(const std::vector<SampleRecord>& pool) {
    std::vector<uint32_t> ids;
    ids.reserve(pool.size());
    for (const auto& s : pool) ids.push_back(s.patient_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::vector<SampleRecord> filter_by_patients(const std::vector<SampleRecord>& pool,
                                             const std::vector<uint32_t>& ids) {
    std::unordered_set<uint32_t> keep(ids.begin(), ids.end());
    std::vector<SampleRecord> out;
    for (const auto& s : pool)
        if (keep.count(s.patient_id)) out.push_back(s);
    return out;
}

std::vector<FoldSplit> kfold_split(std::vector<uint32_t> patient_ids, int k, uint64_t seed) {
    if (k < 2) throw ContractError("kfold_split needs k >= 2");
    std::sort(patient_ids.begin(), patient_ids.end());
    patient_ids.erase(std::unique(patient_ids.begin(), patient_ids.end()), patient_ids.end());
    if (static_cast<int>(patient_ids.size()) < k)
        throw ContractError("kfold_split needs at least k patients, got " +
                            std::to_string(patient_ids.size()) + " for k=" + std::to_string(k));
    Rng rng(mix64(seed, 0xf01d5ull));
    rng.shuffle(patient_ids);

    std::vector<std::vector<uint32_t>> folds(k);
    const size_t base = patient_ids.size() / k;
    const size_t extra = patient_ids.size() % k;
    size_t at = 0;
    for (int f = 0; f < k; ++f) {
        const size_t len = base + (static_cast<size_t>(f) < extra ? 1 : 0);
        folds[f].assign(patient_ids.begin() + at, patient_ids.begin() + at + len);
        std::sort(folds[f].begin(), folds[f].end());
        at += len;
    }

    std::vector<FoldSplit> splits(k);
    for (int i = 0; i < k; ++i) {
        splits[i].fold_id = i;
        splits[i].test_patient_ids = folds[i];
        splits[i].val_patient_ids = folds[(i + 1) % k];
        for (int f = 0; f < k; ++f) {
            if (f == i || f == (i + 1) % k) continue;
            splits[i].train_patient_ids.insert(splits[i].train_patient_ids.end(), folds[f].begin(),
                                               folds[f].end());
        }
        std::sort(splits[i].train_patient_ids.begin(), splits[i].train_patient_ids.end());
    }
    return splits;
}

// ---------------------------------------------------------------------------
// Schedule and sampler.
// ---------------------------------------------------------------------------

double lr_schedule(const TrainConfig& cfg, int epoch) {
    if (epoch < 0 || epoch >= cfg.total_epochs())
        throw ContractError("epoch " + std::to_string(epoch) + " outside schedule of " +
                            std::to_string(cfg.total_epochs()) + " epochs");
    if (epoch < cfg.epochs_const) return cfg.adam.lr;
    int k = epoch - cfg.epochs_const + 1;
    if (k >= cfg.epochs_decay) k = cfg.epochs_decay - 1;  // final epoch keeps the last nonzero value
    return cfg.adam.lr * (static_cast<double>(cfg.epochs_decay - k) / cfg.epochs_decay);
}

std::vector<BatchPlan> mixed_batch_sampler(size_t n_paired, size_t n_labeled, const TrainConfig& cfg,
                                           uint64_t epoch_seed) {
    const double mix = cfg.mix_fraction;
    if (mix < 0.0 || mix > 1.0) throw ContractError("mix_fraction outside [0, 1]");
    if (mix > 0.0 && n_labeled == 0) throw ContractError("mixed sampler needs a non-empty labeled pool");
    if (mix < 1.0 && n_paired == 0) throw ContractError("mixed sampler needs a non-empty paired pool");

    const size_t drawable = (mix > 0.0 ? n_labeled : 0) + (mix < 1.0 ? n_paired : 0);
    const size_t steps = (drawable + cfg.batch_size - 1) / cfg.batch_size;

    Rng domain_rng(mix64(epoch_seed, 0));
    struct Cycler {
        std::vector<uint32_t> order;
        size_t pos = 0;
        Rng rng;
        explicit Cycler(size_t n, uint64_t seed) : rng(seed) {
            order.resize(n);
            for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
        }
        uint32_t next() {
            if (pos == 0) rng.shuffle(order);
            const uint32_t v = order[pos++];
            if (pos == order.size()) pos = 0;
            return v;
        }
    };
    Cycler paired(n_paired, mix64(epoch_seed, 1));
    Cycler labeled(n_labeled, mix64(epoch_seed, 2));

    std::vector<BatchPlan> plans(steps);
    for (auto& plan : plans) {
        plan.resize(cfg.batch_size);
        for (auto& slot : plan) {
            const bool pick_labeled = domain_rng.bernoulli(mix);
            slot.marker = pick_labeled ? 1 : 0;
            slot.index = pick_labeled ? labeled.next() : paired.next();
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// Batch assembly and steps.
// ---------------------------------------------------------------------------

Tensor<float> stack_images(const std::vector<const std::vector<float>*>& images, int height, int width) {
    const size_t hw = static_cast<size_t>(height) * width;
    std::vector<float> buf;
    buf.reserve(images.size() * hw);
    for (const auto* img : images) {
        if (img->size() != hw) throw DimError("image size does not match stack dimensions");
        buf.insert(buf.end(), img->begin(), img->end());
    }
    return Tensor<float>::leaf({static_cast<int>(images.size()), 1, height, width}, std::move(buf));
}

JointBatch assemble_batch(const std::vector<SampleRecord>& paired_pool,
                          const std::vector<SampleRecord>& labeled_pool, const BatchPlan& plan) {
    JointBatch batch;
    std::vector<bool> has_mono, has_label;
    std::vector<const SampleRecord*> records;
    for (const auto& slot : plan) {
        const auto& pool = slot.marker ? labeled_pool : paired_pool;
        if (slot.index >= pool.size()) throw ContractError("batch plan indexes outside its pool");
        const SampleRecord& rec = pool[slot.index];
        records.push_back(&rec);
        batch.markers.push_back(slot.marker);
        has_mono.push_back(rec.mono.has_value());
        has_label.push_back(rec.label.has_value());
    }
    check_marker_consistency(batch.markers, has_mono, has_label);

    std::vector<const std::vector<float>*> px, py, lx;
    int height = 0, width = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        const SampleRecord& rec = *records[i];
        if (height == 0) {
            height = rec.height;
            width = rec.width;
        } else if (rec.height != height || rec.width != width) {
            throw DimError("batch mixes image sizes");
        }
        if (batch.markers[i] == 0) {
            px.push_back(&rec.poly);
            py.push_back(&*rec.mono);
        } else {
            lx.push_back(&rec.poly);
            batch.labels.push_back(*rec.label);
        }
    }
    batch.n_paired = static_cast<int>(px.size());
    batch.n_labeled = static_cast<int>(lx.size());
    if (!px.empty()) {
        batch.paired_x = stack_images(px, height, width);
        batch.paired_y = stack_images(py, height, width);
    }
    if (!lx.empty()) batch.labeled_x = stack_images(lx, height, width);
    return batch;
}

double generator_l1_step(GeneratorNet<float>& gen, const std::vector<Parameter<float>*>& params,
                         const Tensor<float>& x, const Tensor<float>& y, const AdamConfig& adam,
                         double lr_now) {
    zero_grads(params);
    auto out = gen.forward(x);
    auto loss = l1_loss(out, y);
    backward(loss);
    adam_step(params, adam, lr_now);
    return static_cast<double>(loss.item());
}

double classifier_bce_step(const GeneratorNet<float>* gen, ClassifierNet<float>& cls,
                           const std::vector<Parameter<float>*>& params, const Tensor<float>& x,
                           const std::vector<uint8_t>& labels, const AdamConfig& adam, double lr_now) {
    zero_grads(params);
    Tensor<float> input = gen ? gen->forward(x) : x;
    auto logits = cls.forward(input);
    auto loss = bce_with_logits(logits, labels);
    backward(loss);
    adam_step(params, adam, lr_now);
    return static_cast<double>(loss.item());
}

LossBreakdown train_step_joint(GeneratorNet<float>& gen, ClassifierNet<float>& cls, const JointBatch& batch,
                               const TrainConfig& cfg, double lr_now) {
    auto all = concat_params(&gen, &cls);
    double l1_value = 0.0, cls_value = 0.0;
    if (batch.n_paired > 0) {
        set_frozen(cls, true);
        set_frozen(gen, false);
        l1_value = generator_l1_step(gen, all, batch.paired_x, batch.paired_y, cfg.adam, lr_now);
    }
    if (batch.n_labeled > 0) {
        set_frozen(gen, true);
        set_frozen(cls, false);
        cls_value = classifier_bce_step(&gen, cls, all, batch.labeled_x, batch.labels, cfg.adam, lr_now);
    }
    set_frozen(gen, false);
    set_frozen(cls, false);
    return make_breakdown(l1_value, cls_value, batch.n_paired, batch.n_labeled);
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

MetricsReport evaluate_epoch(const GeneratorNet<float>* gen, const ClassifierNet<float>* cls,
                             const std::vector<SampleRecord>& pool, ClassifierInput input_kind, int fold_id,
                             int epoch) {
    NoGradGuard inference;
    MetricsReport rep;
    rep.fold_id = fold_id;
    rep.epoch = epoch;

    std::vector<double> psnrs, ssims, scores;
    std::vector<uint8_t> labels;
    const bool want_translation = gen != nullptr;
    const bool cls_on_generated = cls && input_kind == ClassifierInput::generated && gen;

    constexpr size_t kChunk = 16;
    for (size_t at = 0; at < pool.size(); at += kChunk) {
        const size_t end = std::min(pool.size(), at + kChunk);
        std::vector<const std::vector<float>*> xs;
        for (size_t i = at; i < end; ++i) xs.push_back(&pool[i].poly);
        const int h = pool[at].height, w = pool[at].width;
        Tensor<float> x = stack_images(xs, h, w);

        Tensor<float> translated;
        if (want_translation || cls_on_generated) translated = gen->forward(x);

        if (want_translation) {
            const size_t hw = static_cast<size_t>(h) * w;
            for (size_t i = at; i < end; ++i) {
                if (!pool[i].mono) continue;
                const float* g = translated.values().data() + (i - at) * hw;
                std::vector<double> pred(g, g + hw);
                std::vector<double> target(pool[i].mono->begin(), pool[i].mono->end());
                psnrs.push_back(psnr(pred, target));
                ssims.push_back(ssim(pred, target, h, w));
            }
        }
        if (cls) {
            Tensor<float> logits = cls->forward(cls_on_generated ? translated : x);
            for (size_t i = at; i < end; ++i) {
                if (!pool[i].label) continue;
                scores.push_back(score_logit(logits.values()[i - at]));
                labels.push_back(*pool[i].label);
            }
        }
    }

    if (!psnrs.empty()) {
        const auto pa = aggregate(psnrs);
        const auto sa = aggregate(ssims);
        rep.psnr_mean = pa.mean;
        rep.psnr_std = pa.stddev;
        rep.ssim_mean = sa.mean;
        rep.ssim_std = sa.stddev;
    } else {
        rep.psnr_mean = rep.psnr_std = rep.ssim_mean = rep.ssim_std = nan_value();
    }
    if (!scores.empty()) {
        try {
            rep.auroc = auroc(scores, labels);
        } catch (const MetricError& e) {
            rep.auroc = nan_value();
            rep.note = e.what();
        }
    } else {
        rep.auroc = nan_value();
    }
    return rep;
}

int select_best_by_val(const std::vector<double>& val_aurocs) {
    if (val_aurocs.empty()) throw ContractError("select_best_by_val needs at least one epoch");
    int best = 0;
    double best_value = -1.0;
    for (size_t i = 0; i < val_aurocs.size(); ++i) {
        const double v = std::isnan(val_aurocs[i]) ? -1.0 : val_aurocs[i];
        if (v > best_value) {
            best_value = v;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Fold runs.
// ---------------------------------------------------------------------------

namespace {

struct EpochLossMean {
    double l1 = 0.0, cls = 0.0, combined = 0.0;
    int batches = 0;
    void add(const LossBreakdown& b) {
        l1 += b.l1;
        cls += b.cls;
        combined += b.combined;
        ++batches;
    }
    double mean_l1() const { return batches ? l1 / batches : 0.0; }
    double mean_cls() const { return batches ? cls / batches : 0.0; }
};

}  // namespace

FoldResult run_fold(const TrainConfig& cfg, const std::vector<SampleRecord>& paired_pool,
                    const std::vector<SampleRecord>& labeled_train,
                    const std::vector<SampleRecord>& labeled_val,
                    const std::vector<SampleRecord>& labeled_test,
                    const std::vector<SampleRecord>* eval_pool, int fold_id) {
    cfg.validate();
    FoldResult result;
    result.fold_id = fold_id;

    const bool needs_paired = cfg.mode != TrainMode::classifier_only;
    if (needs_paired && paired_pool.empty())
        throw ContractError("mode " + to_string(cfg.mode) + " requires a non-empty paired pool");
    if (labeled_train.empty() && cfg.mode != TrainMode::sequential)
        throw ContractError("training requires a non-empty labeled pool");

    const ClassifierInput input_kind =
        cfg.mode == TrainMode::classifier_only ? ClassifierInput::poly : cfg.classifier_input;

    std::optional<GeneratorNet<float>> gen;
    std::optional<ClassifierNet<float>> cls;
    if (needs_paired)
        gen = init_generator<float>(cfg.gen_base_channels, cfg.gen_blocks,
                                    mix64(cfg.seed, kGenInitTag, static_cast<uint64_t>(fold_id)));
    cls = init_classifier<float>(cfg.cls_base_channels, cfg.cls_stages,
                                 mix64(cfg.seed, kClsInitTag, static_cast<uint64_t>(fold_id)));

    auto gen_params = gen ? gen->parameters() : std::vector<Parameter<float>*>{};
    auto cls_params = cls->parameters();

    std::vector<std::vector<std::vector<float>>> cls_snapshots;  // per selectable epoch
    std::vector<std::vector<std::vector<float>>> gen_snapshots;

    auto run_validation = [&](int epoch) {
        const GeneratorNet<float>* gp = gen ? &*gen : nullptr;
        MetricsReport rep = evaluate_epoch(gp, &*cls, labeled_val, input_kind, fold_id, epoch);
        result.val_aurocs.push_back(rep.auroc);
        CsvRow row = base_row(cfg, fold_id, epoch, "val");
        row.auroc = rep.auroc;
        result.rows.push_back(row);
        gen_snapshots.push_back(gen ? snapshot_params(gen_params) : std::vector<std::vector<float>>{});
        cls_snapshots.push_back(snapshot_params(cls_params));
    };

    if (cfg.mode == TrainMode::joint) {
        auto all = concat_params(gen ? &*gen : nullptr, &*cls);
        for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
            const double lr = lr_schedule(cfg, epoch);
            const uint64_t epoch_seed = mix64(cfg.seed, kEpochTag ^ static_cast<uint64_t>(fold_id),
                                              static_cast<uint64_t>(epoch));
            EpochLossMean mean;
            for (const auto& plan :
                 mixed_batch_sampler(paired_pool.size(), labeled_train.size(), cfg, epoch_seed)) {
                const JointBatch batch = assemble_batch(paired_pool, labeled_train, plan);
                mean.add(train_step_joint(*gen, *cls, batch, cfg, lr));
            }
            CsvRow row = base_row(cfg, fold_id, epoch, "train");
            row.loss_l1 = mean.mean_l1();
            row.loss_cls = mean.mean_cls();
            result.rows.push_back(row);
            run_validation(epoch);
        }
    } else if (cfg.mode == TrainMode::sequential) {
        // Phase 1: generator alone on the paired pool, full schedule.
        for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
            const double lr = lr_schedule(cfg, epoch);
            EpochLossMean mean;
            for (const auto& idx :
                 pool_batches(paired_pool.size(), cfg.batch_size,
                              mix64(cfg.seed, kShuffleTag ^ static_cast<uint64_t>(fold_id),
                                    static_cast<uint64_t>(epoch)))) {
                std::vector<const std::vector<float>*> xs, ys;
                for (uint32_t i : idx) {
                    xs.push_back(&paired_pool[i].poly);
                    if (!paired_pool[i].mono) throw ContractError("paired pool sample lacks a mono target");
                    ys.push_back(&*paired_pool[i].mono);
                }
                const int h = paired_pool[idx[0]].height, w = paired_pool[idx[0]].width;
                LossBreakdown b = make_breakdown(
                    generator_l1_step(*gen, gen_params, stack_images(xs, h, w), stack_images(ys, h, w),
                                      cfg.adam, lr),
                    0.0, static_cast<int>(idx.size()), 0);
                mean.add(b);
            }
            CsvRow row = base_row(cfg, fold_id, epoch, "train");
            row.loss_l1 = mean.mean_l1();
            result.rows.push_back(row);
        }
        // Phase 2: classifier on the frozen generator's outputs.
        if (labeled_train.empty())
            throw ContractError("sequential phase 2 requires a non-empty labeled pool");
        set_frozen(*gen, true);
        auto all = concat_params(&*gen, &*cls);
        for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
            const int global_epoch = cfg.total_epochs() + epoch;
            const double lr = lr_schedule(cfg, epoch);
            EpochLossMean mean;
            for (const auto& idx :
                 pool_batches(labeled_train.size(), cfg.batch_size,
                              mix64(cfg.seed, kShuffleTag ^ static_cast<uint64_t>(fold_id),
                                    static_cast<uint64_t>(global_epoch)))) {
                std::vector<const std::vector<float>*> xs;
                std::vector<uint8_t> labels;
                for (uint32_t i : idx) {
                    xs.push_back(&labeled_train[i].poly);
                    if (!labeled_train[i].label) throw ContractError("labeled pool sample lacks a label");
                    labels.push_back(*labeled_train[i].label);
                }
                const int h = labeled_train[idx[0]].height, w = labeled_train[idx[0]].width;
                LossBreakdown b = make_breakdown(
                    0.0,
                    classifier_bce_step(&*gen, *cls, all, stack_images(xs, h, w), labels, cfg.adam, lr), 0,
                    static_cast<int>(idx.size()));
                mean.add(b);
            }
            CsvRow row = base_row(cfg, fold_id, global_epoch, "train");
            row.loss_cls = mean.mean_cls();
            result.rows.push_back(row);
            run_validation(global_epoch);
        }
        set_frozen(*gen, false);
    } else {  // classifier_only
        for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
            const double lr = lr_schedule(cfg, epoch);
            EpochLossMean mean;
            for (const auto& idx :
                 pool_batches(labeled_train.size(), cfg.batch_size,
                              mix64(cfg.seed, kShuffleTag ^ static_cast<uint64_t>(fold_id),
                                    static_cast<uint64_t>(epoch)))) {
                std::vector<const std::vector<float>*> xs;
                std::vector<uint8_t> labels;
                for (uint32_t i : idx) {
                    xs.push_back(&labeled_train[i].poly);
                    if (!labeled_train[i].label) throw ContractError("labeled pool sample lacks a label");
                    labels.push_back(*labeled_train[i].label);
                }
                const int h = labeled_train[idx[0]].height, w = labeled_train[idx[0]].width;
                LossBreakdown b = make_breakdown(
                    0.0,
                    classifier_bce_step(nullptr, *cls, cls_params, stack_images(xs, h, w), labels, cfg.adam,
                                        lr),
                    0, static_cast<int>(idx.size()));
                mean.add(b);
            }
            CsvRow row = base_row(cfg, fold_id, epoch, "train");
            row.loss_cls = mean.mean_cls();
            result.rows.push_back(row);
            run_validation(epoch);
        }
    }

    // Model selection on validation AuROC, then held-out reporting.
    const int best = select_best_by_val(result.val_aurocs);
    if (gen && !gen_snapshots[best].empty()) restore_params(gen_params, gen_snapshots[best]);
    restore_params(cls_params, cls_snapshots[best]);
    const int best_epoch_label = cfg.mode == TrainMode::sequential ? cfg.total_epochs() + best : best;
    result.best_epoch = best_epoch_label;

    const GeneratorNet<float>* gp = gen ? &*gen : nullptr;
    result.test_report = evaluate_epoch(gp, &*cls, labeled_test, input_kind, fold_id, best_epoch_label);
    result.rows.push_back(report_row(cfg, result.test_report, "test"));
    if (eval_pool) {
        result.eval_report = evaluate_epoch(gp, &*cls, *eval_pool, input_kind, fold_id, best_epoch_label);
        result.rows.push_back(report_row(cfg, *result.eval_report, "eval"));
    }

    result.gen = std::move(gen);
    result.cls = std::move(cls);
    return result;
}

TrainOutcome run_training(const TrainConfig& cfg, const std::vector<SampleRecord>& paired_pool,
                          const std::vector<SampleRecord>& labeled_pool,
                          const std::vector<SampleRecord>* eval_pool, int k_folds,
                          const std::string& out_dir) {
    cfg.validate();
    if (labeled_pool.empty()) throw ContractError("run_training requires a labeled pool");
    const auto patients = unique_patients(labeled_pool);
    const auto splits = kfold_split(patients, k_folds, cfg.seed);

    TrainOutcome outcome;
    for (const auto& split : splits) {
        auto train = filter_by_patients(labeled_pool, split.train_patient_ids);
        auto val = filter_by_patients(labeled_pool, split.val_patient_ids);
        auto test = filter_by_patients(labeled_pool, split.test_patient_ids);
        if (train.empty())
            throw ContractError("fold " + std::to_string(split.fold_id) +
                                " has an empty training split; use more patients or fewer folds");
        FoldResult fold = run_fold(cfg, paired_pool, train, val, test, eval_pool, split.fold_id);

        if (!out_dir.empty()) {
            namespace fs = std::filesystem;
            append_csv_rows((fs::path(out_dir) / "metrics.csv").string(), fold.rows);
            const std::string ckpt_dir =
                (fs::path(out_dir) / ("fold_" + std::to_string(split.fold_id)) / "best").string();
            save_checkpoint(ckpt_dir, cfg, split.fold_id, fold.best_epoch,
                            fold.gen ? &*fold.gen : nullptr, fold.cls ? &*fold.cls : nullptr,
                            /*with_optimizer_state=*/true);
        }
        outcome.folds.push_back(std::move(fold));
    }
    return outcome;
}

}  // namespace dect
