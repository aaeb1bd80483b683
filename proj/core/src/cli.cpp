#include "dect/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "dect/checkpoint.hpp"
#include "dect/dataset_io.hpp"
#include "dect/error.hpp"
#include "dect/io_util.hpp"
#include "dect/trainer.hpp"

namespace dect {

namespace {

namespace fs = std::filesystem;

int report_error(const std::exception& e, int code) {
    std::cerr << "error: " << e.what() << "\n";
    return code;
}

// UsageError -> 1, IoError -> 2, IntegrityError -> 3; contract and dimension
// violations stem from bad invocations, so they count as usage.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const UsageError& e) {
        return report_error(e, kExitUsage);
    } catch (const IoError& e) {
        return report_error(e, kExitIo);
    } catch (const IntegrityError& e) {
        return report_error(e, kExitIntegrity);
    } catch (const std::exception& e) {
        return report_error(e, kExitUsage);
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw IoError(what + " '" + path + "' does not exist");
}

std::string format_fixed(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

int cmd_gen_data(const GenDataOptions& opts) {
    return guarded([&] {
        if (opts.n_patients < 1) throw UsageError("--n-patients must be >= 1");
        if (opts.slices_per_patient < 1) throw UsageError("--slices-per-patient must be >= 1");
        if (opts.lesion_prob < 0.0 || opts.lesion_prob > 1.0)
            throw UsageError("--lesion-prob must lie in [0, 1]");
        if (opts.image_size < 16 || opts.image_size % 4 != 0)
            throw UsageError("--image-size must be a multiple of 4, at least 16");
        if (opts.out.empty()) throw UsageError("--out is required");
        const DatasetRole role = parse_dataset_role(opts.role);

        PhantomSpec spec;
        spec.height = opts.image_size;
        spec.width = opts.image_size;
        spec.lesion_prob = opts.lesion_prob;
        auto samples = make_dataset(spec, opts.n_patients, opts.slices_per_patient, role, opts.seed);
        const Dataset ds = dataset_from_samples(std::move(samples), role);
        save_dataset(opts.out, ds);

        size_t positives = 0;
        for (const auto& s : ds.samples) positives += s.label.value_or(0);
        std::cout << "wrote " << ds.samples.size() << " samples (" << opts.n_patients << " patients x "
                  << opts.slices_per_patient << " slices, " << opts.image_size << "x" << opts.image_size
                  << ", role " << to_string(role) << ") to " << opts.out << "\n";
        if (ds.has_labels)
            std::cout << "label prevalence: "
                      << format_fixed(static_cast<double>(positives) / ds.samples.size()) << "\n";
        return kExitOk;
    });
}

int cmd_train(const TrainOptions& opts) {
    return guarded([&] {
        const TrainMode mode = parse_train_mode(opts.mode);
        const bool needs_paired = mode != TrainMode::classifier_only;
        if (opts.labeled_path.empty()) throw UsageError("--labeled is required");
        if (needs_paired && opts.paired_path.empty())
            throw UsageError("mode " + opts.mode + " requires --paired");
        if (opts.out_dir.empty()) throw UsageError("--out-dir is required");
        if (opts.folds < 3) throw UsageError("--folds must be >= 3 so every fold keeps a training split");

        TrainConfig cfg;
        cfg.mode = mode;
        cfg.seed = opts.seed;
        if (opts.epochs_const > 0) cfg.epochs_const = opts.epochs_const;
        if (opts.epochs_decay > 0) cfg.epochs_decay = opts.epochs_decay;
        if (opts.batch_size > 0) cfg.batch_size = opts.batch_size;
        if (opts.lr > 0) cfg.adam.lr = opts.lr;
        if (opts.beta1 >= 0) cfg.adam.beta1 = opts.beta1;
        if (opts.beta2 >= 0) cfg.adam.beta2 = opts.beta2;
        if (opts.weight_decay >= 0) cfg.adam.weight_decay = opts.weight_decay;
        if (opts.mix_fraction >= 0) cfg.mix_fraction = opts.mix_fraction;
        if (opts.gen_base > 0) cfg.gen_base_channels = opts.gen_base;
        if (opts.gen_blocks > 0) cfg.gen_blocks = opts.gen_blocks;
        if (opts.cls_base > 0) cfg.cls_base_channels = opts.cls_base;
        if (opts.cls_stages > 0) cfg.cls_stages = opts.cls_stages;

        require_file(opts.labeled_path, "labeled dataset");
        if (needs_paired) require_file(opts.paired_path, "paired dataset");
        if (!opts.eval_path.empty()) require_file(opts.eval_path, "eval dataset");

        const Dataset labeled = load_dataset(opts.labeled_path);
        if (!labeled.has_labels) throw UsageError("'" + opts.labeled_path + "' carries no labels");
        cfg.image_size = labeled.height;
        if (labeled.height != labeled.width) throw UsageError("training expects square images");

        Dataset paired;
        if (needs_paired) {
            paired = load_dataset(opts.paired_path);
            if (!paired.has_mono) throw UsageError("'" + opts.paired_path + "' carries no mono targets");
            if (paired.height != labeled.height || paired.width != labeled.width)
                throw UsageError("paired and labeled datasets disagree on image size");
        }
        Dataset eval_ds;
        const std::vector<SampleRecord>* eval_pool = nullptr;
        if (!opts.eval_path.empty()) {
            eval_ds = load_dataset(opts.eval_path);
            if (!eval_ds.has_mono || !eval_ds.has_labels)
                throw UsageError("'" + opts.eval_path + "' must carry both mono targets and labels");
            if (eval_ds.height != labeled.height || eval_ds.width != labeled.width)
                throw UsageError("eval and labeled datasets disagree on image size");
            eval_pool = &eval_ds.samples;
        }

        cfg.validate();
        const TrainOutcome outcome =
            run_training(cfg, paired.samples, labeled.samples, eval_pool, opts.folds, opts.out_dir);
        for (const auto& fold : outcome.folds) {
            std::cout << "fold " << fold.fold_id << ": best epoch " << fold.best_epoch << ", test auroc "
                      << format_fixed(fold.test_report.auroc);
            if (fold.eval_report)
                std::cout << ", eval auroc " << format_fixed(fold.eval_report->auroc) << ", eval psnr "
                          << format_fixed(fold.eval_report->psnr_mean) << ", eval ssim "
                          << format_fixed(fold.eval_report->ssim_mean);
            std::cout << "\n";
        }
        std::cout << "metrics: " << (fs::path(opts.out_dir) / "metrics.csv").string() << "\n";
        return kExitOk;
    });
}

int cmd_eval(const EvalOptions& opts) {
    return guarded([&] {
        if (opts.checkpoint_dir.empty()) throw UsageError("--checkpoint is required");
        if (opts.eval_path.empty()) throw UsageError("--eval is required");
        if (opts.out_csv.empty()) throw UsageError("--out is required");
        require_file(opts.checkpoint_dir, "checkpoint");
        require_file(opts.eval_path, "eval dataset");

        Checkpoint ckpt = load_checkpoint(opts.checkpoint_dir);
        const Dataset eval_ds = load_dataset(opts.eval_path);
        const ClassifierInput input_kind = ckpt.config.mode == TrainMode::classifier_only
                                               ? ClassifierInput::poly
                                               : ckpt.config.classifier_input;
        const MetricsReport rep =
            evaluate_epoch(ckpt.gen ? &*ckpt.gen : nullptr, ckpt.cls ? &*ckpt.cls : nullptr,
                           eval_ds.samples, input_kind, ckpt.fold, ckpt.epoch);
        if (!rep.note.empty()) std::cerr << "warning: " << rep.note << "\n";

        CsvRow row;
        row.mode = to_string(ckpt.config.mode);
        row.fold = ckpt.fold;
        row.epoch = ckpt.epoch;
        row.split = "eval";
        row.loss_l1 = std::nan("");
        row.loss_cls = std::nan("");
        row.psnr_mean = rep.psnr_mean;
        row.psnr_std = rep.psnr_std;
        row.ssim_mean = rep.ssim_mean;
        row.ssim_std = rep.ssim_std;
        row.auroc = rep.auroc;
        append_csv_rows(opts.out_csv, {row});

        std::cout << "psnr " << format_fixed(rep.psnr_mean) << " +- " << format_fixed(rep.psnr_std)
                  << ", ssim " << format_fixed(rep.ssim_mean) << " +- " << format_fixed(rep.ssim_std)
                  << ", auroc " << format_fixed(rep.auroc) << "\n";
        return kExitOk;
    });
}

int cmd_report(const ReportOptions& opts) {
    return guarded([&] {
        if (opts.logs_dir.empty()) throw UsageError("--logs is required");
        if (opts.out_csv.empty()) throw UsageError("--out is required");
        if (!fs::is_directory(opts.logs_dir)) throw IoError("'" + opts.logs_dir + "' is not a directory");

        std::vector<std::string> csv_paths;
        for (const auto& entry : fs::recursive_directory_iterator(opts.logs_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                csv_paths.push_back(entry.path().string());
        if (csv_paths.empty()) throw IoError("no CSV logs found under '" + opts.logs_dir + "'");
        std::sort(csv_paths.begin(), csv_paths.end());

        struct ModeStats {
            std::vector<double> psnr, ssim, auroc;
        };
        std::map<std::string, ModeStats> by_mode;
        for (const auto& path : csv_paths) {
            for (const auto& row : read_csv(path)) {
                auto& stats = by_mode[row.mode];
                if (row.split == "eval") {
                    if (!std::isnan(row.psnr_mean)) stats.psnr.push_back(row.psnr_mean);
                    if (!std::isnan(row.ssim_mean)) stats.ssim.push_back(row.ssim_mean);
                } else if (row.split == "test") {
                    if (!std::isnan(row.auroc)) stats.auroc.push_back(row.auroc);
                }
            }
        }
        if (by_mode.empty()) throw IntegrityError("logs contain no usable rows");

        std::string out = "mode,n_folds,psnr_mean,psnr_std,ssim_mean,ssim_std,auroc_mean,auroc_std\n";
        for (const auto& [mode, stats] : by_mode) {
            const size_t folds = std::max({stats.psnr.size(), stats.auroc.size(), stats.ssim.size()});
            const Aggregate pa = stats.psnr.empty() ? Aggregate{std::nan(""), std::nan("")}
                                                    : aggregate(stats.psnr);
            const Aggregate sa = stats.ssim.empty() ? Aggregate{std::nan(""), std::nan("")}
                                                    : aggregate(stats.ssim);
            const Aggregate aa = stats.auroc.empty() ? Aggregate{std::nan(""), std::nan("")}
                                                     : aggregate(stats.auroc);
            out += mode + ',' + std::to_string(folds) + ',' + format_fixed(pa.mean) + ',' +
                   format_fixed(pa.stddev) + ',' + format_fixed(sa.mean) + ',' + format_fixed(sa.stddev) +
                   ',' + format_fixed(aa.mean) + ',' + format_fixed(aa.stddev) + '\n';
        }
        detail::atomic_write_text(opts.out_csv, out);
        std::cout << out;
        return kExitOk;
    });
}

}  // namespace dect
