#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dect {

// Peak signal-to-noise ratio in dB for images in [-1, 1] (data range 2).
// Returns the 99 dB cap when the MSE underflows 1e-12.
double psnr(std::span<const double> pred, std::span<const double> target);

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), evaluated on
// the images shifted from [-1, 1] to [0, 1] and averaged over valid
// (unpadded) window positions.
double ssim(std::span<const double> pred, std::span<const double> target, int height, int width);

// Area under the ROC curve via the rank-sum statistic; ties get half credit.
// Requires at least one positive and one negative label.
double auroc(std::span<const double> scores, std::span<const uint8_t> labels);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

Aggregate aggregate(std::span<const double> values);

// Per-epoch, per-fold evaluation summary. Fields that could not be computed
// (annotation or model missing) hold NaN; `note` carries a human-readable
// reason when the AuROC is undefined for otherwise valid inputs.
struct MetricsReport {
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
    double auroc = 0.0;
    int fold_id = 0;
    int epoch = 0;
    std::string note;
};

constexpr double kPsnrCap = 99.0;

}  // namespace dect
