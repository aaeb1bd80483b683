#include "dect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dect/error.hpp"

namespace dect {

double psnr(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw DimError("psnr inputs differ in size: " + std::to_string(pred.size()) + " vs " +
                       std::to_string(target.size()));
    if (pred.empty()) throw DegenerateInputError("psnr of empty images");
    double mse = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.size());
    if (mse < 1e-12) return kPsnrCap;
    const double range = 2.0;
    return 10.0 * std::log10(range * range / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr double kSsimC2 = 0.03 * 0.03;

const std::vector<double>& ssim_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> g(kSsimWindow);
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - (kSsimWindow - 1) / 2.0;
            g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += g[i];
        }
        for (double& v : g) v /= sum;
        return g;
    }();
    return k;
}

// Separable valid-mode filtering: horizontal pass then vertical pass.
void gauss_filter_valid(const std::vector<double>& img, int h, int w, std::vector<double>& tmp,
                        std::vector<double>& out) {
    const auto& k = ssim_kernel();
    const int wo = w - kSsimWindow + 1;
    const int ho = h - kSsimWindow + 1;
    tmp.assign(static_cast<size_t>(h) * wo, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = img.data() + static_cast<size_t>(y) * w;
        double* dst = tmp.data() + static_cast<size_t>(y) * wo;
        for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kSsimWindow; ++t) acc += k[t] * row[x + t];
            dst[x] = acc;
        }
    }
    out.assign(static_cast<size_t>(ho) * wo, 0.0);
    for (int y = 0; y < ho; ++y) {
        double* dst = out.data() + static_cast<size_t>(y) * wo;
        for (int t = 0; t < kSsimWindow; ++t) {
            const double* src = tmp.data() + static_cast<size_t>(y + t) * wo;
            const double kv = k[t];
            for (int x = 0; x < wo; ++x) dst[x] += kv * src[x];
        }
    }
}

}  // namespace

double ssim(std::span<const double> pred, std::span<const double> target, int height, int width) {
    if (pred.size() != target.size())
        throw DimError("ssim inputs differ in size: " + std::to_string(pred.size()) + " vs " +
                       std::to_string(target.size()));
    if (static_cast<size_t>(height) * width != pred.size())
        throw DimError("ssim size does not match " + std::to_string(height) + "x" + std::to_string(width));
    if (height < kSsimWindow || width < kSsimWindow)
        throw DimError("ssim needs images of at least " + std::to_string(kSsimWindow) + "x" +
                       std::to_string(kSsimWindow) + ", got " + std::to_string(height) + "x" +
                       std::to_string(width));

    const size_t n = pred.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        x[i] = (pred[i] + 1.0) * 0.5;
        y[i] = (target[i] + 1.0) * 0.5;
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    std::vector<double> tmp, mu1, mu2, ex2, ey2, exy;
    gauss_filter_valid(x, height, width, tmp, mu1);
    gauss_filter_valid(y, height, width, tmp, mu2);
    gauss_filter_valid(xx, height, width, tmp, ex2);
    gauss_filter_valid(yy, height, width, tmp, ey2);
    gauss_filter_valid(xy, height, width, tmp, exy);

    double total = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double s1 = ex2[i] - m1 * m1;
        const double s2 = ey2[i] - m2 * m2;
        const double s12 = exy[i] - m1 * m2;
        total += ((2.0 * m1 * m2 + kSsimC1) * (2.0 * s12 + kSsimC2)) /
                 ((m1 * m1 + m2 * m2 + kSsimC1) * (s1 + s2 + kSsimC2));
    }
    return total / static_cast<double>(mu1.size());
}

double auroc(std::span<const double> scores, std::span<const uint8_t> labels) {
    if (scores.size() != labels.size())
        throw DimError("auroc needs one score per label");
    if (scores.empty()) throw DegenerateInputError("auroc of empty inputs");
    size_t n_pos = 0;
    for (uint8_t z : labels) {
        if (z > 1) throw ContractError("labels must be 0 or 1");
        n_pos += z;
    }
    const size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auroc undefined: labels contain a single class");

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks across tied score groups, then sum the positives' ranks.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t t = i; t <= j; ++t)
            if (labels[idx[t]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Aggregate aggregate(std::span<const double> values) {
    if (values.empty()) throw DegenerateInputError("aggregate of an empty list");
    Aggregate a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        const double d = v - a.mean;
        var += d * d;
    }
    a.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return a;
}

}  // namespace dect
