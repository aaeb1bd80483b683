#pragma once

#include <string>
#include <vector>

namespace dect {

inline constexpr const char* kCsvHeader =
    "mode,fold,epoch,split,loss_l1,loss_cls,psnr_mean,psnr_std,ssim_mean,ssim_std,auroc";

// One experiment-log record. Metric fields that do not apply to a split hold
// NaN and serialize as "nan"; everything else is fixed 6-decimal.
struct CsvRow {
    std::string mode;
    int fold = 0;
    int epoch = 0;
    std::string split;  // train | val | test | eval
    double loss_l1 = 0.0;
    double loss_cls = 0.0;
    double psnr_mean = 0.0;
    double psnr_std = 0.0;
    double ssim_mean = 0.0;
    double ssim_std = 0.0;
    double auroc = 0.0;
};

std::string format_csv_row(const CsvRow& row);

// Appends rows, creating the file with its header line first if needed. The
// rewrite goes through a temp file and rename, so readers never see a
// partially written log.
void append_csv_rows(const std::string& path, const std::vector<CsvRow>& rows);

std::vector<CsvRow> read_csv(const std::string& path);

}  // namespace dect
