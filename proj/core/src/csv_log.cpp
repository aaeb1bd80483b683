#include "dect/csv_log.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "dect/error.hpp"
#include "dect/io_util.hpp"

namespace dect {

namespace {

std::string format_metric(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

double parse_metric(const std::string& s) {
    if (s == "nan") return std::nan("");
    return detail::parse_double(s);
}

}  // namespace

std::string format_csv_row(const CsvRow& row) {
    std::ostringstream os;
    os << row.mode << ',' << row.fold << ',' << row.epoch << ',' << row.split << ','
       << format_metric(row.loss_l1) << ',' << format_metric(row.loss_cls) << ','
       << format_metric(row.psnr_mean) << ',' << format_metric(row.psnr_std) << ','
       << format_metric(row.ssim_mean) << ',' << format_metric(row.ssim_std) << ','
       << format_metric(row.auroc);
    return os.str();
}

void append_csv_rows(const std::string& path, const std::vector<CsvRow>& rows) {
    std::string content;
    if (std::filesystem::exists(path)) {
        const auto bytes = detail::read_file(path);
        content.assign(bytes.begin(), bytes.end());
    } else {
        content = std::string(kCsvHeader) + "\n";
    }
    for (const auto& row : rows) content += format_csv_row(row) + "\n";
    detail::atomic_write_text(path, content);
}

std::vector<CsvRow> read_csv(const std::string& path) {
    const auto bytes = detail::read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    if (!std::getline(in, line)) throw IntegrityError("'" + path + "' is empty");
    if (line != kCsvHeader)
        throw IntegrityError("'" + path + "' has an unexpected header: " + line);
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 11)
            throw IntegrityError("'" + path + "' has a malformed row: " + line);
        CsvRow row;
        row.mode = fields[0];
        row.fold = static_cast<int>(detail::parse_int(fields[1]));
        row.epoch = static_cast<int>(detail::parse_int(fields[2]));
        row.split = fields[3];
        row.loss_l1 = parse_metric(fields[4]);
        row.loss_cls = parse_metric(fields[5]);
        row.psnr_mean = parse_metric(fields[6]);
        row.psnr_std = parse_metric(fields[7]);
        row.ssim_mean = parse_metric(fields[8]);
        row.ssim_std = parse_metric(fields[9]);
        row.auroc = parse_metric(fields[10]);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dect
