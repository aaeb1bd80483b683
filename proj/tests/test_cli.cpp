#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "dect/cli.hpp"
#include "dect/csv_log.hpp"
#include "dect/dataset_io.hpp"
#include "dect/io_util.hpp"

using namespace dect;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("dect_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

GenDataOptions small_gen(const std::string& out, const std::string& role, uint64_t seed) {
    GenDataOptions opts;
    opts.seed = seed;
    opts.n_patients = 6;
    opts.slices_per_patient = 2;
    opts.role = role;
    opts.image_size = 16;
    opts.out = out;
    return opts;
}

TrainOptions small_train(const TempDir& dir, const std::string& mode, const std::string& out_dir) {
    TrainOptions opts;
    opts.mode = mode;
    opts.paired_path = dir.file("paired.dect");
    opts.labeled_path = dir.file("labeled.dect");
    opts.folds = 3;
    opts.seed = 5;
    opts.out_dir = dir.file(out_dir);
    opts.epochs_const = 1;
    opts.epochs_decay = 1;
    opts.batch_size = 4;
    opts.gen_base = 4;
    opts.gen_blocks = 1;
    opts.cls_base = 4;
    opts.cls_stages = 2;
    return opts;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("gen-data writes the declared sample count and is byte-deterministic") {
        TempDir dir;
        GenDataOptions opts = small_gen(dir.file("a.dect"), "paired", 3);
        opts.n_patients = 5;
        opts.slices_per_patient = 10;
        CHECK(cmd_gen_data(opts) == kExitOk);
        const Dataset ds = load_dataset(opts.out);
        CHECK(ds.samples.size() == 50);
        CHECK(ds.has_mono);
        CHECK_FALSE(ds.has_labels);

        opts.out = dir.file("b.dect");
        CHECK(cmd_gen_data(opts) == kExitOk);
        CHECK(detail::read_file(dir.file("a.dect")) == detail::read_file(dir.file("b.dect")));
    }

    TEST_CASE("gen-data flag validation fails before writing") {
        TempDir dir;
        auto opts = small_gen(dir.file("x.dect"), "bogus", 1);
        CHECK(cmd_gen_data(opts) == kExitUsage);
        CHECK_FALSE(fs::exists(opts.out));

        opts = small_gen(dir.file("x.dect"), "labeled", 1);
        opts.lesion_prob = 1.5;
        CHECK(cmd_gen_data(opts) == kExitUsage);

        opts = small_gen("/proc/nonexistent/x.dect", "labeled", 1);
        CHECK(cmd_gen_data(opts) == kExitIo);
    }

    TEST_CASE("train validates mode/flag pairing before reading any file") {
        TempDir dir;
        TrainOptions opts = small_train(dir, "joint", "out");
        opts.paired_path.clear();           // flag missing entirely
        opts.labeled_path = "missing.dect"; // would be an I/O error if reached
        CHECK(cmd_train(opts) == kExitUsage);

        opts = small_train(dir, "bogus-mode", "out");
        CHECK(cmd_train(opts) == kExitUsage);

        opts = small_train(dir, "joint", "out");
        CHECK(cmd_train(opts) == kExitIo);  // flags fine, files absent
    }

    TEST_CASE("classifier-only training succeeds without a paired file") {
        TempDir dir;
        CHECK(cmd_gen_data(small_gen(dir.file("labeled.dect"), "labeled", 11)) == kExitOk);
        TrainOptions opts = small_train(dir, "classifier-only", "out");
        opts.paired_path.clear();
        CHECK(cmd_train(opts) == kExitOk);
        CHECK(fs::exists(dir.file("out/metrics.csv")));
        CHECK(fs::exists(dir.file("out/fold_0/best/manifest.txt")));
        CHECK(fs::exists(dir.file("out/fold_2/best/params.bin")));

        const auto rows = read_csv(dir.file("out/metrics.csv"));
        bool saw_test = false;
        for (const auto& row : rows) {
            CHECK(row.mode == "classifier-only");
            if (row.split == "test") saw_test = true;
        }
        CHECK(saw_test);
    }

    TEST_CASE("train twice with identical flags produces byte-identical outputs") {
        TempDir dir;
        CHECK(cmd_gen_data(small_gen(dir.file("paired.dect"), "paired", 21)) == kExitOk);
        CHECK(cmd_gen_data(small_gen(dir.file("labeled.dect"), "labeled", 22)) == kExitOk);

        TrainOptions first = small_train(dir, "joint", "run1");
        TrainOptions second = small_train(dir, "joint", "run2");
        CHECK(cmd_train(first) == kExitOk);
        CHECK(cmd_train(second) == kExitOk);

        CHECK(detail::read_file(dir.file("run1/metrics.csv")) ==
              detail::read_file(dir.file("run2/metrics.csv")));
        for (const char* name : {"manifest.txt", "params.bin", "optim.bin", "config.txt"}) {
            CHECK(detail::read_file(dir.file(std::string("run1/fold_1/best/") + name)) ==
                  detail::read_file(dir.file(std::string("run2/fold_1/best/") + name)));
        }
    }

    TEST_CASE("eval appends identical rows for identical checkpoints") {
        TempDir dir;
        CHECK(cmd_gen_data(small_gen(dir.file("paired.dect"), "paired", 31)) == kExitOk);
        CHECK(cmd_gen_data(small_gen(dir.file("labeled.dect"), "labeled", 32)) == kExitOk);
        CHECK(cmd_gen_data(small_gen(dir.file("eval.dect"), "eval", 33)) == kExitOk);
        TrainOptions train = small_train(dir, "joint", "out");
        train.eval_path = dir.file("eval.dect");
        CHECK(cmd_train(train) == kExitOk);

        EvalOptions ev;
        ev.checkpoint_dir = dir.file("out/fold_0/best");
        ev.eval_path = dir.file("eval.dect");
        ev.out_csv = dir.file("eval_rows.csv");
        CHECK(cmd_eval(ev) == kExitOk);
        CHECK(cmd_eval(ev) == kExitOk);
        const auto rows = read_csv(ev.out_csv);
        REQUIRE(rows.size() == 2);
        CHECK(format_csv_row(rows[0]) == format_csv_row(rows[1]));
        CHECK(rows[0].split == "eval");

        // A truncated parameter blob must be flagged as an integrity failure.
        const std::string blob = dir.file("out/fold_0/best/params.bin");
        auto bytes = detail::read_file(blob);
        bytes.resize(bytes.size() - 8);
        std::ofstream(blob, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK(cmd_eval(ev) == kExitIntegrity);
    }

    TEST_CASE("report aggregates fold rows per mode") {
        TempDir dir;
        fs::create_directories(dir.file("logs"));
        std::vector<CsvRow> rows;
        for (int fold = 0; fold < 2; ++fold) {
            CsvRow test_row;
            test_row.mode = "joint";
            test_row.fold = fold;
            test_row.epoch = 1;
            test_row.split = "test";
            test_row.loss_l1 = test_row.loss_cls = std::nan("");
            test_row.psnr_mean = test_row.psnr_std = test_row.ssim_mean = test_row.ssim_std = std::nan("");
            test_row.auroc = fold == 0 ? 0.8 : 0.9;
            rows.push_back(test_row);
            CsvRow eval_row = test_row;
            eval_row.split = "eval";
            eval_row.auroc = std::nan("");
            eval_row.psnr_mean = fold == 0 ? 30.0 : 32.0;
            eval_row.ssim_mean = fold == 0 ? 0.97 : 0.99;
            rows.push_back(eval_row);
        }
        append_csv_rows(dir.file("logs/metrics.csv"), rows);

        ReportOptions opts;
        opts.logs_dir = dir.file("logs");
        opts.out_csv = dir.file("summary.csv");
        CHECK(cmd_report(opts) == kExitOk);

        const auto bytes = detail::read_file(opts.out_csv);
        const std::string text(bytes.begin(), bytes.end());
        CHECK(text.find("mode,n_folds,psnr_mean,psnr_std,ssim_mean,ssim_std,auroc_mean,auroc_std") == 0);
        // folds {0.8, 0.9}: mean 0.85, population std 0.05
        CHECK(text.find("joint,2,31.000000,1.000000,0.980000,0.010000,0.850000,0.050000") !=
              std::string::npos);
    }

    TEST_CASE("report on an empty directory is an I/O error") {
        TempDir dir;
        fs::create_directories(dir.file("empty"));
        ReportOptions opts;
        opts.logs_dir = dir.file("empty");
        opts.out_csv = dir.file("summary.csv");
        CHECK(cmd_report(opts) == kExitIo);
        opts.logs_dir = dir.file("does_not_exist");
        CHECK(cmd_report(opts) == kExitIo);
    }
}
