// Command-line front end: synthetic dual-energy datasets, joint/sequential/
// classifier-only training, checkpoint evaluation and cross-fold reports.

#include <CLI11.hpp>

#include "dect/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Polyenergetic-to-monoenergetic CT translation with joint lesion classification"};
    app.require_subcommand(1);

    dect::GenDataOptions gen_opts;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
    gen_cmd->add_option("--seed", gen_opts.seed, "Dataset seed (namespaces patient ids)");
    gen_cmd->add_option("--n-patients", gen_opts.n_patients, "Number of patients")->required();
    gen_cmd->add_option("--slices-per-patient", gen_opts.slices_per_patient, "Slices per patient")
        ->required();
    gen_cmd->add_option("--role", gen_opts.role, "paired|labeled|eval")->required();
    gen_cmd->add_option("--lesion-prob", gen_opts.lesion_prob, "Probability a slice has a lesion");
    gen_cmd->add_option("--image-size", gen_opts.image_size, "Square image size (multiple of 4)");
    gen_cmd->add_option("--out", gen_opts.out, "Output dataset path")->required();

    dect::TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train per mode with patient-wise cross validation");
    train_cmd->add_option("--mode", train_opts.mode, "joint|sequential|classifier-only")->required();
    train_cmd->add_option("--paired", train_opts.paired_path, "Paired dataset (poly+mono)");
    train_cmd->add_option("--labeled", train_opts.labeled_path, "Labeled dataset (poly+label)")
        ->required();
    train_cmd->add_option("--eval", train_opts.eval_path, "Evaluation dataset (both annotations)");
    train_cmd->add_option("--folds", train_opts.folds, "Cross-validation folds");
    train_cmd->add_option("--seed", train_opts.seed, "Training seed");
    train_cmd->add_option("--out-dir", train_opts.out_dir, "Output directory")->required();
    train_cmd->add_option("--epochs-const", train_opts.epochs_const, "Constant-LR epochs");
    train_cmd->add_option("--epochs-decay", train_opts.epochs_decay, "Linear-decay epochs");
    train_cmd->add_option("--batch-size", train_opts.batch_size, "Batch size");
    train_cmd->add_option("--lr", train_opts.lr, "Adam learning rate");
    train_cmd->add_option("--beta1", train_opts.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", train_opts.beta2, "Adam beta2");
    train_cmd->add_option("--weight-decay", train_opts.weight_decay, "L2 weight decay");
    train_cmd->add_option("--mix-fraction", train_opts.mix_fraction, "Labeled fraction per batch");
    train_cmd->add_option("--gen-base", train_opts.gen_base, "Generator base channels");
    train_cmd->add_option("--gen-blocks", train_opts.gen_blocks, "Generator residual blocks");
    train_cmd->add_option("--cls-base", train_opts.cls_base, "Classifier base channels");
    train_cmd->add_option("--cls-stages", train_opts.cls_stages, "Classifier stride-2 stages");

    dect::EvalOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint_dir, "Checkpoint directory")->required();
    eval_cmd->add_option("--eval", eval_opts.eval_path, "Evaluation dataset")->required();
    eval_cmd->add_option("--out", eval_opts.out_csv, "CSV to append the result row to")->required();

    dect::ReportOptions report_opts;
    auto* report_cmd = app.add_subcommand("report", "Aggregate per-fold CSV logs into a summary table");
    report_cmd->add_option("--logs", report_opts.logs_dir, "Directory holding metrics CSVs")->required();
    report_cmd->add_option("--out", report_opts.out_csv, "Summary CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return dect::kExitUsage;
    }

    if (gen_cmd->parsed()) return dect::cmd_gen_data(gen_opts);
    if (train_cmd->parsed()) return dect::cmd_train(train_opts);
    if (eval_cmd->parsed()) return dect::cmd_eval(eval_opts);
    if (report_cmd->parsed()) return dect::cmd_report(report_opts);
    return dect::kExitUsage;
}
