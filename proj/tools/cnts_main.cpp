#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cnts/errors.hpp"
#include "cnts/experiment.hpp"

namespace {

struct TrainArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> mode;
};

cnts::ExperimentConfig load_with_overrides(const TrainArgs& args) {
    cnts::ExperimentConfig cfg = cnts::load_experiment_config(args.config_path);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    if (args.mode) cfg.mode = cnts::run_mode_from_name(*args.mode);
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"CNTS: cooperative reconstructor/detector training for univariate "
                 "time-series anomaly detection"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train models per a JSON experiment config");
    train->add_option("--config", train_args.config_path, "Experiment config JSON")
        ->required();
    train->add_option("--seed", train_args.seed, "Override the training seed");
    train->add_option("--out", train_args.out_dir, "Override the output root directory");
    train->add_option("--mode", train_args.mode,
                      "Override the mode (cnts|baseline_r|baseline_detection)");

    std::string eval_run;
    std::vector<std::string> eval_tests;
    std::optional<std::string> eval_ranges;
    auto* eval = app.add_subcommand("eval", "Evaluate a finished run on labeled series");
    eval->add_option("--run", eval_run, "Run directory produced by train")->required();
    eval->add_option("--test", eval_tests, "Labeled test series CSV (repeatable)")
        ->required();
    eval->add_option("--ranges", eval_ranges,
                     "Anomaly ranges CSV supplying labels for a single test series");

    cnts::BenchmarkSpec synth_spec;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic train/test CSV pair");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--length", synth_spec.length, "Points per series");
    synth->add_option("--period", synth_spec.period, "Sine period");
    synth->add_option("--amplitude", synth_spec.amplitude, "Sine amplitude");
    synth->add_option("--noise", synth_spec.noise_std, "Gaussian noise std");
    synth->add_option("--spikes", synth_spec.n_spikes, "Number of single-point spikes");
    synth->add_option("--spike-mag", synth_spec.spike_magnitude,
                      "Spike magnitude (units of base std)");
    synth->add_option("--shifts", synth_spec.n_shifts, "Number of level shifts");
    synth->add_option("--shift-span", synth_spec.shift_span, "Level shift span");
    synth->add_option("--shift-mag", synth_spec.shift_magnitude,
                      "Level shift magnitude (units of base std)");

    TrainArgs ablate_args;
    auto* ablate = app.add_subcommand(
        "ablate", "Run cnts vs baseline_r vs baseline_detection on identical data");
    ablate->add_option("--config", ablate_args.config_path, "Experiment config JSON")
        ->required();
    ablate->add_option("--seed", ablate_args.seed, "Override the training seed");
    ablate->add_option("--out", ablate_args.out_dir, "Override the output root directory");

    std::vector<std::string> report_dirs;
    std::string report_format = "csv";
    std::optional<std::string> report_out;
    auto* report = app.add_subcommand("report", "Summarize one or more run directories");
    report->add_option("dirs", report_dirs, "Run directories")->required();
    report->add_option("--format", report_format, "csv or md")
        ->check(CLI::IsMember({"csv", "md"}));
    report->add_option("--out", report_out, "Write the table to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (train->parsed()) {
        auto run_dir = cnts::cmd_train(load_with_overrides(train_args));
        std::cout << "run directory: " << run_dir.string() << "\n";
    } else if (eval->parsed()) {
        cnts::cmd_eval(eval_run, eval_tests, eval_ranges, std::cout);
    } else if (synth->parsed()) {
        cnts::cmd_synth(synth_spec, synth_seed, synth_out, std::cout);
    } else if (ablate->parsed()) {
        cnts::cmd_ablate(load_with_overrides(ablate_args), std::cout);
    } else if (report->parsed()) {
        std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
        cnts::ReportFormat fmt = report_format == "md" ? cnts::ReportFormat::Markdown
                                                       : cnts::ReportFormat::Csv;
        if (report_out) {
            std::ofstream file(*report_out);
            if (!file) throw cnts::IoError("cannot write " + *report_out);
            cnts::cmd_report(dirs, fmt, file, std::cerr);
        } else {
            cnts::cmd_report(dirs, fmt, std::cout, std::cerr);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cnts::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const cnts::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const cnts::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
