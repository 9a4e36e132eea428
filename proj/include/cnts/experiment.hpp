#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cnts/data.hpp"
#include "cnts/eval.hpp"
#include "cnts/trainer.hpp"

namespace cnts {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { Cnts, BaselineR, BaselineDetection };

std::string run_mode_name(RunMode mode);
RunMode run_mode_from_name(const std::string& name);

/// Dataset source: CSV paths or a synthetic benchmark spec.
struct DataSpec {
    std::optional<std::string> train_csv;
    std::optional<std::string> test_csv;
    std::optional<BenchmarkSpec> synth;
    std::optional<std::uint64_t> synth_seed;  // defaults to the training seed
};

/// One experiment: dataset, training knobs, output location, mode.
struct ExperimentConfig {
    std::string run_id = "run";
    RunMode mode = RunMode::Cnts;
    DataSpec data;
    TrainConfig train;
    std::string out_dir;    // empty -> CNTS_RUNS_DIR or "runs"
    bool monitor = false;   // record per-sub-epoch monitor metrics (needs labeled test)
};

/// Parses the JSON config document. Unknown keys and missing referenced
/// data files are rejected up front, before any run directory exists.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

/// FNV-1a over the canonical JSON form; hex string.
std::string config_digest(const ExperimentConfig& cfg);

/// Resolved output root: explicit out_dir, else $CNTS_RUNS_DIR, else "runs".
std::filesystem::path resolve_out_root(const ExperimentConfig& cfg);

struct RunManifest {
    std::string version = kVersion;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string mode;
    std::string status = "ok";  // or "failed: <reason>"
    double wall_clock_sec = 0.0;
    std::optional<NormStats> norm;
    std::map<std::string, std::string> artifacts;  // name -> path relative to run dir
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

struct LoadedData {
    TimeSeries train;
    std::optional<TimeSeries> test;
};

/// Loads or synthesizes the configured dataset.
LoadedData resolve_data(const ExperimentConfig& cfg);

/// Trains per cfg.mode and writes the standard run directory layout
/// (config.json, manifest.json, r.ckpt [, d.ckpt], history.csv, reports/).
/// Returns the run directory. On a mid-run numeric failure the manifest is
/// written with a failed status before the error propagates.
std::filesystem::path cmd_train(const ExperimentConfig& cfg);

/// Evaluates a finished run on labeled test series and writes per-series
/// report JSON plus the dataset aggregate under <run>/reports/.
/// `ranges_csv`, when given, supplies labels for a single unlabeled series.
std::vector<EvalReport> cmd_eval(const std::filesystem::path& run_dir,
                                 const std::vector<std::string>& test_csvs,
                                 const std::optional<std::string>& ranges_csv,
                                 std::ostream& out);

/// Writes a train/test CSV pair from the benchmark generator and prints the
/// test label rate (recounted from the written file).
void cmd_synth(const BenchmarkSpec& spec, std::uint64_t seed,
               const std::filesystem::path& out_dir, std::ostream& out);

/// Runs cnts, baseline_r and baseline_detection on identical data and seed;
/// writes one run directory per mode plus comparison.csv and the per-stage
/// curve CSVs (curves_f1.csv, curves_dis.csv).
std::filesystem::path cmd_ablate(const ExperimentConfig& cfg, std::ostream& out);

enum class ReportFormat { Csv, Markdown };

/// Merges manifests and aggregate reports from several run directories into
/// one table, with a final mean row; warns on config-digest mismatches.
void cmd_report(const std::vector<std::filesystem::path>& run_dirs, ReportFormat format,
                std::ostream& out, std::ostream& warnings);

} // namespace cnts
