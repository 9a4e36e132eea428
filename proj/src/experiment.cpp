#include "cnts/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cnts/errors.hpp"

namespace cnts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

bool filesystem_safe(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        if (!ok) return false;
    }
    return id != "." && id != "..";
}

json synth_to_json(const BenchmarkSpec& s, const std::optional<std::uint64_t>& seed) {
    json j{
        {"length", s.length},
        {"period", s.period},
        {"amplitude", s.amplitude},
        {"noise_std", s.noise_std},
        {"spikes", s.n_spikes},
        {"spike_magnitude", s.spike_magnitude},
        {"shifts", s.n_shifts},
        {"shift_span", s.shift_span},
        {"shift_magnitude", s.shift_magnitude},
    };
    if (seed) j["seed"] = *seed;
    return j;
}

BenchmarkSpec synth_from_json(const json& j, std::optional<std::uint64_t>& seed) {
    check_keys(j,
               {"length", "period", "amplitude", "noise_std", "spikes", "spike_magnitude",
                "shifts", "shift_span", "shift_magnitude", "seed"},
               "data.synth");
    BenchmarkSpec s;
    s.length = j.value("length", s.length);
    s.period = j.value("period", s.period);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.n_spikes = j.value("spikes", s.n_spikes);
    s.spike_magnitude = j.value("spike_magnitude", s.spike_magnitude);
    s.n_shifts = j.value("shifts", s.n_shifts);
    s.shift_span = j.value("shift_span", s.shift_span);
    s.shift_magnitude = j.value("shift_magnitude", s.shift_magnitude);
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    return s;
}

json train_to_json(const TrainConfig& t) {
    return json{
        {"epochs", t.epochs},
        {"r_epochs", t.r_epochs},
        {"d_epochs", t.d_epochs},
        {"window", t.window_len},
        {"stride", t.train_stride},
        {"batch_size", t.batch_size},
        {"select_fraction", t.detector_select_fraction},
        {"exclude_fraction", t.reconstructor_exclude_fraction},
        {"learning_rate", t.optimizer.step_size},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"epsilon", t.optimizer.epsilon},
        {"seed", t.seed},
        {"normalize", t.normalize_input},
        {"hidden", t.hidden},
    };
}

TrainConfig train_from_json(const json& j) {
    check_keys(j,
               {"epochs", "r_epochs", "d_epochs", "window", "stride", "batch_size",
                "select_fraction", "exclude_fraction", "learning_rate", "beta1", "beta2",
                "epsilon", "seed", "normalize", "hidden"},
               "train");
    TrainConfig t;
    t.epochs = j.value("epochs", t.epochs);
    t.r_epochs = j.value("r_epochs", t.r_epochs);
    t.d_epochs = j.value("d_epochs", t.d_epochs);
    t.window_len = j.value("window", t.window_len);
    t.train_stride = j.value("stride", t.train_stride);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.detector_select_fraction = j.value("select_fraction", t.detector_select_fraction);
    t.reconstructor_exclude_fraction =
        j.value("exclude_fraction", t.reconstructor_exclude_fraction);
    t.optimizer.step_size = j.value("learning_rate", t.optimizer.step_size);
    t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
    t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
    t.optimizer.epsilon = j.value("epsilon", t.optimizer.epsilon);
    t.seed = j.value("seed", t.seed);
    t.normalize_input = j.value("normalize", t.normalize_input);
    t.hidden = j.value("hidden", t.hidden);
    return t;
}

json config_to_json_obj(const ExperimentConfig& cfg) {
    json data;
    if (cfg.data.synth) {
        data["synth"] = synth_to_json(*cfg.data.synth, cfg.data.synth_seed);
    } else {
        if (cfg.data.train_csv) data["train_csv"] = *cfg.data.train_csv;
        if (cfg.data.test_csv) data["test_csv"] = *cfg.data.test_csv;
    }
    json j{
        {"run_id", cfg.run_id},
        {"mode", run_mode_name(cfg.mode)},
        {"monitor", cfg.monitor},
        {"data", data},
        {"train", train_to_json(cfg.train)},
    };
    if (!cfg.out_dir.empty()) j["out_dir"] = cfg.out_dir;
    return j;
}

} // namespace

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Cnts: return "cnts";
        case RunMode::BaselineR: return "baseline_r";
        case RunMode::BaselineDetection: return "baseline_detection";
    }
    return "cnts";
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "cnts") return RunMode::Cnts;
    if (name == "baseline_r") return RunMode::BaselineR;
    if (name == "baseline_detection") return RunMode::BaselineDetection;
    throw ConfigError("unknown mode '" + name +
                      "' (expected cnts, baseline_r or baseline_detection)");
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }

    check_keys(j, {"run_id", "mode", "data", "train", "out_dir", "monitor"}, "config");

    ExperimentConfig cfg;
    try {
        cfg.run_id = j.value("run_id", cfg.run_id);
        cfg.mode = run_mode_from_name(j.value("mode", std::string("cnts")));
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.monitor = j.value("monitor", cfg.monitor);
        if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
        if (j.contains("data")) {
            const json& data = j.at("data");
            check_keys(data, {"train_csv", "test_csv", "synth"}, "data");
            if (data.contains("synth")) {
                if (data.contains("train_csv") || data.contains("test_csv")) {
                    throw ConfigError("data: give either synth or csv paths, not both");
                }
                cfg.data.synth = synth_from_json(data.at("synth"), cfg.data.synth_seed);
            } else {
                if (data.contains("train_csv")) {
                    cfg.data.train_csv = data.at("train_csv").get<std::string>();
                }
                if (data.contains("test_csv")) {
                    cfg.data.test_csv = data.at("test_csv").get<std::string>();
                }
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }

    if (!cfg.data.synth && !cfg.data.train_csv) {
        throw ConfigError("config: data needs either a synth spec or a train_csv path");
    }
    if (!filesystem_safe(cfg.run_id)) {
        throw ConfigError("run_id '" + cfg.run_id + "' is not filesystem-safe");
    }
    if (cfg.data.train_csv && !fs::exists(*cfg.data.train_csv)) {
        throw ConfigError("train_csv does not exist: " + *cfg.data.train_csv);
    }
    if (cfg.data.test_csv && !fs::exists(*cfg.data.test_csv)) {
        throw ConfigError("test_csv does not exist: " + *cfg.data.test_csv);
    }
    cfg.train.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from_json(read_text_file(path));
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    return config_to_json_obj(cfg).dump(2);
}

std::string config_digest(const ExperimentConfig& cfg) {
    // The digest covers experiment semantics only; run_id and out_dir are
    // bookkeeping.
    json j = config_to_json_obj(cfg);
    j.erase("run_id");
    j.erase("out_dir");
    return hex64(fnv1a64(j.dump()));
}

fs::path resolve_out_root(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("CNTS_RUNS_DIR"); env && *env) return env;
    return "runs";
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
    json j{
        {"version", manifest.version},
        {"config_digest", manifest.config_digest},
        {"seed", manifest.seed},
        {"mode", manifest.mode},
        {"status", manifest.status},
        {"wall_clock_sec", manifest.wall_clock_sec},
        {"artifacts", manifest.artifacts},
    };
    if (manifest.norm) {
        j["norm"] = json{{"mean", manifest.norm->mean}, {"std", manifest.norm->std}};
    } else {
        j["norm"] = nullptr;
    }
    write_text_file(path, j.dump(2));
}

RunManifest read_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    RunManifest m;
    try {
        m.version = j.at("version").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.mode = j.at("mode").get<std::string>();
        m.status = j.at("status").get<std::string>();
        m.wall_clock_sec = j.at("wall_clock_sec").get<double>();
        m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        if (!j.at("norm").is_null()) {
            m.norm = NormStats{j.at("norm").at("mean").get<double>(),
                               j.at("norm").at("std").get<double>()};
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return m;
}

LoadedData resolve_data(const ExperimentConfig& cfg) {
    LoadedData data;
    if (cfg.data.synth) {
        std::uint64_t seed = cfg.data.synth_seed ? *cfg.data.synth_seed : cfg.train.seed;
        BenchmarkPair pair = make_benchmark(*cfg.data.synth, seed);
        data.train = std::move(pair.train);
        data.test = std::move(pair.test);
        return data;
    }
    data.train = load_series_csv(*cfg.data.train_csv, SeriesRole::Train);
    if (data.train.labels) {
        // Unsupervised contract: the trainer must not see labels.
        data.train.labels.reset();
    }
    if (cfg.data.test_csv) {
        data.test = load_series_csv(*cfg.data.test_csv, SeriesRole::Test);
    }
    return data;
}

namespace {

TrainResult dispatch_train(const ExperimentConfig& cfg, const LoadedData& data,
                           const TimeSeries* monitor) {
    switch (cfg.mode) {
        case RunMode::Cnts: return train_cnts(data.train, cfg.train, monitor);
        case RunMode::BaselineR:
            return train_baseline_reconstructor(data.train, cfg.train, monitor);
        case RunMode::BaselineDetection:
            return train_baseline_detector(data.train, cfg.train, monitor);
    }
    throw ConfigError("unknown run mode");
}

RunManifest make_manifest(const ExperimentConfig& cfg) {
    RunManifest m;
    m.config_digest = config_digest(cfg);
    m.seed = cfg.train.seed;
    m.mode = run_mode_name(cfg.mode);
    return m;
}

void write_run_artifacts(const fs::path& run_dir, const ExperimentConfig& cfg,
                         const TrainResult& result, double wall_sec) {
    fs::create_directories(run_dir / "reports");
    write_text_file(run_dir / "config.json", experiment_config_to_json(cfg));

    const std::string digest = config_digest(cfg);
    save_checkpoint(result.reconstructor, (run_dir / "r.ckpt").string(), digest);

    RunManifest manifest = make_manifest(cfg);
    manifest.wall_clock_sec = wall_sec;
    manifest.norm = result.norm;
    manifest.artifacts["config"] = "config.json";
    manifest.artifacts["r_checkpoint"] = "r.ckpt";
    manifest.artifacts["history"] = "history.csv";
    manifest.artifacts["reports"] = "reports";
    if (cfg.mode != RunMode::BaselineR) {
        save_checkpoint(result.detector, (run_dir / "d.ckpt").string(), digest);
        manifest.artifacts["d_checkpoint"] = "d.ckpt";
    }
    write_history_csv(result.history, (run_dir / "history.csv").string());
    write_manifest(manifest, run_dir / "manifest.json");
}

} // namespace

fs::path cmd_train(const ExperimentConfig& cfg) {
    cfg.train.validate();
    LoadedData data = resolve_data(cfg);

    const TimeSeries* monitor = nullptr;
    if (cfg.monitor) {
        if (!data.test || !data.test->labels) {
            throw ConfigError("monitor=true needs a labeled test series");
        }
        monitor = &*data.test;
    }

    fs::path run_dir = resolve_out_root(cfg) / cfg.run_id;
    Clock clock;
    try {
        TrainResult result = dispatch_train(cfg, data, monitor);
        write_run_artifacts(run_dir, cfg, result, clock.seconds());
    } catch (const NumericError& e) {
        // Flag the partial run so downstream tools refuse it.
        fs::create_directories(run_dir);
        RunManifest manifest = make_manifest(cfg);
        manifest.wall_clock_sec = clock.seconds();
        manifest.status = std::string("failed: ") + e.what();
        for (const char* name : {"config.json", "r.ckpt", "d.ckpt", "history.csv"}) {
            if (fs::exists(run_dir / name)) manifest.artifacts[name] = name;
        }
        write_manifest(manifest, run_dir / "manifest.json");
        throw;
    }
    return run_dir;
}

std::vector<EvalReport> cmd_eval(const fs::path& run_dir,
                                 const std::vector<std::string>& test_csvs,
                                 const std::optional<std::string>& ranges_csv,
                                 std::ostream& out) {
    if (test_csvs.empty()) throw ConfigError("eval: no test series given");
    if (ranges_csv && test_csvs.size() != 1) {
        throw ConfigError("eval: --ranges applies to exactly one test series");
    }

    RunManifest manifest = read_manifest(run_dir / "manifest.json");
    if (manifest.status != "ok") {
        throw ValidationError("run " + run_dir.string() + " is marked '" + manifest.status +
                              "'");
    }
    if (!fs::exists(run_dir / "d.ckpt")) {
        throw ValidationError("run " + run_dir.string() +
                              " has no detector checkpoint (baseline_r runs cannot be "
                              "evaluated for detection)");
    }

    ReconstructorModel reconstructor = load_reconstructor((run_dir / "r.ckpt").string());
    DetectorModel detector = load_detector((run_dir / "d.ckpt").string());

    Checkpoint r_ckpt = load_checkpoint((run_dir / "r.ckpt").string());
    if (r_ckpt.config_digest != manifest.config_digest) {
        throw ValidationError(run_dir.string() +
                              ": checkpoint digest does not match the manifest");
    }

    fs::create_directories(run_dir / "reports");
    std::vector<EvalReport> reports;
    for (const auto& path : test_csvs) {
        TimeSeries series = load_series_csv(path, SeriesRole::Test);
        if (!series.labels && ranges_csv) {
            series.labels = labels_from_ranges(load_ranges_csv(*ranges_csv), series.size());
        }
        if (!series.labels) {
            throw ValidationError(path + ": test series must be labeled (inline labels or "
                                  "--ranges)");
        }
        EvalReport report = evaluate(detector, reconstructor, series, manifest.norm);
        reports.push_back(report);
        write_text_file(run_dir / "reports" / (series.name + ".json"),
                        report_to_json(report));
        char line[160];
        std::snprintf(line, sizeof(line),
                      "%-24s f1=%.4f auc=%.4f acc=%.4f dis=%.4f threshold=%.6g",
                      series.name.c_str(), report.f1, report.auc, report.acc, report.dis,
                      report.threshold);
        out << line << "\n";
    }

    write_text_file(run_dir / "reports" / "aggregate.json", aggregate_to_json(reports));
    double mean_f1 = 0.0, mean_auc = 0.0, mean_acc = 0.0;
    for (const auto& r : reports) {
        mean_f1 += r.f1;
        mean_auc += r.auc;
        mean_acc += r.acc;
    }
    double n = static_cast<double>(reports.size());
    char line[160];
    std::snprintf(line, sizeof(line),
                  "aggregate (%zu series)    f1=%.4f auc=%.4f acc=%.4f", reports.size(),
                  mean_f1 / n, mean_auc / n, mean_acc / n);
    out << line << "\n";
    return reports;
}

void cmd_synth(const BenchmarkSpec& spec, std::uint64_t seed, const fs::path& out_dir,
               std::ostream& out) {
    fs::create_directories(out_dir);
    BenchmarkPair pair = make_benchmark(spec, seed);
    fs::path train_path = out_dir / "train.csv";
    fs::path test_path = out_dir / "test.csv";
    write_series_csv(pair.train, train_path.string());
    write_series_csv(pair.test, test_path.string());

    // Recount from the written file so the printed rate reflects the artifact.
    TimeSeries reread = load_series_csv(test_path.string(), SeriesRole::Test);
    std::size_t positives = 0;
    for (std::uint8_t y : *reread.labels) positives += y;
    double rate = 100.0 * static_cast<double>(positives) /
                  static_cast<double>(reread.size());

    out << "wrote " << train_path.string() << " (" << pair.train.size()
        << " points, unlabeled)\n";
    out << "wrote " << test_path.string() << " (" << reread.size() << " points, "
        << positives << " anomalous)\n";
    char line[64];
    std::snprintf(line, sizeof(line), "test anomaly rate: %.2f%%", rate);
    out << line << "\n";
}

namespace {

void append_curve_cell(std::string& line, double v) {
    line += ',';
    if (std::isnan(v)) return;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += buf;
}

void write_curves_csv(const fs::path& path, const std::vector<TrainHistory>& histories,
                      double HistoryRecord::* column) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "stage,phase,sub_epoch,cnts,baseline_r,baseline_detection\n";
    const auto& lead = histories.front().records;
    for (std::size_t i = 0; i < lead.size(); ++i) {
        std::string line = std::to_string(lead[i].stage);
        line += ',';
        line += lead[i].phase;
        line += ',';
        line += std::to_string(lead[i].sub_epoch);
        for (const auto& h : histories) append_curve_cell(line, h.records[i].*column);
        out << line << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

fs::path cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.train.validate();
    LoadedData data = resolve_data(cfg);
    if (!data.test || !data.test->labels) {
        throw ConfigError("ablate needs a labeled test series (synth data or test_csv)");
    }
    const TimeSeries& test = *data.test;

    fs::path root = resolve_out_root(cfg) / cfg.run_id;
    const RunMode modes[] = {RunMode::Cnts, RunMode::BaselineR, RunMode::BaselineDetection};

    std::vector<TrainHistory> histories;
    std::vector<std::string> comparison_rows;
    for (RunMode mode : modes) {
        ExperimentConfig sub = cfg;
        sub.mode = mode;
        sub.monitor = true;

        Clock clock;
        TrainResult result = dispatch_train(sub, data, &test);
        fs::path run_dir = root / run_mode_name(mode);
        write_run_artifacts(run_dir, sub, result, clock.seconds());

        double f1 = std::numeric_limits<double>::quiet_NaN();
        double auc_value = std::numeric_limits<double>::quiet_NaN();
        double dis_value;
        if (mode == RunMode::BaselineR) {
            TimeSeries prepared = result.norm ? normalize(test, *result.norm) : test;
            PointScores errors = point_recon_errors(result.reconstructor, prepared,
                                                    cfg.train.window_len, 1);
            auto [mse_n, mse_a] = mse_split(errors.scores, *test.labels);
            dis_value = dis(mse_n, mse_a);
        } else {
            EvalReport report = evaluate(result.detector, result.reconstructor, test,
                                         result.norm);
            write_text_file(run_dir / "reports" / (test.name + ".json"),
                            report_to_json(report));
            write_text_file(run_dir / "reports" / "aggregate.json",
                            aggregate_to_json({report}));
            f1 = report.f1;
            auc_value = report.auc;
            dis_value = report.dis;
        }

        std::string row = run_mode_name(mode);
        append_curve_cell(row, f1);
        append_curve_cell(row, auc_value);
        append_curve_cell(row, dis_value);
        comparison_rows.push_back(row);
        histories.push_back(std::move(result.history));

        auto metric = [](double v) -> std::string {
            if (std::isnan(v)) return "-";
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", v);
            return buf;
        };
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s f1=%s auc=%s dis=%.4f",
                      run_mode_name(mode).c_str(), metric(f1).c_str(),
                      metric(auc_value).c_str(), dis_value);
        out << line << "\n";
    }

    {
        std::ofstream comparison(root / "comparison.csv");
        if (!comparison) throw IoError("cannot write comparison.csv");
        comparison << "mode,f1,auc,dis\n";
        for (const auto& row : comparison_rows) comparison << row << '\n';
    }
    write_curves_csv(root / "curves_f1.csv", histories, &HistoryRecord::f1);
    write_curves_csv(root / "curves_dis.csv", histories, &HistoryRecord::dis);
    out << "ablation artifacts in " << root.string() << "\n";
    return root;
}

void cmd_report(const std::vector<fs::path>& run_dirs, ReportFormat format,
                std::ostream& out, std::ostream& warnings) {
    if (run_dirs.empty()) throw ConfigError("report: no run directories given");

    struct Row {
        std::string run, mode, digest, status;
        std::uint64_t seed = 0;
        double acc = std::numeric_limits<double>::quiet_NaN();
        double f1 = std::numeric_limits<double>::quiet_NaN();
        double auc = std::numeric_limits<double>::quiet_NaN();
        double wall = 0.0;
    };

    std::vector<Row> rows;
    for (const auto& dir : run_dirs) {
        RunManifest manifest = read_manifest(dir / "manifest.json");
        Row row;
        row.run = dir.string();
        row.mode = manifest.mode;
        row.digest = manifest.config_digest;
        row.status = manifest.status;
        row.seed = manifest.seed;
        row.wall = manifest.wall_clock_sec;

        fs::path aggregate = dir / "reports" / "aggregate.json";
        if (fs::exists(aggregate)) {
            json j = json::parse(read_text_file(aggregate));
            row.acc = j.at("mean_acc").get<double>();
            row.f1 = j.at("mean_f1").get<double>();
            row.auc = j.at("mean_auc").get<double>();
        }
        rows.push_back(std::move(row));
    }

    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].digest != rows[0].digest) {
            warnings << "warning: config digest mismatch: " << rows[i].run << " ("
                     << rows[i].digest << ") vs " << rows[0].run << " (" << rows[0].digest
                     << ")\n";
        }
    }

    auto fmt_num = [](double v) -> std::string {
        if (std::isnan(v)) return "";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return buf;
    };

    double sum_acc = 0.0, sum_f1 = 0.0, sum_auc = 0.0;
    std::size_t n_metrics = 0;
    for (const auto& row : rows) {
        if (!std::isnan(row.f1)) {
            sum_acc += row.acc;
            sum_f1 += row.f1;
            sum_auc += row.auc;
            ++n_metrics;
        }
    }

    const bool md = format == ReportFormat::Markdown;
    if (md) {
        out << "| run | mode | seed | digest | status | mean_acc | mean_f1 | mean_auc | "
               "wall_sec |\n";
        out << "|---|---|---|---|---|---|---|---|---|\n";
    } else {
        out << "run,mode,seed,digest,status,mean_acc,mean_f1,mean_auc,wall_clock_sec\n";
    }
    auto emit = [&](const std::string& run, const std::string& mode,
                    const std::string& seed, const std::string& digest,
                    const std::string& status, const std::string& acc,
                    const std::string& f1, const std::string& auc_s,
                    const std::string& wall) {
        if (md) {
            out << "| " << run << " | " << mode << " | " << seed << " | " << digest
                << " | " << status << " | " << acc << " | " << f1 << " | " << auc_s
                << " | " << wall << " |\n";
        } else {
            out << run << ',' << mode << ',' << seed << ',' << digest << ',' << status
                << ',' << acc << ',' << f1 << ',' << auc_s << ',' << wall << '\n';
        }
    };
    for (const auto& row : rows) {
        char wall[32];
        std::snprintf(wall, sizeof(wall), "%.3f", row.wall);
        emit(row.run, row.mode, std::to_string(row.seed), row.digest, row.status,
             fmt_num(row.acc), fmt_num(row.f1), fmt_num(row.auc), wall);
    }
    if (n_metrics > 0) {
        double n = static_cast<double>(n_metrics);
        emit("mean", "", "", "", "", fmt_num(sum_acc / n), fmt_num(sum_f1 / n),
             fmt_num(sum_auc / n), "");
    }
}

} // namespace cnts
