#include "cnts/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cnts/errors.hpp"

namespace cnts {

namespace {

std::vector<double> flatten(const Matrix& m) { return m.data; }

Matrix unflatten(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    m.data = flat;
    return m;
}

// Monitoring is read-only: metrics land in the history and nowhere else.
void fill_monitor(HistoryRecord& rec, const DetectorModel& d, const ReconstructorModel& r,
                  const TimeSeries* monitor, const std::optional<NormStats>& norm) {
    if (!monitor) return;
    EvalReport report = evaluate(d, r, *monitor, norm);
    rec.mse_n = report.mse_n;
    rec.mse_a = report.mse_a;
    rec.dis = report.dis;
    rec.f1 = report.f1;
}

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void append_cell(std::string& line, double v) {
    line += ',';
    if (std::isnan(v)) return;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += buf;
}

double parse_cell(const std::string& field, std::size_t line_no) {
    if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') {
        throw ParseError("history CSV line " + std::to_string(line_no) +
                         ": bad number '" + field + "'");
    }
    return v;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (r_epochs < 0 || d_epochs < 0) throw ConfigError("phase epochs must be >= 0");
    if (window_len < 1) throw ConfigError("window length must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(detector_select_fraction > 0.0 && detector_select_fraction <= 1.0)) {
        throw ConfigError("detector_select_fraction must lie in (0, 1]");
    }
    if (!(reconstructor_exclude_fraction >= 0.0 && reconstructor_exclude_fraction < 1.0)) {
        throw ConfigError("reconstructor_exclude_fraction must lie in [0, 1)");
    }
    if (!(optimizer.step_size > 0.0)) throw ConfigError("optimizer step size must be positive");
}

SelectionMask select_top_fraction(const std::vector<double>& values, double fraction) {
    if (values.empty()) throw ShapeError("select_top_fraction: empty values");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("select_top_fraction: fraction must lie in (0, 1]");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("select_top_fraction: non-finite value");
    }

    const std::size_t n = values.size();
    std::size_t k = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n)));
    k = std::min(std::max<std::size_t>(k, 1), n);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;  // tie-break: lower index first
    });
    order.resize(k);
    std::sort(order.begin(), order.end());

    return {std::move(order), n};
}

LossGrad detector_loss(const std::vector<double>& recon_errors,
                       const std::vector<double>& scores, double select_fraction) {
    if (recon_errors.size() != scores.size()) {
        throw ShapeError("detector_loss: length mismatch");
    }
    SelectionMask mask = select_top_fraction(recon_errors, select_fraction);
    if (mask.indices.size() < 2) {
        throw ValidationError("detector_loss: degenerate selection (softmax over fewer "
                              "than 2 elements)");
    }

    std::vector<double> target_logits(mask.indices.size());
    std::vector<double> score_logits(mask.indices.size());
    for (std::size_t i = 0; i < mask.indices.size(); ++i) {
        target_logits[i] = recon_errors[mask.indices[i]];
        score_logits[i] = scores[mask.indices[i]];
    }

    std::vector<double> target = softmax(target_logits);
    LossGrad out;
    out.loss = cross_entropy(target, score_logits);
    out.grad.assign(scores.size(), 0.0);
    std::vector<double> predicted = softmax(score_logits);
    for (std::size_t i = 0; i < mask.indices.size(); ++i) {
        out.grad[mask.indices[i]] = predicted[i] - target[i];
    }
    return out;
}

LossGrad reconstructor_loss(const std::vector<double>& windows,
                            const std::vector<double>& recon,
                            const std::vector<double>& scores, double exclude_fraction) {
    if (windows.size() != recon.size()) {
        throw ShapeError("reconstructor_loss: window/reconstruction length mismatch");
    }
    if (windows.empty()) throw ShapeError("reconstructor_loss: empty input");

    std::vector<bool> keep(windows.size(), true);
    std::size_t kept = windows.size();
    if (exclude_fraction > 0.0) {
        if (scores.size() != windows.size()) {
            throw ShapeError("reconstructor_loss: score length mismatch");
        }
        SelectionMask drop = select_top_fraction(scores, exclude_fraction);
        for (std::size_t idx : drop.indices) keep[idx] = false;
        kept -= drop.indices.size();
    }
    if (kept == 0) {
        throw ValidationError("reconstructor_loss: degenerate selection (all elements "
                              "excluded)");
    }

    LossGrad out;
    out.grad.assign(windows.size(), 0.0);
    double acc = 0.0;
    const double inv_kept = 1.0 / static_cast<double>(kept);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!keep[i]) continue;
        double d = windows[i] - recon[i];
        acc += d * d;
        out.grad[i] = 2.0 * (recon[i] - windows[i]) * inv_kept;
    }
    out.loss = acc * inv_kept;
    if (!std::isfinite(out.loss)) {
        throw NumericError("reconstructor_loss: non-finite loss");
    }
    return out;
}

std::vector<WindowBatch> make_batches(const WindowBatch& all, std::size_t batch_size) {
    if (batch_size < 1) throw ConfigError("make_batches: batch size must be >= 1");
    std::vector<WindowBatch> batches;
    const std::size_t l = all.window_len();
    for (std::size_t begin = 0; begin < all.count(); begin += batch_size) {
        std::size_t end = std::min(begin + batch_size, all.count());
        WindowBatch b;
        b.stride = all.stride;
        b.windows = Matrix(end - begin, l);
        b.origins.assign(all.origins.begin() + static_cast<std::ptrdiff_t>(begin),
                         all.origins.begin() + static_cast<std::ptrdiff_t>(end));
        std::copy(all.windows.data.begin() + static_cast<std::ptrdiff_t>(begin * l),
                  all.windows.data.begin() + static_cast<std::ptrdiff_t>(end * l),
                  b.windows.data.begin());
        batches.push_back(std::move(b));
    }
    return batches;
}

EpochStats train_reconstructor_epoch(ReconstructorModel& r, const DetectorModel& d_frozen,
                                     const std::vector<WindowBatch>& batches,
                                     const TrainConfig& cfg, AdamState& opt) {
    EpochStats stats;
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        const WindowBatch& batch = batches[bi];
        try {
            ForwardTrace trace = forward(r.net, batch.windows);
            std::vector<double> window_flat = flatten(batch.windows);
            std::vector<double> recon_flat = flatten(trace.output());

            std::vector<double> score_flat;
            if (cfg.reconstructor_exclude_fraction > 0.0) {
                score_flat = flatten(detect(d_frozen, batch));
            }
            LossGrad lg = reconstructor_loss(window_flat, recon_flat, score_flat,
                                             cfg.reconstructor_exclude_fraction);

            Matrix grad = unflatten(lg.grad, batch.count(), batch.window_len());
            NetGrads grads = backward(r.net, trace, grad);
            adam_step(r.net, grads, opt);

            loss_sum += lg.loss;
            stats.last_batch_loss = lg.loss;
        } catch (const NumericError& e) {
            throw NumericError("reconstructor batch " + std::to_string(bi) + ": " + e.what());
        }
    }
    stats.batches = batches.size();
    stats.mean_loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    return stats;
}

EpochStats train_detector_epoch(DetectorModel& d, const ReconstructorModel& r_frozen,
                                const std::vector<WindowBatch>& batches,
                                const TrainConfig& cfg, AdamState& opt) {
    EpochStats stats;
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        const WindowBatch& batch = batches[bi];
        try {
            std::vector<double> window_flat = flatten(batch.windows);
            std::vector<double> recon_flat = flatten(reconstruct(r_frozen, batch));
            std::vector<double> errors = elementwise_sq_err(window_flat, recon_flat);

            ForwardTrace trace = forward(d.net, batch.windows);
            std::vector<double> score_flat = flatten(trace.output());

            LossGrad lg = detector_loss(errors, score_flat, cfg.detector_select_fraction);

            Matrix grad = unflatten(lg.grad, batch.count(), batch.window_len());
            NetGrads grads = backward(d.net, trace, grad);
            adam_step(d.net, grads, opt);

            loss_sum += lg.loss;
            stats.last_batch_loss = lg.loss;
        } catch (const NumericError& e) {
            throw NumericError("detector batch " + std::to_string(bi) + ": " + e.what());
        }
    }
    stats.batches = batches.size();
    stats.mean_loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    return stats;
}

namespace {

struct TrainSetup {
    std::optional<NormStats> norm;
    std::vector<WindowBatch> batches;
    ReconstructorModel r;
    DetectorModel d;
    AdamState opt_r;
    AdamState opt_d;
};

TrainSetup prepare(const TimeSeries& train, const TrainConfig& cfg) {
    cfg.validate();
    if (train.labels) {
        throw ValidationError("training series must be unlabeled (unsupervised contract)");
    }

    TrainSetup setup;
    TimeSeries prepared = train;
    if (cfg.normalize_input) {
        setup.norm = fit_norm(train);
        prepared = normalize(train, *setup.norm);
    }

    WindowBatch all = make_windows(prepared, cfg.window_len, cfg.effective_stride());
    setup.batches = make_batches(all, cfg.batch_size);

    Rng seeds(cfg.seed);
    setup.r = make_reconstructor(cfg.window_len, cfg.hidden, seeds.bits());
    setup.d = make_detector(cfg.window_len, cfg.hidden, seeds.bits());
    setup.opt_r = AdamState::init(setup.r.net, cfg.optimizer);
    setup.opt_d = AdamState::init(setup.d.net, cfg.optimizer);
    return setup;
}

} // namespace

TrainResult train_cnts(const TimeSeries& train, const TrainConfig& cfg,
                       const TimeSeries* monitor) {
    TrainSetup setup = prepare(train, cfg);
    TrainHistory history;

    for (int stage = 1; stage <= cfg.epochs; ++stage) {
        Clock clock;
        for (int sub = 1; sub <= cfg.r_epochs; ++sub) {
            EpochStats stats;
            try {
                stats = train_reconstructor_epoch(setup.r, setup.d, setup.batches, cfg,
                                                  setup.opt_r);
            } catch (const NumericError& e) {
                throw NumericError("stage " + std::to_string(stage) + " R sub-epoch " +
                                   std::to_string(sub) + ": " + e.what());
            }
            HistoryRecord rec;
            rec.stage = stage;
            rec.phase = 'R';
            rec.sub_epoch = sub;
            rec.loss_r = stats.mean_loss;
            fill_monitor(rec, setup.d, setup.r, monitor, setup.norm);
            history.records.push_back(rec);
        }
        for (int sub = 1; sub <= cfg.d_epochs; ++sub) {
            EpochStats stats;
            try {
                stats = train_detector_epoch(setup.d, setup.r, setup.batches, cfg,
                                             setup.opt_d);
            } catch (const NumericError& e) {
                throw NumericError("stage " + std::to_string(stage) + " D sub-epoch " +
                                   std::to_string(sub) + ": " + e.what());
            }
            HistoryRecord rec;
            rec.stage = stage;
            rec.phase = 'D';
            rec.sub_epoch = sub;
            rec.loss_d = stats.mean_loss;
            fill_monitor(rec, setup.d, setup.r, monitor, setup.norm);
            history.records.push_back(rec);
        }
        history.stage_seconds.push_back(clock.seconds());
    }

    return {std::move(setup.r), std::move(setup.d), std::move(history),
            std::move(setup.norm)};
}

TrainResult train_baseline_reconstructor(const TimeSeries& train, const TrainConfig& cfg,
                                         const TimeSeries* monitor) {
    TrainConfig plain = cfg;
    plain.d_epochs = 0;
    plain.reconstructor_exclude_fraction = 0.0;
    return train_cnts(train, plain, monitor);
}

TrainResult train_baseline_detector(const TimeSeries& train, const TrainConfig& cfg,
                                    const TimeSeries* monitor) {
    // Phase 1: a plain reconstructor, trained to completion.
    TrainResult result = train_baseline_reconstructor(train, cfg, monitor);

    // Phase 2: the detector learns from the frozen reconstructor's errors.
    TrainSetup setup;  // rebuild batches identically; models come from phase 1
    {
        TrainConfig plain = cfg;
        plain.d_epochs = 0;
        plain.reconstructor_exclude_fraction = 0.0;
        setup = prepare(train, plain);
    }
    setup.r = result.reconstructor;
    setup.d = result.detector;  // still at its seeded initialization

    for (int stage = 1; stage <= cfg.epochs; ++stage) {
        Clock clock;
        for (int sub = 1; sub <= cfg.d_epochs; ++sub) {
            EpochStats stats;
            try {
                stats = train_detector_epoch(setup.d, setup.r, setup.batches, cfg,
                                             setup.opt_d);
            } catch (const NumericError& e) {
                throw NumericError("detection-ablation stage " + std::to_string(stage) +
                                   " D sub-epoch " + std::to_string(sub) + ": " + e.what());
            }
            HistoryRecord rec;
            rec.stage = stage;
            rec.phase = 'D';
            rec.sub_epoch = sub;
            rec.loss_d = stats.mean_loss;
            fill_monitor(rec, setup.d, setup.r, monitor, result.norm);
            result.history.records.push_back(rec);
        }
        result.history.stage_seconds.push_back(clock.seconds());
    }

    result.detector = std::move(setup.d);
    return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "stage,phase,sub_epoch,loss_r,loss_d,mse_n,mse_a,dis,f1\n";
    for (const auto& rec : history.records) {
        std::string line = std::to_string(rec.stage);
        line += ',';
        line += rec.phase;
        line += ',';
        line += std::to_string(rec.sub_epoch);
        append_cell(line, rec.loss_r);
        append_cell(line, rec.loss_d);
        append_cell(line, rec.mse_n);
        append_cell(line, rec.mse_a);
        append_cell(line, rec.dis);
        append_cell(line, rec.f1);
        out << line << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

TrainHistory read_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line) ||
        line != "stage,phase,sub_epoch,loss_r,loss_d,mse_n,mse_a,dis,f1") {
        throw ParseError(path + ": unexpected history CSV header");
    }

    TrainHistory history;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ss(line);
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 9) fields.emplace_back();
        if (fields.size() != 9) {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected 9 columns");
        }
        HistoryRecord rec;
        rec.stage = static_cast<int>(parse_cell(fields[0], line_no));
        if (fields[1] != "R" && fields[1] != "D") {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": phase must be R or D");
        }
        rec.phase = fields[1][0];
        rec.sub_epoch = static_cast<int>(parse_cell(fields[2], line_no));
        rec.loss_r = parse_cell(fields[3], line_no);
        rec.loss_d = parse_cell(fields[4], line_no);
        rec.mse_n = parse_cell(fields[5], line_no);
        rec.mse_a = parse_cell(fields[6], line_no);
        rec.dis = parse_cell(fields[7], line_no);
        rec.f1 = parse_cell(fields[8], line_no);
        history.records.push_back(rec);
    }
    return history;
}

} // namespace cnts
