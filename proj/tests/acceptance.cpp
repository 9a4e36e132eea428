// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cnts/data.hpp"
#include "cnts/errors.hpp"
#include "cnts/eval.hpp"
#include "cnts/models.hpp"
#include "cnts/numerics.hpp"
#include "cnts/trainer.hpp"

using namespace cnts;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& text) {
        if (!detail.empty()) detail += "; ";
        detail += text;
    }
};

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// ---- shared oracles (independent of the library implementation paths) ----

std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x, double eps) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double saved = x[i];
        x[i] = saved + eps;
        double up = f(x);
        x[i] = saved - eps;
        double down = f(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double max_rel_dev(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) /
                                    std::max({std::abs(a[i]), std::abs(b[i]), 1e-8}));
    }
    return worst;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// The training configuration pinned for the synthetic-benchmark experiments.
TrainConfig benchmark_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.r_epochs = 3;
    cfg.d_epochs = 3;
    cfg.window_len = 32;
    cfg.train_stride = 2;
    cfg.batch_size = 32;
    cfg.hidden = {64, 32};
    cfg.optimizer.step_size = 2e-3;
    cfg.seed = seed;
    return cfg;
}

// ---- criterion 1: gradient correctness ------------------------------------

Criterion criterion_gradients() {
    Criterion c;
    Timer timer;

    // backward vs central finite differences through grad_check.
    const std::vector<std::vector<std::size_t>> dims = {{4, 3}, {5, 8, 4}, {6, 10, 8, 5}};
    const Activation acts[] = {Activation::Relu, Activation::Tanh, Activation::Identity};
    int checked = 0;
    std::uint64_t seed = 100;
    while (checked < 12) {
        ++seed;
        const auto& d = dims[checked % dims.size()];
        Activation act = acts[checked % 3];
        DenseNet net = init_params(d, std::vector<Activation>(d.size() - 1, act), seed);
        Rng rng(seed ^ 0x5EED);
        Matrix input(2, d.front());
        for (double& x : input.data) x = rng.uniform(-1.5, 1.5);

        // Stay clear of relu kinks where finite differences are undefined.
        ForwardTrace trace = forward(net, input);
        bool safe = true;
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            if (net.layers[k].act != Activation::Relu) continue;
            for (double z : trace.pre_acts[k].data) {
                if (std::abs(z) < 1e-3) safe = false;
            }
        }
        if (!safe) continue;

        double dev = grad_check(
            net, input,
            [](const Matrix& out) {
                LossEval e;
                e.output_grad = out;
                for (double v : out.data) e.value += 0.5 * v * v;
                return e;
            },
            1e-4);
        c.require(dev <= 1e-4, "backward dev " + fmt("%.2e", dev));
        ++checked;
    }

    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 10 + trial;
        auto e_r = random_vector(rng, n, 0.0, 5.0);
        auto scores = random_vector(rng, n, -2.0, 2.0);
        LossGrad lg = detector_loss(e_r, scores, 0.4);
        auto numeric = fd_grad(
            [&](const std::vector<double>& s) { return detector_loss(e_r, s, 0.4).loss; },
            scores, 1e-5);
        double dev = max_rel_dev(lg.grad, numeric);
        c.require(dev <= 1e-4, "detector_loss dev " + fmt("%.2e", dev));

        auto windows = random_vector(rng, n, -1.0, 1.0);
        auto recon = random_vector(rng, n, -1.0, 1.0);
        LossGrad rl = reconstructor_loss(windows, recon, e_r, 0.2);
        auto rnumeric = fd_grad(
            [&](const std::vector<double>& rec) {
                return reconstructor_loss(windows, rec, e_r, 0.2).loss;
            },
            recon, 1e-6);
        double rdev = max_rel_dev(rl.grad, rnumeric);
        c.require(rdev <= 1e-4, "reconstructor_loss dev " + fmt("%.2e", rdev));

        auto target = softmax(random_vector(rng, n, -2.0, 2.0));
        auto logits = random_vector(rng, n, -3.0, 3.0);
        auto predicted = softmax(logits);
        std::vector<double> analytic(n);
        for (std::size_t i = 0; i < n; ++i) analytic[i] = predicted[i] - target[i];
        auto cnumeric = fd_grad(
            [&](const std::vector<double>& z) { return cross_entropy(target, z); },
            logits, 1e-5);
        double cdev = max_rel_dev(analytic, cnumeric);
        c.require(cdev <= 1e-4, "cross_entropy dev " + fmt("%.2e", cdev));
    }

    double secs = timer.seconds();
    c.require(secs < 10.0, "runtime " + fmt("%.1f", secs) + "s >= 10s");
    c.note(fmt("%.1f", secs) + "s");
    return c;
}

// ---- criterion 2: metric oracles ------------------------------------------

Criterion criterion_metrics() {
    Criterion c;
    Timer timer;
    Rng rng(31337);

    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 4 + static_cast<std::size_t>(rng.uniform(0.0, 196.0));
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::floor(rng.uniform(0.0, 16.0)) / 4.0;  // quantized: forces ties
            labels[i] = rng.uniform() < 0.35 ? 1 : 0;
        }
        labels[0] = 1;
        labels[1] = 0;

        // Naive threshold sweep straight from the definitions.
        std::set<double> candidates(scores.begin(), scores.end());
        double best_threshold = *candidates.begin() - 1.0;
        candidates.insert(best_threshold);
        double best_f1 = -1.0;
        std::size_t best_tp = 0, best_fp = 0, best_fn = 0, best_tn = 0;
        for (double cand : candidates) {
            std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                bool pred = scores[i] > cand;
                if (pred && labels[i]) ++tp;
                else if (pred && !labels[i]) ++fp;
                else if (!pred && labels[i]) ++fn;
                else ++tn;
            }
            double precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
            double recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
            double f1 = (precision + recall) > 0.0
                            ? 2.0 * precision * recall / (precision + recall)
                            : 0.0;
            if (f1 > best_f1) {
                best_f1 = f1;
                best_threshold = cand;
                best_tp = tp;
                best_fp = fp;
                best_fn = fn;
                best_tn = tn;
            }
        }

        ThresholdSearch fast = best_f1_threshold(scores, labels);
        c.require(fast.threshold == best_threshold, "threshold mismatch");
        c.require(fast.f1 == best_f1, "f1 mismatch");
        c.require(fast.report.tp == best_tp && fast.report.fp == best_fp &&
                      fast.report.fn == best_fn && fast.report.tn == best_tn,
                  "count mismatch");

        // confusion_metrics against direct counting at a fixed threshold.
        auto preds = apply_threshold(scores, 2.0);
        ConfusionMetrics m = confusion_metrics(labels, preds);
        {
            std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (preds[i] && labels[i]) ++tp;
                else if (preds[i] && !labels[i]) ++fp;
                else if (!preds[i] && labels[i]) ++fn;
                else ++tn;
            }
            double precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
            double recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
            double f1 = (precision + recall) > 0.0
                            ? 2.0 * precision * recall / (precision + recall)
                            : 0.0;
            c.require(m.tp == tp && m.fp == fp && m.fn == fn && m.tn == tn,
                      "confusion counts");
            c.require(m.precision == precision && m.recall == recall && m.f1 == f1,
                      "confusion formulas");
            c.require(m.acc == double(tp + tn) / double(n), "accuracy formula");
        }

        // AUC against pair counting.
        double wins = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!labels[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j]) continue;
                ++pairs;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        double auc_oracle = wins / double(pairs);
        c.require(std::abs(auc(scores, labels) - auc_oracle) <= 1e-12,
                  "auc dev > 1e-12");

        // mse_split against a masked mean.
        auto errors = random_vector(rng, n, 0.0, 3.0);
        auto [mse_n, mse_a] = mse_split(errors, labels);
        double sum_n = 0.0, sum_a = 0.0;
        std::size_t cnt_n = 0, cnt_a = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i]) {
                sum_a += errors[i];
                ++cnt_a;
            } else {
                sum_n += errors[i];
                ++cnt_n;
            }
        }
        c.require(mse_n == sum_n / double(cnt_n) && mse_a == sum_a / double(cnt_a),
                  "mse_split mismatch");
    }

    double secs = timer.seconds();
    c.require(secs < 10.0, "runtime " + fmt("%.1f", secs) + "s >= 10s");
    c.note("100 instances, " + fmt("%.1f", secs) + "s");
    return c;
}

// ---- criterion 3: selection oracle ----------------------------------------

Criterion criterion_selection() {
    Criterion c;
    Timer timer;
    Rng rng(777);

    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(0.0, 60.0));
        std::vector<double> values(n);
        for (double& v : values) v = std::floor(rng.uniform(0.0, 8.0));
        double fraction = rng.uniform(0.02, 1.0);

        SelectionMask mask = select_top_fraction(values, fraction);
        std::size_t k = static_cast<std::size_t>(std::ceil(fraction * double(n)));
        k = std::min(std::max<std::size_t>(k, 1), n);
        c.require(mask.indices.size() == k, "mask size");

        std::vector<bool> in_mask(n, false);
        for (std::size_t idx : mask.indices) in_mask[idx] = true;
        for (std::size_t i = 0; i < n; ++i) {
            // Membership predicate: beaten by fewer than k elements, where a
            // tie at a lower index also beats (the stated tie-break).
            std::size_t beaten = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (values[j] > values[i] || (values[j] == values[i] && j < i)) ++beaten;
            }
            c.require(in_mask[i] == (beaten < k), "membership/tie-break");
        }
    }

    double secs = timer.seconds();
    c.require(secs < 5.0, "runtime " + fmt("%.1f", secs) + "s >= 5s");
    c.note("1000 instances, " + fmt("%.1f", secs) + "s");
    return c;
}

// ---- criterion 4: Algorithm-1 contracts -----------------------------------

Criterion criterion_algorithm_contracts() {
    Criterion c;
    Timer timer;

    BenchmarkSpec spec;
    spec.length = 1000;
    BenchmarkPair pair = make_benchmark(spec, 99);
    TrainConfig cfg = benchmark_config(99);
    cfg.epochs = 3;

    // Frozen-partner bit-identity, phase by phase.
    {
        NormStats stats = fit_norm(pair.train);
        WindowBatch all =
            make_windows(normalize(pair.train, stats), cfg.window_len, cfg.train_stride);
        auto batches = make_batches(all, cfg.batch_size);
        auto r = make_reconstructor(cfg.window_len, cfg.hidden, 1);
        auto d = make_detector(cfg.window_len, cfg.hidden, 2);
        AdamState opt_r = AdamState::init(r.net, cfg.optimizer);
        AdamState opt_d = AdamState::init(d.net, cfg.optimizer);
        for (int phase = 0; phase < 3; ++phase) {
            std::uint64_t d_digest = param_digest(d.net);
            train_reconstructor_epoch(r, d, batches, cfg, opt_r);
            c.require(param_digest(d.net) == d_digest, "D moved during R phase");
            std::uint64_t r_digest = param_digest(r.net);
            train_detector_epoch(d, r, batches, cfg, opt_d);
            c.require(param_digest(r.net) == r_digest, "R moved during D phase");
        }
    }

    // History length law.
    {
        TrainResult run = train_cnts(pair.train, cfg);
        c.require(run.history.records.size() ==
                      std::size_t(cfg.epochs) * std::size_t(cfg.r_epochs + cfg.d_epochs),
                  "history length");
    }

    // Reduction law: exclude=0 and d_epochs=0 is exactly the plain-MSE run.
    {
        TrainConfig reduced = cfg;
        reduced.d_epochs = 0;
        reduced.reconstructor_exclude_fraction = 0.0;
        TrainResult lib = train_cnts(pair.train, reduced);

        NormStats stats = fit_norm(pair.train);
        WindowBatch all = make_windows(normalize(pair.train, stats), reduced.window_len,
                                       reduced.effective_stride());
        auto batches = make_batches(all, reduced.batch_size);
        Rng seeds(reduced.seed);
        auto r = make_reconstructor(reduced.window_len, reduced.hidden, seeds.bits());
        AdamState opt = AdamState::init(r.net, reduced.optimizer);
        for (int e = 0; e < reduced.epochs * reduced.r_epochs; ++e) {
            for (const auto& batch : batches) {
                ForwardTrace trace = forward(r.net, batch.windows);
                const Matrix& out = trace.output();
                Matrix grad(out.rows, out.cols);
                double inv_n = 1.0 / double(out.data.size());
                for (std::size_t i = 0; i < out.data.size(); ++i) {
                    grad.data[i] = 2.0 * (out.data[i] - batch.windows.data[i]) * inv_n;
                }
                adam_step(r.net, backward(r.net, trace, grad), opt);
            }
        }
        c.require(param_digest(lib.reconstructor.net) == param_digest(r.net),
                  "reduction law digest");
    }

    // Same-seed bit-determinism of the full cooperative run.
    {
        TrainResult a = train_cnts(pair.train, cfg);
        TrainResult b = train_cnts(pair.train, cfg);
        c.require(param_digest(a.reconstructor.net) == param_digest(b.reconstructor.net),
                  "R determinism");
        c.require(param_digest(a.detector.net) == param_digest(b.detector.net),
                  "D determinism");
        bool history_equal = a.history.records.size() == b.history.records.size();
        for (std::size_t i = 0; history_equal && i < a.history.records.size(); ++i) {
            const auto& x = a.history.records[i];
            const auto& y = b.history.records[i];
            auto same = [](double u, double v) {
                return (std::isnan(u) && std::isnan(v)) || u == v;
            };
            history_equal = x.stage == y.stage && x.phase == y.phase &&
                            x.sub_epoch == y.sub_epoch && same(x.loss_r, y.loss_r) &&
                            same(x.loss_d, y.loss_d);
        }
        c.require(history_equal, "history determinism");
    }

    double secs = timer.seconds();
    c.require(secs < 60.0, "runtime " + fmt("%.1f", secs) + "s >= 60s");
    c.note(fmt("%.1f", secs) + "s");
    return c;
}

// ---- criterion 5: cooperation ordering ------------------------------------

Criterion criterion_cooperation() {
    Criterion c;
    Timer timer;

    int f1_high = 0, f1_order = 0, dis_order = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        BenchmarkPair pair = default_benchmark(seed);
        TrainConfig cfg = benchmark_config(seed);

        TrainResult coop = train_cnts(pair.train, cfg);
        TrainResult detection = train_baseline_detector(pair.train, cfg);
        TrainResult plain = train_baseline_reconstructor(pair.train, cfg);

        EvalReport coop_report =
            evaluate(coop.detector, coop.reconstructor, pair.test, coop.norm);
        EvalReport detection_report = evaluate(
            detection.detector, detection.reconstructor, pair.test, detection.norm);

        TimeSeries prepared = plain.norm ? normalize(pair.test, *plain.norm) : pair.test;
        PointScores errors =
            point_recon_errors(plain.reconstructor, prepared, cfg.window_len, 1);
        auto [mse_n, mse_a] = mse_split(errors.scores, *pair.test.labels);
        double plain_dis = dis(mse_n, mse_a);

        if (coop_report.f1 >= 0.8) ++f1_high;
        if (coop_report.f1 > detection_report.f1) ++f1_order;
        if (coop_report.dis > plain_dis) ++dis_order;
        per_seed += fmt(" %.2f", coop_report.f1);
    }

    c.require(f1_high >= 4, "f1>=0.8 on only " + std::to_string(f1_high) + "/5");
    c.require(f1_order >= 4, "cnts>detection on only " + std::to_string(f1_order) + "/5");
    c.require(dis_order >= 4, "dis ordering on only " + std::to_string(dis_order) + "/5");

    double secs = timer.seconds();
    c.require(secs < 300.0, "runtime " + fmt("%.1f", secs) + "s >= 300s");
    c.note("f1:" + per_seed + "; clauses " + std::to_string(f1_high) + "/" +
           std::to_string(f1_order) + "/" + std::to_string(dis_order) + " of 5; " +
           fmt("%.1f", secs) + "s");
    return c;
}

// ---- criterion 6: monotone learning signal --------------------------------

Criterion criterion_monotone() {
    Criterion c;
    Timer timer;

    int monotone_seeds = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TimeSeries sine = synth_series(4000, SynthBase::sine(200.0, 1.0), 0.0, {}, 777);
        sine.labels.reset();
        sine.role = SeriesRole::Train;

        TrainConfig cfg = benchmark_config(seed);
        cfg.epochs = 6;
        cfg.optimizer.step_size = 5e-4;

        TrainResult run = train_cnts(sine, cfg);
        std::vector<double> stage_loss(cfg.epochs, 0.0);
        std::vector<int> counts(cfg.epochs, 0);
        for (const auto& rec : run.history.records) {
            if (rec.phase != 'R') continue;
            stage_loss[rec.stage - 1] += rec.loss_r;
            counts[rec.stage - 1] += 1;
        }
        bool monotone = true;
        for (int s = 0; s < cfg.epochs; ++s) {
            stage_loss[s] /= counts[s];
            if (s >= 1 && stage_loss[s] > stage_loss[s - 1]) monotone = false;
        }
        if (monotone) ++monotone_seeds;
    }

    c.require(monotone_seeds >= 4,
              "monotone on only " + std::to_string(monotone_seeds) + "/5");
    c.note(std::to_string(monotone_seeds) + "/5 seeds, " + fmt("%.1f", timer.seconds()) +
           "s");
    return c;
}

// ---- criterion 7: round-trips and schema ----------------------------------

Criterion criterion_roundtrips() {
    Criterion c;

    fs::path dir = fs::temp_directory_path() / "cnts_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // Checkpoint bit-identity.
    {
        auto r = make_reconstructor(16, {32, 16}, 5);
        auto d = make_detector(16, {32, 16}, 6);
        save_checkpoint(r, (dir / "r.ckpt").string(), "digest");
        save_checkpoint(d, (dir / "d.ckpt").string(), "digest");
        auto r2 = load_reconstructor((dir / "r.ckpt").string());
        auto d2 = load_detector((dir / "d.ckpt").string());
        c.require(param_digest(r2.net) == param_digest(r.net), "R checkpoint identity");
        c.require(param_digest(d2.net) == param_digest(d.net), "D checkpoint identity");
    }

    // Series CSV parse-back.
    {
        BenchmarkPair pair = default_benchmark(3);
        write_series_csv(pair.test, (dir / "series.csv").string());
        TimeSeries back = load_series_csv((dir / "series.csv").string(), SeriesRole::Test);
        bool equal = back.size() == pair.test.size() && back.labels.has_value();
        for (std::size_t i = 0; equal && i < back.size(); ++i) {
            equal = back.values[i] == pair.test.values[i] &&
                    (*back.labels)[i] == (*pair.test.labels)[i];
        }
        c.require(equal, "series CSV round-trip");
    }

    // Report JSON parse-back.
    {
        EvalReport report;
        report.series = "x";
        report.acc = 0.5;
        report.precision = 0.25;
        report.recall = 0.75;
        report.f1 = 0.375;
        report.auc = 0.625;
        report.threshold = 1.5;
        report.tp = 3;
        report.fp = 9;
        report.fn = 1;
        report.tn = 7;
        report.mse_n = 0.125;
        report.mse_a = 2.5;
        report.dis = 19.0;
        EvalReport back = report_from_json(report_to_json(report));
        c.require(back.series == report.series && back.acc == report.acc &&
                      back.f1 == report.f1 && back.auc == report.auc &&
                      back.threshold == report.threshold && back.tp == report.tp &&
                      back.fp == report.fp && back.fn == report.fn &&
                      back.tn == report.tn && back.mse_n == report.mse_n &&
                      back.mse_a == report.mse_a && back.dis == report.dis,
                  "report JSON round-trip");
    }

    // Optional NAB-scale fixture: exact train count when supplied.
    if (const char* nab = std::getenv("CNTS_NAB_TRAIN_CSV"); nab && *nab) {
        TimeSeries series = load_series_csv(nab, SeriesRole::Train);
        c.require(series.size() == 164096,
                  "NAB fixture count " + std::to_string(series.size()) + " != 164096");
        c.note("NAB fixture checked");
    } else {
        c.note("NAB fixture not provided, skipped");
    }

    fs::remove_all(dir);
    return c;
}

} // namespace

int main() {
    struct Entry {
        const char* title;
        Criterion (*run)();
    };
    const Entry entries[] = {
        {"criterion 1: gradient correctness vs finite differences", criterion_gradients},
        {"criterion 2: metric implementations vs brute-force oracles", criterion_metrics},
        {"criterion 3: top-fraction selection vs membership oracle", criterion_selection},
        {"criterion 4: alternating-training contracts", criterion_algorithm_contracts},
        {"criterion 5: cooperation ordering on the synthetic benchmark",
         criterion_cooperation},
        {"criterion 6: monotone reconstruction loss on the noiseless sine",
         criterion_monotone},
        {"criterion 7: round-trips and file schemas", criterion_roundtrips},
    };

    int failures = 0;
    for (const Entry& entry : entries) {
        Criterion result;
        try {
            result = entry.run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] %s%s%s\n", result.pass ? "PASS" : "FAIL", entry.title,
                    result.detail.empty() ? "" : " — ", result.detail.c_str());
        std::fflush(stdout);
        if (!result.pass) ++failures;
    }
    return failures;
}
