#include "cnts/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cnts/errors.hpp"

namespace cnts {

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

PointScores aggregate_per_point(const Matrix& window_outputs, const WindowBatch& batch,
                                std::size_t n) {
    PointScores out;
    out.scores.assign(n, 0.0);
    out.coverage.assign(n, 0);
    for (std::size_t i = 0; i < batch.count(); ++i) {
        std::size_t origin = batch.origins[i];
        for (std::size_t j = 0; j < batch.window_len(); ++j) {
            out.scores[origin + j] += window_outputs(i, j);
            out.coverage[origin + j] += 1;
        }
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (out.coverage[t] == 0) {
            throw ValidationError("point " + std::to_string(t) +
                                  " covered by no window; use stride <= window length");
        }
        out.scores[t] /= static_cast<double>(out.coverage[t]);
        if (!std::isfinite(out.scores[t])) {
            throw NumericError("non-finite point score at index " + std::to_string(t));
        }
    }
    return out;
}

void require_both_classes(const std::vector<std::uint8_t>& labels, const char* what) {
    bool has_pos = false, has_neg = false;
    for (std::uint8_t y : labels) {
        if (y) has_pos = true;
        else has_neg = true;
    }
    if (!has_pos || !has_neg) {
        throw ValidationError(std::string(what) + ": labels must contain both classes");
    }
}

} // namespace

PointScores point_scores(const DetectorModel& model, const TimeSeries& series,
                         std::size_t l, std::size_t stride) {
    if (series.size() < l) {
        throw ValidationError("series shorter than window length");
    }
    WindowBatch batch = make_windows(series, l, stride);
    return aggregate_per_point(detect(model, batch), batch, series.size());
}

PointScores point_recon_errors(const ReconstructorModel& model, const TimeSeries& series,
                               std::size_t l, std::size_t stride) {
    if (series.size() < l) {
        throw ValidationError("series shorter than window length");
    }
    WindowBatch batch = make_windows(series, l, stride);
    Matrix recon = reconstruct(model, batch);
    for (std::size_t i = 0; i < recon.rows; ++i) {
        for (std::size_t j = 0; j < recon.cols; ++j) {
            double d = batch.windows(i, j) - recon(i, j);
            recon(i, j) = d * d;
        }
    }
    return aggregate_per_point(recon, batch, series.size());
}

std::vector<std::uint8_t> apply_threshold(const std::vector<double>& scores,
                                          double threshold) {
    std::vector<std::uint8_t> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        preds[i] = scores[i] > threshold ? 1 : 0;
    }
    return preds;
}

ConfusionMetrics confusion_metrics(const std::vector<std::uint8_t>& labels,
                                   const std::vector<std::uint8_t>& preds) {
    if (labels.size() != preds.size()) {
        throw ShapeError("confusion_metrics: length mismatch");
    }
    ConfusionMetrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (preds[i] && labels[i]) ++m.tp;
        else if (preds[i] && !labels[i]) ++m.fp;
        else if (!preds[i] && labels[i]) ++m.fn;
        else ++m.tn;
    }
    std::size_t n = labels.size();
    m.acc = n > 0 ? static_cast<double>(m.tp + m.tn) / static_cast<double>(n) : 0.0;
    m.precision = (m.tp + m.fp) > 0
                      ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0
                   ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = f1_from_counts(m.tp, m.fp, m.fn);
    return m;
}

ThresholdSearch best_f1_threshold(const std::vector<double>& scores,
                                  const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("best_f1_threshold: length mismatch");
    }
    require_both_classes(labels, "best_f1_threshold");
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("best_f1_threshold: non-finite score");
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::size_t total_pos = 0;
    for (std::uint8_t y : labels) total_pos += y;

    // Sentinel below the minimum: everything predicted anomalous.
    std::size_t tp = total_pos;
    std::size_t fp = scores.size() - total_pos;
    double best_threshold = scores[order.front()] - 1.0;
    double best_f1 = f1_from_counts(tp, fp, total_pos - tp);

    // Ascending sweep; at threshold v, predictions are score > v, so every
    // element with score <= v has dropped out of the positive set.
    std::size_t idx = 0;
    while (idx < order.size()) {
        double v = scores[order[idx]];
        while (idx < order.size() && scores[order[idx]] == v) {
            if (labels[order[idx]]) --tp;
            else --fp;
            ++idx;
        }
        double f1 = f1_from_counts(tp, fp, total_pos - tp);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_threshold = v;
        }
    }

    ThresholdSearch result;
    result.threshold = best_threshold;
    result.report = confusion_metrics(labels, apply_threshold(scores, best_threshold));
    result.f1 = result.report.f1;
    return result;
}

double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("auc: length mismatch");
    require_both_classes(labels, "auc");
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("auc: non-finite score");
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank sum of positives with average ranks over tied groups.
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    std::size_t n_neg = scores.size() - n_pos;
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::pair<double, double> mse_split(const std::vector<double>& point_errors,
                                    const std::vector<std::uint8_t>& labels) {
    if (point_errors.size() != labels.size()) throw ShapeError("mse_split: length mismatch");
    require_both_classes(labels, "mse_split");

    double sum_n = 0.0, sum_a = 0.0;
    std::size_t cnt_n = 0, cnt_a = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) {
            sum_a += point_errors[i];
            ++cnt_a;
        } else {
            sum_n += point_errors[i];
            ++cnt_n;
        }
    }
    return {sum_n / static_cast<double>(cnt_n), sum_a / static_cast<double>(cnt_a)};
}

double dis(double mse_n, double mse_a) {
    if (!(mse_n > 0.0)) throw ValidationError("dis: mse_n must be positive");
    return (mse_a - mse_n) / mse_n;
}

EvalReport evaluate(const DetectorModel& detector, const ReconstructorModel& reconstructor,
                    const TimeSeries& test, const std::optional<NormStats>& norm) {
    if (!test.labels) {
        throw ValidationError("evaluate: test series must be labeled");
    }
    if (detector.window_len != reconstructor.window_len) {
        throw ShapeError("evaluate: detector and reconstructor window lengths differ");
    }

    const TimeSeries prepared = norm ? normalize(test, *norm) : test;
    const std::size_t l = detector.window_len;
    const auto& labels = *test.labels;

    PointScores scores = point_scores(detector, prepared, l, 1);
    PointScores errors = point_recon_errors(reconstructor, prepared, l, 1);

    ThresholdSearch th = best_f1_threshold(scores.scores, labels);
    auto [mse_n, mse_a] = mse_split(errors.scores, labels);

    EvalReport report;
    report.series = test.name;
    report.acc = th.report.acc;
    report.precision = th.report.precision;
    report.recall = th.report.recall;
    report.f1 = th.report.f1;
    report.auc = auc(scores.scores, labels);
    report.threshold = th.threshold;
    report.tp = th.report.tp;
    report.fp = th.report.fp;
    report.fn = th.report.fn;
    report.tn = th.report.tn;
    report.mse_n = mse_n;
    report.mse_a = mse_a;
    report.dis = dis(mse_n, mse_a);
    return report;
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::json j{
        {"series", r.series},   {"acc", r.acc},
        {"precision", r.precision}, {"recall", r.recall},
        {"f1", r.f1},           {"auc", r.auc},
        {"threshold", r.threshold},
        {"tp", r.tp},           {"fp", r.fp},
        {"fn", r.fn},           {"tn", r.tn},
        {"mse_n", r.mse_n},     {"mse_a", r.mse_a},
        {"dis", r.dis},
    };
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    EvalReport r;
    try {
        r.series = j.at("series").get<std::string>();
        r.acc = j.at("acc").get<double>();
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.f1 = j.at("f1").get<double>();
        r.auc = j.at("auc").get<double>();
        r.threshold = j.at("threshold").get<double>();
        r.tp = j.at("tp").get<std::size_t>();
        r.fp = j.at("fp").get<std::size_t>();
        r.fn = j.at("fn").get<std::size_t>();
        r.tn = j.at("tn").get<std::size_t>();
        r.mse_n = j.at("mse_n").get<double>();
        r.mse_a = j.at("mse_a").get<double>();
        r.dis = j.at("dis").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    return r;
}

std::string aggregate_to_json(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ValidationError("aggregate_to_json: no reports");
    double acc = 0.0, f1 = 0.0, auc_sum = 0.0;
    nlohmann::json names = nlohmann::json::array();
    for (const auto& r : reports) {
        acc += r.acc;
        f1 += r.f1;
        auc_sum += r.auc;
        names.push_back(r.series);
    }
    double n = static_cast<double>(reports.size());
    nlohmann::json j{
        {"series_count", reports.size()},
        {"series", names},
        {"mean_acc", acc / n},
        {"mean_f1", f1 / n},
        {"mean_auc", auc_sum / n},
    };
    return j.dump(2);
}

} // namespace cnts
