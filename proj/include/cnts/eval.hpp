#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnts/data.hpp"
#include "cnts/models.hpp"

namespace cnts {

/// Per-point aggregation of window outputs: each point's value is the
/// arithmetic mean over all windows covering it.
struct PointScores {
    std::vector<double> scores;
    std::vector<std::size_t> coverage;
};

/// Detector scores per point (mean over covering windows).
PointScores point_scores(const DetectorModel& model, const TimeSeries& series,
                         std::size_t l, std::size_t stride);

/// Squared reconstruction error per point (mean over covering windows).
PointScores point_recon_errors(const ReconstructorModel& model, const TimeSeries& series,
                               std::size_t l, std::size_t stride);

/// s_i = 1 iff score_i > threshold (strict).
std::vector<std::uint8_t> apply_threshold(const std::vector<double>& scores,
                                          double threshold);

struct ConfusionMetrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double acc = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Counts plus accuracy/precision/recall/F1. Degenerate cases follow the
/// zero convention: precision=0 when tp+fp=0, recall=0 when tp+fn=0,
/// f1=0 when precision+recall=0.
ConfusionMetrics confusion_metrics(const std::vector<std::uint8_t>& labels,
                                   const std::vector<std::uint8_t>& preds);

struct ThresholdSearch {
    double threshold = 0.0;
    double f1 = 0.0;
    ConfusionMetrics report;
};

/// Exhaustive F1-max sweep over candidate thresholds (the observed unique
/// scores plus one sentinel below the minimum). Ties break toward the
/// smaller threshold. O(n log n) via sorted cumulative counts.
ThresholdSearch best_f1_threshold(const std::vector<double>& scores,
                                  const std::vector<std::uint8_t>& labels);

/// ROC AUC as the Mann-Whitney statistic (rank sums, average ranks on ties).
double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Mean reconstruction error over normal (label 0) and abnormal (label 1)
/// points: returns (mse_n, mse_a). Both classes must be present.
std::pair<double, double> mse_split(const std::vector<double>& point_errors,
                                    const std::vector<std::uint8_t>& labels);

/// Relative separation (mse_a - mse_n) / mse_n.
double dis(double mse_n, double mse_a);

/// Adjustment-free per-series scoring result.
struct EvalReport {
    std::string series;
    double acc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    double threshold = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double mse_n = 0.0;
    double mse_a = 0.0;
    double dis = 0.0;
};

/// Full protocol for one labeled test series: detector scores per point
/// (stride 1 plus the tail window), F1-max threshold, confusion metrics and
/// AUC; reconstruction errors split into mse_n/mse_a and Dis. No anomaly
/// adjustment of any kind. The series is normalized with the supplied
/// training stats before touching either model.
EvalReport evaluate(const DetectorModel& detector, const ReconstructorModel& reconstructor,
                    const TimeSeries& test, const std::optional<NormStats>& norm);

/// JSON text with exactly the EvalReport fields.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// Dataset-level aggregate: arithmetic mean of acc/f1/auc across series.
std::string aggregate_to_json(const std::vector<EvalReport>& reports);

} // namespace cnts
