#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cnts/data.hpp"
#include "cnts/eval.hpp"
#include "cnts/models.hpp"
#include "cnts/numerics.hpp"

namespace cnts {

/// All knobs of the alternating training loop.
struct TrainConfig {
    int epochs = 5;        // outer alternating stages
    int r_epochs = 3;      // reconstructor passes per stage
    int d_epochs = 3;      // detector passes per stage
    std::size_t window_len = 64;
    std::size_t train_stride = 0;  // 0 -> window_len / 2
    std::size_t batch_size = 128;
    double detector_select_fraction = 0.20;       // largest errors kept for D
    double reconstructor_exclude_fraction = 0.10; // highest scores dropped for R
    AdamConfig optimizer;
    std::uint64_t seed = 1;
    bool normalize_input = true;
    std::vector<std::size_t> hidden;  // empty -> [4l, 2l]

    std::size_t effective_stride() const {
        return train_stride > 0 ? train_stride : std::max<std::size_t>(1, window_len / 2);
    }
    void validate() const;
};

/// Flat element indices (into a flattened [n*l] batch) kept for a loss.
struct SelectionMask {
    std::vector<std::size_t> indices;  // unique, ascending
    std::size_t source_size = 0;
};

/// Indices of the ceil(fraction*n) largest values; ties broken toward the
/// lower index. fraction must lie in (0, 1].
SelectionMask select_top_fraction(const std::vector<double>& values, double fraction);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // same length as the differentiated input
};

/// Cross-entropy between softmaxed reconstruction errors (targets, constant)
/// and softmaxed scores, over the elements with the largest errors. The
/// gradient is with respect to the scores only and is zero off the mask.
LossGrad detector_loss(const std::vector<double>& recon_errors,
                       const std::vector<double>& scores, double select_fraction);

/// Masked MSE: the exclude_fraction highest-scored elements are dropped, the
/// rest averaged. The gradient is with respect to the reconstruction only and
/// is zero on dropped elements. exclude_fraction 0 is plain MSE.
LossGrad reconstructor_loss(const std::vector<double>& windows,
                            const std::vector<double>& recon,
                            const std::vector<double>& scores, double exclude_fraction);

/// One record per sub-epoch. The monitor columns (mse_n, mse_a, dis, f1) are
/// NaN unless a labeled monitor series was supplied; they never feed back
/// into training.
struct HistoryRecord {
    int stage = 0;       // 1-based outer epoch
    char phase = 'R';    // 'R' or 'D'
    int sub_epoch = 0;   // 1-based within the phase
    double loss_r = std::numeric_limits<double>::quiet_NaN();
    double loss_d = std::numeric_limits<double>::quiet_NaN();
    double mse_n = std::numeric_limits<double>::quiet_NaN();
    double mse_a = std::numeric_limits<double>::quiet_NaN();
    double dis = std::numeric_limits<double>::quiet_NaN();
    double f1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
    std::vector<HistoryRecord> records;
    std::vector<double> stage_seconds;  // wall clock, excluded from determinism
};

/// CSV export: header stage,phase,sub_epoch,loss_r,loss_d,mse_n,mse_a,dis,f1
/// with NaN rendered as an empty cell.
void write_history_csv(const TrainHistory& history, const std::string& path);
TrainHistory read_history_csv(const std::string& path);

struct EpochStats {
    double mean_loss = 0.0;
    double last_batch_loss = 0.0;
    std::size_t batches = 0;
};

/// Splits a window batch into consecutive chunks of at most batch_size rows.
std::vector<WindowBatch> make_batches(const WindowBatch& all, std::size_t batch_size);

/// One reconstructor pass over all batches: forward R, drop the
/// exclude-fraction highest-scored elements (scores from the frozen D),
/// masked-MSE step. D is never touched; when the exclude fraction is zero D
/// is not even evaluated.
EpochStats train_reconstructor_epoch(ReconstructorModel& r, const DetectorModel& d_frozen,
                                     const std::vector<WindowBatch>& batches,
                                     const TrainConfig& cfg, AdamState& opt);

/// One detector pass over all batches: reconstruction errors from the frozen
/// R become soft targets, cross-entropy step on D. R is never touched.
EpochStats train_detector_epoch(DetectorModel& d, const ReconstructorModel& r_frozen,
                                const std::vector<WindowBatch>& batches,
                                const TrainConfig& cfg, AdamState& opt);

struct TrainResult {
    ReconstructorModel reconstructor;
    DetectorModel detector;
    TrainHistory history;
    std::optional<NormStats> norm;
};

/// The full cooperative loop: epochs x (r_epochs reconstructor passes, then
/// d_epochs detector passes), each phase training against the other model
/// frozen. Pure function of (train, cfg); the optional monitor series only
/// fills the history's monitoring columns.
TrainResult train_cnts(const TimeSeries& train, const TrainConfig& cfg,
                       const TimeSeries* monitor = nullptr);

/// Single-reconstructor ablation: plain MSE objective, no detector involved.
/// Step-for-step identical to train_cnts with d_epochs=0 and exclude
/// fraction 0.
TrainResult train_baseline_reconstructor(const TimeSeries& train, const TrainConfig& cfg,
                                         const TimeSeries* monitor = nullptr);

/// Detection ablation: a plain reconstructor is trained to completion first,
/// then the detector trains against its frozen errors. No cooperation.
TrainResult train_baseline_detector(const TimeSeries& train, const TrainConfig& cfg,
                                    const TimeSeries* monitor = nullptr);

} // namespace cnts
