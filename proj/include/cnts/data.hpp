#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnts/numerics.hpp"

namespace cnts {

enum class SeriesRole { Train, Test };

/// Univariate real-valued series with optional per-point {0,1} labels.
/// Train-role series fed to trainers must carry no labels.
struct TimeSeries {
    std::string name;
    std::vector<double> values;
    std::optional<std::vector<std::uint8_t>> labels;
    SeriesRole role = SeriesRole::Train;

    std::size_t size() const { return values.size(); }
};

/// z-score statistics fitted on training values (population std).
struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

/// Overlapping length-l windows cut from one series. Row i of `windows` is
/// values[origins[i] .. origins[i]+l-1], bit-exact.
struct WindowBatch {
    Matrix windows;
    std::vector<std::size_t> origins;
    std::size_t stride = 1;

    std::size_t count() const { return windows.rows; }
    std::size_t window_len() const { return windows.cols; }
};

/// Reads a series CSV. Accepted headers: `timestamp,value`,
/// `timestamp,value,label`, `value` or `value,label`. Labels must be 0 or 1.
TimeSeries load_series_csv(const std::string& path, SeriesRole role);

/// Writes the canonical series CSV (`value` or `value,label` header).
void write_series_csv(const TimeSeries& series, const std::string& path);

/// Reads a ranges CSV (`start,end` header, inclusive zero-based indices).
std::vector<std::pair<std::size_t, std::size_t>> load_ranges_csv(const std::string& path);

/// Expands inclusive index ranges into a per-point {0,1} sequence of length n.
/// Overlaps are allowed; out-of-bounds ranges are rejected.
std::vector<std::uint8_t> labels_from_ranges(
    const std::vector<std::pair<std::size_t, std::size_t>>& ranges, std::size_t n);

/// Fits z-score stats on a training series. Constant series are rejected.
NormStats fit_norm(const TimeSeries& train);

/// Applies (x - mean) / std. Test series are always normalized with the
/// training stats.
TimeSeries normalize(const TimeSeries& series, const NormStats& stats);

/// Inverse of normalize.
TimeSeries denormalize(const TimeSeries& series, const NormStats& stats);

/// Cuts sliding windows: origins 0, stride, 2*stride, ... while origin+l <= N,
/// plus one tail window at N-l when the regular grid leaves trailing points
/// uncovered. With stride <= l every index is covered by at least one window.
WindowBatch make_windows(const TimeSeries& series, std::size_t l, std::size_t stride);

/// Base signal for the synthetic generator.
struct SynthBase {
    enum class Kind { Sine, Level };
    Kind kind = Kind::Sine;
    double period = 200.0;    // Sine only
    double amplitude = 1.0;   // Sine only
    double level = 0.0;       // Level only

    static SynthBase sine(double period, double amplitude) {
        return {Kind::Sine, period, amplitude, 0.0};
    }
    static SynthBase constant(double level) {
        return {Kind::Level, 0.0, 0.0, level};
    }
};

enum class AnomalyKind { Spike, LevelShift };

/// One injected anomaly: `magnitude` is in units of the base signal's std
/// (clamped to 1 for flat bases), added over [position, position+span).
struct AnomalySpec {
    std::size_t position = 0;
    std::size_t span = 1;
    AnomalyKind kind = AnomalyKind::Spike;
    double magnitude = 0.0;
};

/// Generates a labeled series: base + gaussian noise + injected anomalies.
/// Deterministic for a fixed seed; labels are 1 exactly on anomaly spans.
/// Overlapping or out-of-bounds spans are rejected.
TimeSeries synth_series(std::size_t length, const SynthBase& base, double noise_std,
                        const std::vector<AnomalySpec>& anomalies, std::uint64_t seed);

/// Shape of the deterministic synthetic benchmark: two independent series of
/// the same process, ~2% anomalous points each (spikes plus level shifts).
/// Magnitudes sit near 3 sigma: squared errors of a few units keep the
/// softmaxed error targets spread across anomalies instead of collapsing onto
/// the single worst point.
struct BenchmarkSpec {
    std::size_t length = 4000;
    double period = 200.0;
    double amplitude = 1.0;
    double noise_std = 0.1;
    std::size_t n_spikes = 24;
    double spike_magnitude = 3.0;
    std::size_t n_shifts = 8;
    std::size_t shift_span = 7;
    double shift_magnitude = 3.0;
};

struct BenchmarkPair {
    TimeSeries train;  // anomalies injected, labels stripped (unsupervised)
    TimeSeries test;   // labeled
};

/// Places the requested anomalies at seeded random non-overlapping positions
/// and generates the train/test pair.
BenchmarkPair make_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

/// make_benchmark with default spec: length 4000/4000, ~2% anomaly rate.
BenchmarkPair default_benchmark(std::uint64_t seed);

} // namespace cnts
