#include "cnts/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cnts/errors.hpp"

namespace cnts {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
    }
    return v;
}

double population_std(const std::vector<double>& values, double mean) {
    double acc = 0.0;
    for (double v : values) {
        double d = v - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

} // namespace

TimeSeries load_series_csv(const std::string& path, SeriesRole role) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");

    // Column layout comes from the header.
    std::string header = trim(line);
    int value_col = -1;
    int label_col = -1;
    std::size_t n_cols = 0;
    if (header == "timestamp,value") {
        value_col = 1;
        n_cols = 2;
    } else if (header == "timestamp,value,label") {
        value_col = 1;
        label_col = 2;
        n_cols = 3;
    } else if (header == "value") {
        value_col = 0;
        n_cols = 1;
    } else if (header == "value,label") {
        value_col = 0;
        label_col = 1;
        n_cols = 2;
    } else {
        throw ParseError(path + ": line 1: unrecognized header '" + header + "'");
    }

    TimeSeries series;
    series.name = std::filesystem::path(path).stem().string();
    series.role = role;
    std::vector<std::uint8_t> labels;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != n_cols) {
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(n_cols) + " columns, got " +
                             std::to_string(fields.size()));
        }
        double v;
        try {
            v = parse_double(fields[value_col], line_no);
        } catch (const ParseError& e) {
            throw ParseError(path + ": " + e.what());
        }
        if (!std::isfinite(v)) {
            throw ValidationError(path + ": line " + std::to_string(line_no) +
                                  ": non-finite value");
        }
        series.values.push_back(v);

        if (label_col >= 0) {
            double lv;
            try {
                lv = parse_double(fields[label_col], line_no);
            } catch (const ParseError& e) {
                throw ParseError(path + ": " + e.what());
            }
            if (lv != 0.0 && lv != 1.0) {
                throw ValidationError(path + ": line " + std::to_string(line_no) +
                                      ": label outside {0,1}");
            }
            labels.push_back(lv == 1.0 ? 1 : 0);
        }
    }

    if (series.values.empty()) throw ValidationError(path + ": no data rows");
    if (label_col >= 0) series.labels = std::move(labels);
    return series;
}

void write_series_csv(const TimeSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);

    const bool labeled = series.labels.has_value();
    out << (labeled ? "value,label\n" : "value\n");
    char buf[64];
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", series.values[i]);
        out << buf;
        if (labeled) out << ',' << static_cast<int>((*series.labels)[i]);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<std::size_t, std::size_t>> load_ranges_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || trim(line) != "start,end") {
        throw ParseError(path + ": line 1: expected header 'start,end'");
    }

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected 2 columns");
        }
        double s = parse_double(fields[0], line_no);
        double e = parse_double(fields[1], line_no);
        if (s < 0 || e < 0 || s != std::floor(s) || e != std::floor(e)) {
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": indices must be non-negative integers");
        }
        ranges.emplace_back(static_cast<std::size_t>(s), static_cast<std::size_t>(e));
    }
    return ranges;
}

std::vector<std::uint8_t> labels_from_ranges(
    const std::vector<std::pair<std::size_t, std::size_t>>& ranges, std::size_t n) {
    std::vector<std::uint8_t> labels(n, 0);
    for (const auto& [start, end] : ranges) {
        if (start > end || end >= n) {
            throw ValidationError("range [" + std::to_string(start) + "," +
                                  std::to_string(end) + "] out of bounds for n=" +
                                  std::to_string(n));
        }
        for (std::size_t i = start; i <= end; ++i) labels[i] = 1;
    }
    return labels;
}

NormStats fit_norm(const TimeSeries& train) {
    if (train.size() < 2) throw ValidationError("fit_norm: series too short");
    double mean = 0.0;
    for (double v : train.values) mean += v;
    mean /= static_cast<double>(train.size());
    double std = population_std(train.values, mean);
    if (std <= 1e-12) throw ValidationError("fit_norm: constant series");
    return {mean, std};
}

TimeSeries normalize(const TimeSeries& series, const NormStats& stats) {
    TimeSeries out = series;
    for (double& v : out.values) v = (v - stats.mean) / stats.std;
    return out;
}

TimeSeries denormalize(const TimeSeries& series, const NormStats& stats) {
    TimeSeries out = series;
    for (double& v : out.values) v = v * stats.std + stats.mean;
    return out;
}

WindowBatch make_windows(const TimeSeries& series, std::size_t l, std::size_t stride) {
    const std::size_t n = series.size();
    if (l < 1) throw ValidationError("make_windows: window length must be >= 1");
    if (l > n) {
        throw ValidationError("make_windows: window length " + std::to_string(l) +
                              " exceeds series length " + std::to_string(n));
    }
    if (stride < 1) throw ValidationError("make_windows: stride must be >= 1");

    std::vector<std::size_t> origins;
    for (std::size_t o = 0; o + l <= n; o += stride) origins.push_back(o);
    // Tail rule: cover trailing points the stride grid skipped.
    if (origins.back() != n - l) origins.push_back(n - l);

    WindowBatch batch;
    batch.stride = stride;
    batch.origins = origins;
    batch.windows = Matrix(origins.size(), l);
    for (std::size_t i = 0; i < origins.size(); ++i) {
        for (std::size_t j = 0; j < l; ++j) {
            batch.windows(i, j) = series.values[origins[i] + j];
        }
    }
    return batch;
}

TimeSeries synth_series(std::size_t length, const SynthBase& base, double noise_std,
                        const std::vector<AnomalySpec>& anomalies, std::uint64_t seed) {
    auto sorted = anomalies;
    std::sort(sorted.begin(), sorted.end(),
              [](const AnomalySpec& a, const AnomalySpec& b) { return a.position < b.position; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& a = sorted[i];
        if (a.span < 1 || a.position + a.span > length) {
            throw ValidationError("synth_series: anomaly span out of bounds");
        }
        if (i > 0 && sorted[i - 1].position + sorted[i - 1].span > a.position) {
            throw ValidationError("synth_series: overlapping anomaly spans");
        }
    }

    TimeSeries series;
    series.name = "synth";
    series.values.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
        if (base.kind == SynthBase::Kind::Sine) {
            series.values[t] = base.amplitude *
                               std::sin(2.0 * M_PI * static_cast<double>(t) / base.period);
        } else {
            series.values[t] = base.level;
        }
    }

    double mean = 0.0;
    for (double v : series.values) mean += v;
    mean /= static_cast<double>(length);
    double scale = population_std(series.values, mean);
    if (scale < 1e-9) scale = 1.0;

    Rng rng(seed);
    if (noise_std > 0.0) {
        for (double& v : series.values) v += noise_std * rng.normal();
    }

    std::vector<std::uint8_t> labels(length, 0);
    for (const auto& a : sorted) {
        for (std::size_t i = a.position; i < a.position + a.span; ++i) {
            series.values[i] += a.magnitude * scale;
            labels[i] = 1;
        }
    }
    series.labels = std::move(labels);
    return series;
}

namespace {

// Seeded non-overlapping placement; keeps a small gap between events.
std::vector<AnomalySpec> place_anomalies(const BenchmarkSpec& spec, Rng& rng) {
    std::vector<AnomalySpec> placed;
    auto try_place = [&](std::size_t span, AnomalyKind kind, double magnitude) {
        constexpr std::size_t gap = 8;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            std::size_t lo = gap;
            std::size_t hi = spec.length - span - gap;
            std::size_t pos = lo + static_cast<std::size_t>(rng.uniform() *
                                                            static_cast<double>(hi - lo));
            bool clear = true;
            for (const auto& other : placed) {
                std::size_t a0 = pos > gap ? pos - gap : 0;
                std::size_t a1 = pos + span + gap;
                if (other.position < a1 && a0 < other.position + other.span) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                placed.push_back({pos, span, kind, magnitude});
                return;
            }
        }
        throw ValidationError("make_benchmark: could not place anomalies without overlap");
    };

    for (std::size_t i = 0; i < spec.n_spikes; ++i) {
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        try_place(1, AnomalyKind::Spike, sign * spec.spike_magnitude);
    }
    for (std::size_t i = 0; i < spec.n_shifts; ++i) {
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        try_place(spec.shift_span, AnomalyKind::LevelShift, sign * spec.shift_magnitude);
    }
    return placed;
}

} // namespace

BenchmarkPair make_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    const SynthBase base = SynthBase::sine(spec.period, spec.amplitude);

    auto train_anomalies = place_anomalies(spec, rng);
    std::uint64_t train_seed = rng.bits();
    auto test_anomalies = place_anomalies(spec, rng);
    std::uint64_t test_seed = rng.bits();

    BenchmarkPair pair;
    pair.train = synth_series(spec.length, base, spec.noise_std, train_anomalies, train_seed);
    pair.train.labels.reset();  // unsupervised: the trainer never sees labels
    pair.train.role = SeriesRole::Train;
    pair.train.name = "synth-train";

    pair.test = synth_series(spec.length, base, spec.noise_std, test_anomalies, test_seed);
    pair.test.role = SeriesRole::Test;
    pair.test.name = "synth-test";
    return pair;
}

BenchmarkPair default_benchmark(std::uint64_t seed) {
    return make_benchmark(BenchmarkSpec{}, seed);
}

} // namespace cnts
