#pragma once

#include <string>
#include <vector>

#include "tsattack/tensor.hpp"

namespace tsattack {

// Multivariate series and stride-1 sliding-window sampling.
//
// Index conventions, used consistently everywhere downstream:
//   - timestamps t are 1-based over the full series; a partition starting at
//     series row r covers timestamps r+1 .. r+rows
//   - sample n's input covers timestamps n .. n+L-1, its target n+L .. n+L+H-1
//   - the first sample index of a windowed partition equals its first
//     timestamp (tau), the last sample index is tau + count - 1
//   - within-window offsets l are 1-based, so timestamp = sample + l - 1

struct RawSeries {
    long rows = 0;  // T
    long cols = 0;  // D
    long offset = 0;  // 0-based row index of this partition in the full series
    std::vector<double> values;  // row-major rows x cols
    std::vector<std::string> variable_names;
    std::vector<std::string> timestamps;  // optional labels, empty or size rows

    double at(long r, long c) const { return values[r * cols + c]; }
    double& at(long r, long c) { return values[r * cols + c]; }
};

struct CsvOptions {
    bool date_column = false;  // first column holds timestamp labels
};

// Reads a comma-separated file: first row header, one column per variable.
// Every data cell must parse as a finite number; constant columns are
// rejected.
RawSeries ingest_csv(const std::string& path, const CsvOptions& options = {});

void write_csv(const RawSeries& series, const std::string& path);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population std, strictly positive
};

// Per-variable statistics; call on the training partition only.
NormStats compute_stats(const RawSeries& train);
RawSeries normalize(const RawSeries& series, const NormStats& stats);
RawSeries denormalize(const RawSeries& series, const NormStats& stats);

struct WindowSpec {
    long lookback = 48;  // L
    long horizon = 24;   // H
    // stride is fixed at 1
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct Split {
    RawSeries train, val, test;
    bool val_usable = false;   // long enough to window
    bool test_usable = false;
};

// Contiguous chronological partitions. A partition with a positive ratio must
// be windowable (length >= L + H); zero-ratio partitions come back empty and
// flagged unusable.
Split split(const RawSeries& series, const SplitRatios& ratios, const WindowSpec& spec);

struct OverlapEntry {
    long sample;  // i
    long offset;  // l, 1-based within the window
};

// All (sample, offset) pairs whose input window contains timestamp t, for
// samples tau..last_sample with lookback L. Ordered by ascending sample.
std::vector<OverlapEntry> overlap_set(long t, long tau, long last_sample,
                                      long lookback);

class WindowedDataset {
public:
    WindowedDataset(RawSeries partition, WindowSpec spec);

    long sample_count() const { return count_; }
    long first_sample() const { return tau_; }                    // tau
    long last_sample() const { return tau_ + count_ - 1; }        // N
    long first_timestamp() const { return tau_; }
    long last_input_timestamp() const { return last_sample() + spec_.lookback - 1; }

    long lookback() const { return spec_.lookback; }
    long horizon() const { return spec_.horizon; }
    long dim() const { return series_.cols; }
    const WindowSpec& spec() const { return spec_; }
    const RawSeries& series() const { return series_; }

    Tensor input(long n) const;   // L x D
    Tensor target(long n) const;  // H x D

    // Observation vector at timestamp t (D values).
    const double* row(long t) const;
    double value(long t, long d) const { return row(t)[d]; }

    std::vector<OverlapEntry> overlaps(long t) const {
        return overlap_set(t, first_sample(), last_sample(), spec_.lookback);
    }

private:
    RawSeries series_;
    WindowSpec spec_;
    long tau_ = 0;
    long count_ = 0;
};

WindowedDataset build_windows(const RawSeries& partition, const WindowSpec& spec);

}  // namespace tsattack
