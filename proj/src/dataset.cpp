#include "tsattack/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tsattack {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, long row, long col) {
    std::string s = trim(raw);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw std::runtime_error("csv: non-numeric cell \"" + s + "\" at row " +
                                 std::to_string(row) + ", column " +
                                 std::to_string(col));
    return v;
}

void format_value(char* buf, size_t n, double v) { std::snprintf(buf, n, "%.17g", v); }

void reject_constant_columns(const RawSeries& s) {
    for (long d = 0; d < s.cols; ++d) {
        bool varies = false;
        for (long t = 1; t < s.rows && !varies; ++t)
            varies = s.at(t, d) != s.at(0, d);
        if (!varies)
            throw std::runtime_error("csv: variable \"" + s.variable_names[d] +
                                     "\" is constant");
    }
}

}  // namespace

RawSeries ingest_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
    auto header = split_line(line);
    const size_t first_var = options.date_column ? 1 : 0;
    if (header.size() <= first_var)
        throw std::runtime_error("csv: header has no variable columns in " + path);

    RawSeries s;
    s.cols = static_cast<long>(header.size() - first_var);
    for (size_t i = first_var; i < header.size(); ++i)
        s.variable_names.push_back(trim(header[i]));

    long row = 1;  // header was row 0
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            ++row;
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("csv: row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        if (options.date_column) s.timestamps.push_back(trim(cells[0]));
        for (size_t c = first_var; c < cells.size(); ++c)
            s.values.push_back(parse_cell(cells[c], row, static_cast<long>(c)));
        ++s.rows;
        ++row;
    }
    if (s.rows == 0) throw std::runtime_error("csv: no data rows in " + path);
    reject_constant_columns(s);
    return s;
}

void write_csv(const RawSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    const bool dated = !series.timestamps.empty();
    if (dated) out << "date";
    for (long d = 0; d < series.cols; ++d) {
        if (dated || d) out << ',';
        out << series.variable_names[d];
    }
    out << '\n';
    char buf[32];
    for (long t = 0; t < series.rows; ++t) {
        if (dated) out << series.timestamps[t];
        for (long d = 0; d < series.cols; ++d) {
            if (dated || d) out << ',';
            format_value(buf, sizeof buf, series.at(t, d));
            out << buf;
        }
        out << '\n';
    }
}

NormStats compute_stats(const RawSeries& train) {
    if (train.rows == 0) throw std::runtime_error("stats: empty series");
    NormStats st;
    st.mean.assign(train.cols, 0.0);
    st.stddev.assign(train.cols, 0.0);
    for (long d = 0; d < train.cols; ++d) {
        double m = 0.0;
        for (long t = 0; t < train.rows; ++t) m += train.at(t, d);
        m /= static_cast<double>(train.rows);
        double v = 0.0;
        for (long t = 0; t < train.rows; ++t) {
            double r = train.at(t, d) - m;
            v += r * r;
        }
        v /= static_cast<double>(train.rows);
        st.mean[d] = m;
        st.stddev[d] = std::sqrt(v);
        if (!(st.stddev[d] > 0.0))
            throw std::runtime_error("stats: variable \"" + train.variable_names[d] +
                                     "\" is constant in the training partition");
    }
    return st;
}

RawSeries normalize(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (long t = 0; t < out.rows; ++t)
        for (long d = 0; d < out.cols; ++d)
            out.at(t, d) = (out.at(t, d) - stats.mean[d]) / stats.stddev[d];
    return out;
}

RawSeries denormalize(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (long t = 0; t < out.rows; ++t)
        for (long d = 0; d < out.cols; ++d)
            out.at(t, d) = out.at(t, d) * stats.stddev[d] + stats.mean[d];
    return out;
}

Split split(const RawSeries& series, const SplitRatios& ratios, const WindowSpec& spec) {
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
        throw std::invalid_argument("split: ratios must be non-negative");
    const double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split: ratios sum to " + std::to_string(sum) +
                                    ", expected 1");

    const long T = series.rows;
    long n_train = std::llround(ratios.train * static_cast<double>(T));
    long n_val = std::llround(ratios.val * static_cast<double>(T));
    n_train = std::clamp(n_train, 0L, T);
    n_val = std::clamp(n_val, 0L, T - n_train);
    const long n_test = T - n_train - n_val;

    auto take = [&](long begin, long count) {
        RawSeries part;
        part.rows = count;
        part.cols = series.cols;
        part.offset = series.offset + begin;
        part.variable_names = series.variable_names;
        part.values.assign(series.values.begin() + begin * series.cols,
                           series.values.begin() + (begin + count) * series.cols);
        if (!series.timestamps.empty())
            part.timestamps.assign(series.timestamps.begin() + begin,
                                   series.timestamps.begin() + begin + count);
        return part;
    };

    const long min_rows = spec.lookback + spec.horizon;
    auto check = [&](const char* name, double ratio, long count) {
        if (ratio > 0.0 && count < min_rows)
            throw std::invalid_argument("split: " + std::string(name) + " partition has " +
                                        std::to_string(count) + " rows, minimum is " +
                                        std::to_string(min_rows) + " (L + H)");
    };
    check("train", ratios.train, n_train);
    check("val", ratios.val, n_val);
    check("test", ratios.test, n_test);

    Split out;
    out.train = take(0, n_train);
    out.val = take(n_train, n_val);
    out.test = take(n_train + n_val, n_test);
    out.val_usable = n_val >= min_rows;
    out.test_usable = n_test >= min_rows;
    return out;
}

std::vector<OverlapEntry> overlap_set(long t, long tau, long last_sample, long lookback) {
    if (t < tau || t > last_sample + lookback - 1)
        throw std::out_of_range("overlap_set: timestamp " + std::to_string(t) +
                                " outside [" + std::to_string(tau) + ", " +
                                std::to_string(last_sample + lookback - 1) + "]");
    std::vector<OverlapEntry> out;
    const long lo = std::max(tau, t - lookback + 1);
    const long hi = std::min(last_sample, t);
    out.reserve(static_cast<size_t>(hi - lo + 1));
    for (long i = lo; i <= hi; ++i) out.push_back({i, t - i + 1});
    return out;
}

WindowedDataset::WindowedDataset(RawSeries partition, WindowSpec spec)
    : series_(std::move(partition)), spec_(spec) {
    if (spec_.lookback < 1 || spec_.horizon < 1)
        throw std::invalid_argument("windows: lookback and horizon must be >= 1");
    const long min_rows = spec_.lookback + spec_.horizon;
    if (series_.rows < min_rows)
        throw std::invalid_argument("windows: partition has " +
                                    std::to_string(series_.rows) + " rows, minimum is " +
                                    std::to_string(min_rows) + " (L + H)");
    tau_ = series_.offset + 1;
    count_ = series_.rows - spec_.lookback - spec_.horizon + 1;
}

Tensor WindowedDataset::input(long n) const {
    if (n < first_sample() || n > last_sample())
        throw std::out_of_range("windows: sample " + std::to_string(n) + " outside [" +
                                std::to_string(first_sample()) + ", " +
                                std::to_string(last_sample()) + "]");
    const long r0 = n - tau_;  // local row of timestamp n
    const auto begin = series_.values.begin() + r0 * series_.cols;
    return Tensor::from({spec_.lookback, series_.cols},
                        std::vector<double>(begin, begin + spec_.lookback * series_.cols));
}

Tensor WindowedDataset::target(long n) const {
    if (n < first_sample() || n > last_sample())
        throw std::out_of_range("windows: sample " + std::to_string(n) + " outside [" +
                                std::to_string(first_sample()) + ", " +
                                std::to_string(last_sample()) + "]");
    const long r0 = n - tau_ + spec_.lookback;
    const auto begin = series_.values.begin() + r0 * series_.cols;
    return Tensor::from({spec_.horizon, series_.cols},
                        std::vector<double>(begin, begin + spec_.horizon * series_.cols));
}

const double* WindowedDataset::row(long t) const {
    const long r = t - tau_;
    if (r < 0 || r >= series_.rows)
        throw std::out_of_range("windows: timestamp " + std::to_string(t) +
                                " outside the partition");
    return series_.values.data() + r * series_.cols;
}

WindowedDataset build_windows(const RawSeries& partition, const WindowSpec& spec) {
    return WindowedDataset(partition, spec);
}

}  // namespace tsattack
