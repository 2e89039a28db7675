#include "tsattack/tuap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "tsattack/rng.hpp"

namespace tsattack {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

PerturbationSeries make_series(long tau, long last_sample, long lookback, long dim,
                               double epsilon) {
    if (last_sample < tau) throw std::invalid_argument("series: no samples");
    PerturbationSeries s;
    s.first_t = tau;
    s.last_t = last_sample + lookback - 1;
    s.dim = dim;
    s.lookback = lookback;
    s.epsilon = epsilon;
    s.p.assign(static_cast<size_t>(s.timestamps() * dim), 0.0);
    s.w.assign(s.p.size(), 0.0);
    return s;
}

Tensor slice(const PerturbationSeries& series, long n) {
    if (n < series.first_sample() || n > series.last_sample())
        throw std::out_of_range("slice: sample " + std::to_string(n) + " outside [" +
                                std::to_string(series.first_sample()) + ", " +
                                std::to_string(series.last_sample()) + "]");
    const auto begin = series.p.begin() + (n - series.first_t) * series.dim;
    return Tensor::from({series.lookback, series.dim},
                        std::vector<double>(begin, begin + series.lookback * series.dim));
}

void GradientCache::set(long n, std::vector<double> g) {
    if (n < first_sample || n > last_sample)
        throw std::out_of_range("cache: sample " + std::to_string(n) + " out of range");
    if (static_cast<long>(g.size()) != lookback * dim)
        throw std::invalid_argument("cache: gradient size mismatch for sample " +
                                    std::to_string(n));
    grads[static_cast<size_t>(n - first_sample)] = std::move(g);
}

const std::vector<double>& GradientCache::at(long n) const {
    return grads[static_cast<size_t>(n - first_sample)];
}

TimestampGradient accumulate(const GradientCache& cache) {
    for (long n = cache.first_sample; n <= cache.last_sample; ++n)
        if (cache.at(n).empty())
            throw std::invalid_argument("accumulate: cache is missing sample " +
                                        std::to_string(n));

    const long tau = cache.first_sample;
    const long N = cache.last_sample;
    const long L = cache.lookback;
    const long D = cache.dim;

    TimestampGradient out;
    out.first_t = tau;
    out.last_t = N + L - 1;
    out.dim = D;
    out.g.assign(static_cast<size_t>((out.last_t - tau + 1) * D), 0.0);

    // Closed form of the overlap sum: the sample index runs over the windows
    // that contain t, shrunk at both test-set boundaries. Summation is in
    // ascending sample order so the reduction is bit-reproducible.
    for (long t = tau; t <= out.last_t; ++t) {
        const long i_lo = std::max(tau, t - L + 1);
        const long i_hi = std::min(N, t);
        double* row = out.g.data() + (t - tau) * D;
        for (long i = i_lo; i <= i_hi; ++i) {
            const long l = t - i + 1;
            const double* c = cache.at(i).data() + (l - 1) * D;
            for (long d = 0; d < D; ++d) row[d] += c[d];
        }
    }
    return out;
}

PerturbationSeries tgsm(const ForecastModel& model, const WindowedDataset& data,
                        double epsilon, bool signed_value_factor) {
    if (epsilon < 0) throw std::invalid_argument("tgsm: epsilon must be >= 0");
    const long L = data.lookback();
    const long D = data.dim();
    auto series = make_series(data.first_sample(), data.last_sample(), L, D, epsilon);

    std::vector<double> g_t(static_cast<size_t>(D));
    for (long t = series.first_t; t <= series.last_t; ++t) {
        std::fill(g_t.begin(), g_t.end(), 0.0);
        for (auto [i, l] : data.overlaps(t)) {
            // sample input with the already-decided prefix applied; t itself
            // and everything after stay clean
            auto x = data.input(i);
            std::vector<double> xv = x.values();
            for (long r = 0; r < L; ++r) {
                const long s = i + r;
                if (s >= t) break;
                const double* ps = series.row(s);
                for (long d = 0; d < D; ++d) xv[r * D + d] += ps[d];
            }
            auto grad = input_gradient(model, Tensor::from({L, D}, std::move(xv)),
                                       data.target(i));
            const double* row = grad.values().data() + (l - 1) * D;
            for (long d = 0; d < D; ++d) g_t[d] += row[d];
        }
        const double* v = data.row(t);
        double* p = series.row(t);
        for (long d = 0; d < D; ++d) {
            const double factor = signed_value_factor ? v[d] : std::abs(v[d]);
            p[d] = epsilon * sign(g_t[d]) * factor;
        }
    }
    return series;
}

PerturbationSeries mi_tgam(const ForecastModel& model, const WindowedDataset& data,
                           const AttackConfig& cfg) {
    cfg.validate();
    const long L = data.lookback();
    const long D = data.dim();
    const long tau = data.first_sample();
    const long N = data.last_sample();
    auto series = make_series(tau, N, L, D, cfg.epsilon);

    if (cfg.random_init) {
        Rng rng(derive_seed(cfg.seed, "mi_tgam/init"));
        for (long t = series.first_t; t <= series.last_t; ++t) {
            const double* v = data.row(t);
            double* p = series.row(t);
            for (long d = 0; d < D; ++d) {
                const double b = cfg.epsilon * std::abs(v[d]);
                p[d] = rng.uniform(-b, b);
            }
        }
    }

    for (long k = 0; k < cfg.steps; ++k) {
        GradientCache cache(tau, N, L, D, k);
        for (long n = tau; n <= N; ++n) {
            auto x = data.input(n);
            std::vector<double> xv = x.values();
            for (long r = 0; r < L; ++r) {
                const double* ps = series.row(n + r);
                for (long d = 0; d < D; ++d) xv[r * D + d] += ps[d];
            }
            auto grad = input_gradient(model, Tensor::from({L, D}, std::move(xv)),
                                       data.target(n));
            cache.set(n, grad.values());
        }
        auto g = accumulate(cache);

        for (long t = series.first_t; t <= series.last_t; ++t) {
            const double* gt = g.row(t);
            double* wt = series.momentum_row(t);
            double* pt = series.row(t);
            const double* v = data.row(t);
            double l1 = 0.0;
            for (long d = 0; d < D; ++d) l1 += std::abs(gt[d]);
            for (long d = 0; d < D; ++d) {
                wt[d] = cfg.decay * wt[d] + (l1 > 0.0 ? gt[d] / l1 : 0.0);
                const double factor =
                    cfg.signed_value_factor ? v[d] : std::abs(v[d]);
                const double bound = cfg.epsilon * std::abs(v[d]);
                pt[d] = std::clamp(pt[d] + cfg.step_size * sign(wt[d]) * factor,
                                   -bound, bound);
            }
        }
    }
    return series;
}

PerturbationSeries unify_baseline(const std::vector<SamplePerturbation>& per_sample,
                                  long tau, long last_sample, long lookback, long dim,
                                  double epsilon, std::uint64_t seed) {
    if (static_cast<long>(per_sample.size()) != last_sample - tau + 1)
        throw std::invalid_argument("unify: expected one perturbation per sample");
    auto series = make_series(tau, last_sample, lookback, dim, epsilon);
    Rng rng(seed);
    for (long t = series.first_t; t <= series.last_t; ++t) {
        auto entries = overlap_set(t, tau, last_sample, lookback);
        auto [i, l] = entries[rng.below(entries.size())];
        const auto& delta = per_sample[static_cast<size_t>(i - tau)].delta;
        double* p = series.row(t);
        for (long d = 0; d < dim; ++d) p[d] = delta.at(l - 1, d);
    }
    return series;
}

std::string TuapViolation::describe() const {
    char buf[160];
    if (kind == Kind::inconsistency)
        std::snprintf(buf, sizeof buf,
                      "inconsistency at t=%ld d=%ld: sample %ld has %.9g, sample %ld has %.9g",
                      t, d, sample, value, sample + 1, other);
    else
        std::snprintf(buf, sizeof buf,
                      "budget at t=%ld d=%ld: sample %ld has |%.9g| > %.9g", t, d,
                      sample, value, other);
    return buf;
}

TuapReport verify_tuap(const std::vector<SamplePerturbation>& per_sample,
                       const WindowedDataset& data, double epsilon) {
    TuapReport report;
    const long L = data.lookback();
    const long D = data.dim();

    auto note = [&](TuapViolation v) {
        if (!report.first_violation) report.first_violation = v;
    };

    for (const auto& sp : per_sample) {
        for (long l = 0; l < L; ++l) {
            const long t = sp.sample + l;
            for (long d = 0; d < D; ++d) {
                const double bound = epsilon * std::abs(data.value(t, d)) + 1e-9;
                const double val = sp.delta.at(l, d);
                if (std::abs(val) > bound) {
                    if (report.within_budget)
                        note({TuapViolation::Kind::budget, t, d, sp.sample, val, bound});
                    report.within_budget = false;
                }
            }
        }
    }
    for (size_t i = 0; i + 1 < per_sample.size(); ++i) {
        const auto& a = per_sample[i];
        const auto& b = per_sample[i + 1];
        if (b.sample != a.sample + 1) continue;
        for (long l = 0; l + 1 < L; ++l) {
            for (long d = 0; d < D; ++d) {
                if (a.delta.at(l + 1, d) != b.delta.at(l, d)) {
                    if (report.consistent)
                        note({TuapViolation::Kind::inconsistency, a.sample + l + 1, d,
                              a.sample, a.delta.at(l + 1, d), b.delta.at(l, d)});
                    report.consistent = false;
                }
            }
        }
    }
    return report;
}

void write_series_csv(const PerturbationSeries& series, const WindowedDataset& data,
                      const std::string& path, const NormStats* stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("series: cannot write " + path);
    out << "timestamp,variable,clean_value,perturbation,perturbed_value\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    const auto& names = data.series().variable_names;
    for (long t = series.first_t; t <= series.last_t; ++t) {
        const double* v = data.row(t);
        const double* p = series.row(t);
        for (long d = 0; d < series.dim; ++d) {
            double clean = v[d], pert = p[d];
            if (stats) {
                clean = clean * stats->stddev[d] + stats->mean[d];
                pert = pert * stats->stddev[d];
            }
            out << t << ',' << names[d] << ',';
            put(clean);
            out << ',';
            put(pert);
            out << ',';
            put(clean + pert);
            out << '\n';
        }
    }
}

}  // namespace tsattack
