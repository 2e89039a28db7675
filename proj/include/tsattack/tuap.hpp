#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsattack/attacks.hpp"
#include "tsattack/dataset.hpp"
#include "tsattack/models.hpp"

namespace tsattack {

// Timestamp-unified attacks. A PerturbationSeries assigns one D-vector p_t
// per timestamp of the attack set, so every sample that covers t receives
// the same value; this is the property the sample-level baselines break.
// Elementwise, |p_t[d]| <= epsilon * |v_t[d]|: observations at zero get a
// zero budget and therefore a zero perturbation.

struct PerturbationSeries {
    long first_t = 0;  // tau
    long last_t = 0;   // N + L - 1
    long dim = 0;
    long lookback = 0;
    double epsilon = 0.0;
    std::vector<double> p;  // (last_t - first_t + 1) x dim, row-major
    std::vector<double> w;  // momentum, same layout

    long timestamps() const { return last_t - first_t + 1; }
    long first_sample() const { return first_t; }
    long last_sample() const { return last_t - lookback + 1; }
    double* row(long t) { return p.data() + (t - first_t) * dim; }
    const double* row(long t) const { return p.data() + (t - first_t) * dim; }
    double* momentum_row(long t) { return w.data() + (t - first_t) * dim; }
};

PerturbationSeries make_series(long tau, long last_sample, long lookback, long dim,
                               double epsilon);

// delta_n = p_{n : n+L-1}
Tensor slice(const PerturbationSeries& series, long n);

struct GradientCache {
    long first_sample = 0;
    long last_sample = 0;
    long lookback = 0;
    long dim = 0;
    long iteration = 0;  // k tag
    // grads[n - first_sample] is an L x D row-major array; empty = missing
    std::vector<std::vector<double>> grads;

    GradientCache(long first, long last, long L, long D, long k)
        : first_sample(first), last_sample(last), lookback(L), dim(D), iteration(k),
          grads(static_cast<size_t>(last - first + 1)) {}
    void set(long n, std::vector<double> g);
    const std::vector<double>& at(long n) const;
};

struct TimestampGradient {
    long first_t = 0;
    long last_t = 0;
    long dim = 0;
    std::vector<double> g;  // (last_t - first_t + 1) x dim

    const double* row(long t) const { return g.data() + (t - first_t) * dim; }
};

// g_t = sum of c_{t-l+1, l} over the (sample, offset) pairs of overlap_set(t),
// evaluated through the boundary-aware closed-form bounds.
TimestampGradient accumulate(const GradientCache& cache);

// Ascending single-step attack: each timestamp is set from the sign of the
// loss gradient summed over its overlapping samples, with the already-decided
// perturbations applied at earlier timestamps and nothing at later ones.
PerturbationSeries tgsm(const ForecastModel& model, const WindowedDataset& data,
                        double epsilon, bool signed_value_factor = false);

// Iterative gradient accumulation with an L1-normalized momentum recurrence
// per timestamp. Each iteration costs one gradient pass per sample.
PerturbationSeries mi_tgam(const ForecastModel& model, const WindowedDataset& data,
                           const AttackConfig& cfg);

// Adapts per-sample baseline output to the unified constraint: for each
// timestamp, one of the overlapping samples' values is drawn with the seeded
// generator (one draw per timestamp, ascending t).
PerturbationSeries unify_baseline(const std::vector<SamplePerturbation>& per_sample,
                                  long tau, long last_sample, long lookback, long dim,
                                  double epsilon, std::uint64_t seed);

struct TuapViolation {
    enum class Kind { inconsistency, budget };
    Kind kind = Kind::inconsistency;
    long t = 0;        // violating timestamp
    long d = 0;        // violating variable
    long sample = 0;   // sample holding the value (first of the pair for
                       // inconsistencies)
    double value = 0;  // offending perturbation value
    double other = 0;  // adjacent sample's value / allowed bound
    std::string describe() const;
};

struct TuapReport {
    bool consistent = true;
    bool within_budget = true;
    std::optional<TuapViolation> first_violation;
    bool ok() const { return consistent && within_budget; }
};

// Checks sample-level deltas for exact adjacency equality and the relative
// budget (with 1e-9 slack) against the dataset's observations.
TuapReport verify_tuap(const std::vector<SamplePerturbation>& per_sample,
                       const WindowedDataset& data, double epsilon);

// Perturbation series export: (timestamp, variable, clean_value,
// perturbation, perturbed_value) rows. Pass stats to write source-unit
// values instead of normalized ones.
void write_series_csv(const PerturbationSeries& series, const WindowedDataset& data,
                      const std::string& path, const NormStats* stats = nullptr);

}  // namespace tsattack
