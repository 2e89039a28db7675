#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsattack/attacks.hpp"
#include "tsattack/dataset.hpp"
#include "tsattack/models.hpp"
#include "tsattack/tuap.hpp"

namespace tsattack {

// Experiment orchestration: metrics, degradation reports, white-box and
// transfer matrices, sensitivity sweeps, synthetic data and file emission.

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

// Grand mean over all samples and forecast elements of the squared/absolute
// error of f(x_n + delta_n) vs y_n; delta comes from slicing the series, or
// zero when absent.
Metrics evaluate(const ForecastModel& model, const WindowedDataset& data,
                 const PerturbationSeries* series = nullptr);

// (err_attack - err_clean) / err_clean * 100
double degradation(double err_attack, double err_clean);

struct SynthSpec {
    double sine_period = 24.0;
    double sine_amplitude = 1.0;
    double trend_slope = 0.001;
    double noise_sigma = 0.1;
};

// Deterministic per seed. Each variable gets the same components with a
// variable-specific phase shift of d * period / D so columns are distinct.
RawSeries synth_series(long T, long D, const SynthSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
    // data source: a csv path, or the synthetic generator when empty
    std::string csv_path;
    bool date_column = false;
    long synth_T = 2000;
    long synth_D = 3;
    SynthSpec synth;
    SplitRatios ratios;
    WindowSpec window;  // L=48, H=24 default

    std::vector<std::string> models = {"linear", "mlp", "rnn_lite"};
    long hidden = 32;

    long epochs = 30;
    double learning_rate = 0.05;
    long batch_size = 32;

    std::vector<std::string> methods = {"fgsm",  "bim",  "pgd",  "mi_fgsm",
                                        "atsg",  "tca",  "tgsm", "mi_tgam"};
    double epsilon = 0.1;
    long steps = 10;
    double step_size = 0.01;
    double decay = 1.0;
    bool signed_value_factor = false;
    bool random_init = false;

    std::string outdir = "out";
    std::uint64_t master_seed = 7;

    void validate() const;
    std::string dataset_id() const;
};

struct AttackReport {
    std::string dataset;
    std::string surrogate;
    std::string target;
    std::string method;
    double epsilon = 0.0;
    long steps = 0;
    double step_size = 0.0;
    double decay = 0.0;
    std::uint64_t seed = 0;
    double clean_mse = 0.0, attacked_mse = 0.0, mse_degradation_pct = 0.0;
    double clean_mae = 0.0, attacked_mae = 0.0, mae_degradation_pct = 0.0;
    bool tuap_verified = false;
    std::string violation;  // first violating coordinate when not verified
};

// Data, stats and trained models shared by the experiment entry points.
struct Pipeline {
    RawSeries raw;  // source units
    NormStats stats;
    WindowedDataset train_data;
    WindowedDataset test_data;
    std::optional<WindowedDataset> val_data;
    std::vector<std::pair<std::string, ForecastModel>> models;
};

Pipeline prepare(const ExperimentConfig& config);

// Perturbation series for one (surrogate, method) pair; sample-level
// baselines are unified through the seeded per-timestamp draw. Seeds derive
// from the master seed and a label naming the surrogate and method, so the
// same pair yields the same series in white-box and transfer runs.
PerturbationSeries craft_series(const ExperimentConfig& config,
                                const ForecastModel& surrogate,
                                const std::string& surrogate_tag,
                                const WindowedDataset& data,
                                const std::string& method);

// One report per (model, method): surrogate == target.
std::vector<AttackReport> run_whitebox(const ExperimentConfig& config);
std::vector<AttackReport> run_whitebox(const ExperimentConfig& config,
                                       const Pipeline& pipeline);
// Full surrogate x target x method matrix; the diagonal reproduces the
// white-box numbers bit-exactly under the same master seed.
std::vector<AttackReport> run_transfer(const ExperimentConfig& config);
std::vector<AttackReport> run_transfer(const ExperimentConfig& config,
                                       const Pipeline& pipeline);

enum class SweepAxis { epsilon, iterations, lookback };
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

struct SweepRow {
    SweepAxis axis = SweepAxis::epsilon;
    double value = 0.0;
    AttackReport report;
};

// One white-box run per grid point. Sweeps over epsilon or iterations keep
// the step size at epsilon / steps; the lookback sweep re-windows the data.
std::vector<SweepRow> run_sensitivity(const ExperimentConfig& config, SweepAxis axis,
                                      const std::vector<double>& grid);

void emit_report_csv(const std::vector<AttackReport>& reports, const std::string& path);
void emit_report_json(const std::vector<AttackReport>& reports, const std::string& path);
void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

// Clean vs perturbed input and forecast for one sample: (L + H) x D rows.
void emit_plotdata(const ForecastModel& model, const WindowedDataset& data,
                   const PerturbationSeries& series, long sample,
                   const std::string& path);

}  // namespace tsattack
