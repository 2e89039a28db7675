#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsattack/eval.hpp"
#include "tsattack/rng.hpp"

namespace fs = std::filesystem;
using namespace tsattack;

namespace {

constexpr int kConfigVersion = 1;

struct CliState {
    ExperimentConfig config;
    int config_version = kConfigVersion;
};

void add_experiment_options(CLI::App& app, CliState& st) {
    auto& c = st.config;
    app.add_option("--config-version", st.config_version,
                   "Config schema version (must be 1)");

    app.add_option("--data", c.csv_path, "CSV input path (omit to use the generator)");
    app.add_flag("--date-column", c.date_column, "First CSV column holds date labels");
    app.add_option("--synth-T", c.synth_T, "Generated series length");
    app.add_option("--synth-D", c.synth_D, "Generated series variables");
    app.add_option("--sine-period", c.synth.sine_period, "Generator: sine period");
    app.add_option("--sine-amplitude", c.synth.sine_amplitude,
                   "Generator: sine amplitude");
    app.add_option("--trend-slope", c.synth.trend_slope, "Generator: trend slope");
    app.add_option("--noise-sigma", c.synth.noise_sigma, "Generator: noise std");

    app.add_option("--train-ratio", c.ratios.train, "Training split ratio");
    app.add_option("--val-ratio", c.ratios.val, "Validation split ratio");
    app.add_option("--test-ratio", c.ratios.test, "Test split ratio");
    app.add_option("--lookback,-L", c.window.lookback, "Input window length");
    app.add_option("--horizon,-H", c.window.horizon, "Forecast horizon");

    app.add_option("--models", c.models, "Model tags: linear, mlp, rnn_lite")
        ->delimiter(',');
    app.add_option("--hidden", c.hidden, "Hidden width for mlp / rnn_lite");
    app.add_option("--epochs", c.epochs, "Training epochs");
    app.add_option("--lr", c.learning_rate, "SGD learning rate");
    app.add_option("--batch-size", c.batch_size, "SGD batch size");

    app.add_option("--methods", c.methods,
                   "Attack methods: fgsm, bim, pgd, mi_fgsm, atsg, tca, tgsm, mi_tgam")
        ->delimiter(',');
    app.add_option("--epsilon", c.epsilon, "Relative perturbation budget");
    app.add_option("--steps,-K", c.steps, "Attack iterations");
    app.add_option("--alpha", c.step_size, "Per-step relative magnitude");
    app.add_option("--mu", c.decay, "Momentum decay factor");
    app.add_flag("--signed-value-factor", c.signed_value_factor,
                 "Use the signed observation as the update direction factor");
    app.add_flag("--random-init", c.random_init, "Random start inside the budget");

    app.add_option("--outdir", c.outdir, "Output directory");
    app.add_option("--seed", c.master_seed, "Master seed");
}

fs::path ensure_dir(const fs::path& p) {
    fs::create_directories(p);
    return p;
}

void print_reports(const std::vector<AttackReport>& reports) {
    for (const auto& r : reports) {
        std::printf("%-10s %-9s -> %-9s  mse %.4f -> %.4f (%+.1f%%)  mae %.4f -> %.4f "
                    "(%+.1f%%)  %s\n",
                    r.method.c_str(), r.surrogate.c_str(), r.target.c_str(), r.clean_mse,
                    r.attacked_mse, r.mse_degradation_pct, r.clean_mae, r.attacked_mae,
                    r.mae_degradation_pct,
                    r.tuap_verified ? "unified" : ("VIOLATION " + r.violation).c_str());
    }
}

int run_synth(const CliState& st, const std::string& out_path) {
    auto series = synth_series(st.config.synth_T, st.config.synth_D, st.config.synth,
                               derive_seed(st.config.master_seed, "synth"));
    write_csv(series, out_path);
    std::printf("wrote %s (T=%ld, D=%ld)\n", out_path.c_str(), series.rows, series.cols);
    return 0;
}

int run_train(const CliState& st) {
    auto pl = prepare(st.config);
    auto ckpt_dir = ensure_dir(fs::path(st.config.outdir) / "checkpoints");
    for (const auto& [tag, model] : pl.models) {
        auto path = (ckpt_dir / (tag + ".json")).string();
        model.save(path);
        auto train_m = evaluate(model, pl.train_data);
        std::printf("%-9s train mse %.6f", tag.c_str(), train_m.mse);
        if (pl.val_data) {
            auto val_m = evaluate(model, *pl.val_data);
            std::printf("  val mse %.6f", val_m.mse);
        }
        std::printf("  -> %s\n", path.c_str());
    }
    return 0;
}

int run_attack(const CliState& st, const std::string& surrogate) {
    auto pl = prepare(st.config);
    const ForecastModel* model = nullptr;
    for (const auto& [tag, m] : pl.models)
        if (tag == surrogate) model = &m;
    if (!model)
        throw std::invalid_argument("attack: surrogate \"" + surrogate +
                                    "\" is not among the configured models");

    auto dir = ensure_dir(fs::path(st.config.outdir) / "perturbations");
    for (const auto& method : st.config.methods) {
        auto series = craft_series(st.config, *model, surrogate, pl.test_data, method);
        std::vector<SamplePerturbation> slices;
        for (long n = series.first_sample(); n <= series.last_sample(); ++n)
            slices.push_back({n, slice(series, n)});
        auto report = verify_tuap(slices, pl.test_data, st.config.epsilon);

        auto norm_path = (dir / (surrogate + "_" + method + ".csv")).string();
        auto raw_path = (dir / (surrogate + "_" + method + "_raw.csv")).string();
        write_series_csv(series, pl.test_data, norm_path);
        write_series_csv(series, pl.test_data, raw_path, &pl.stats);
        std::printf("%-9s %-9s t=[%ld,%ld]  consistent=%s within_budget=%s  -> %s\n",
                    surrogate.c_str(), method.c_str(), series.first_t, series.last_t,
                    report.consistent ? "yes" : "no",
                    report.within_budget ? "yes" : "no", norm_path.c_str());
        if (!report.ok() && report.first_violation)
            std::printf("  first violation: %s\n",
                        report.first_violation->describe().c_str());
    }
    return 0;
}

int run_eval_cmd(const CliState& st, bool transfer, long plot_sample) {
    auto pl = prepare(st.config);
    auto reports =
        transfer ? run_transfer(st.config, pl) : run_whitebox(st.config, pl);
    auto rep_dir = ensure_dir(fs::path(st.config.outdir) / "reports");
    const std::string stem = transfer ? "transfer" : "whitebox";
    emit_report_csv(reports, (rep_dir / (stem + ".csv")).string());
    emit_report_json(reports, (rep_dir / (stem + ".json")).string());

    if (!transfer) {
        auto plot_dir = ensure_dir(fs::path(st.config.outdir) / "plotdata");
        long sample = plot_sample >= 0 ? pl.test_data.first_sample() + plot_sample
                                       : pl.test_data.first_sample();
        for (const auto& [tag, model] : pl.models) {
            for (const auto& method : st.config.methods) {
                auto series = craft_series(st.config, model, tag, pl.test_data, method);
                emit_plotdata(model, pl.test_data, series, sample,
                              (plot_dir / (tag + "_" + method + ".csv")).string());
            }
        }
    }
    print_reports(reports);
    std::printf("wrote %s\n", (rep_dir / (stem + ".csv")).string().c_str());
    return 0;
}

int run_sweep(const CliState& st, const std::string& axis_str,
              const std::vector<double>& grid, long replicates) {
    auto axis = parse_axis(axis_str);
    if (replicates < 1) throw std::invalid_argument("sweep: replicates must be >= 1");
    std::vector<SweepRow> rows;
    for (long r = 0; r < replicates; ++r) {
        ExperimentConfig c = st.config;
        if (r > 0 || replicates > 1)
            c.master_seed =
                derive_seed(st.config.master_seed, "replicate/" + std::to_string(r));
        auto part = run_sensitivity(c, axis, grid);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    auto rep_dir = ensure_dir(fs::path(st.config.outdir) / "reports");
    auto path = (rep_dir / ("sweep_" + axis_str + ".csv")).string();
    emit_sweep_csv(rows, path);
    std::printf("wrote %s (%zu rows)\n", path.c_str(), rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecast-model attack toolkit: trains desk-scale forecasters and "
                 "evaluates timestamp-unified adversarial perturbations"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Read options from an INI file");

    CliState st;
    add_experiment_options(app, st);

    std::string synth_out = "synth.csv";
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic series CSV");
    synth_cmd->add_option("--out", synth_out, "Output CSV path");

    auto* train_cmd =
        app.add_subcommand("train", "Train the configured models and save checkpoints");

    std::string surrogate;
    auto* attack_cmd = app.add_subcommand(
        "attack", "Craft unified perturbation series and export them as CSV");
    attack_cmd->add_option("--surrogate", surrogate,
                           "Model used to craft the perturbations (default: first)");

    long plot_sample = -1;
    auto* eval_cmd = app.add_subcommand(
        "eval", "White-box degradation report for every (model, method)");
    eval_cmd->add_option("--plot-sample", plot_sample,
                         "Test-sample offset for plotdata files");

    auto* transfer_cmd = app.add_subcommand(
        "transfer", "Full surrogate x target transfer-attack matrix");

    std::string axis = "epsilon";
    std::vector<double> grid;
    long replicates = 1;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Sensitivity sweep over epsilon/iterations/lookback");
    sweep_cmd->add_option("--axis", axis, "Sweep axis: epsilon, iterations, lookback");
    sweep_cmd->add_option("--grid", grid, "Grid values")->delimiter(',')->required();
    sweep_cmd->add_option("--replicates", replicates,
                          "Seeded repetitions for median statistics");

    CLI11_PARSE(app, argc, argv);

    try {
        if (st.config_version != kConfigVersion)
            throw std::invalid_argument("config: unsupported config-version " +
                                        std::to_string(st.config_version));
        if (app.got_subcommand(synth_cmd)) return run_synth(st, synth_out);
        if (app.got_subcommand(train_cmd)) return run_train(st);
        if (app.got_subcommand(attack_cmd)) {
            if (surrogate.empty()) surrogate = st.config.models.front();
            return run_attack(st, surrogate);
        }
        if (app.got_subcommand(eval_cmd)) return run_eval_cmd(st, false, plot_sample);
        if (app.got_subcommand(transfer_cmd)) return run_eval_cmd(st, true, -1);
        if (app.got_subcommand(sweep_cmd)) return run_sweep(st, axis, grid, replicates);
        throw std::logic_error("no subcommand dispatched");
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 5;
    }
}
