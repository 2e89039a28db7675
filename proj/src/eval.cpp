#include "tsattack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "tsattack/rng.hpp"

namespace tsattack {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void put_value(std::ofstream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    return s;
}

std::string basename_of(const std::string& path) {
    auto pos = path.find_last_of('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

}  // namespace

Metrics evaluate(const ForecastModel& model, const WindowedDataset& data,
                 const PerturbationSeries* series) {
    if (series) {
        if (series->first_sample() > data.first_sample() ||
            series->last_sample() < data.last_sample() ||
            series->lookback != data.lookback() || series->dim != data.dim())
            throw std::invalid_argument(
                "evaluate: perturbation series does not cover the dataset");
    }
    double se = 0.0, ae = 0.0;
    long count = 0;
    for (long n = data.first_sample(); n <= data.last_sample(); ++n) {
        auto x = data.input(n);
        if (series) {
            auto& v = x.mutable_values();
            const double* p = series->row(n);
            for (size_t i = 0; i < v.size(); ++i) v[i] += p[i];
        }
        auto pred = model.predict(x);
        auto y = data.target(n);
        for (size_t i = 0; i < pred.values().size(); ++i) {
            const double r = pred.values()[i] - y.values()[i];
            se += r * r;
            ae += std::abs(r);
            ++count;
        }
    }
    return {se / static_cast<double>(count), ae / static_cast<double>(count)};
}

double degradation(double err_attack, double err_clean) {
    if (!(err_clean > 0))
        throw std::domain_error("degradation: clean error must be > 0, got " +
                                std::to_string(err_clean));
    return (err_attack - err_clean) / err_clean * 100.0;
}

RawSeries synth_series(long T, long D, const SynthSpec& spec, std::uint64_t seed) {
    if (T < 1 || D < 1) throw std::invalid_argument("synth: T and D must be >= 1");
    if (spec.sine_amplitude != 0.0 && !(spec.sine_period > 0))
        throw std::invalid_argument("synth: sine period must be > 0");
    if (spec.noise_sigma < 0) throw std::invalid_argument("synth: noise sigma must be >= 0");

    RawSeries s;
    s.rows = T;
    s.cols = D;
    s.values.resize(static_cast<size_t>(T * D));
    for (long d = 0; d < D; ++d) s.variable_names.push_back("v" + std::to_string(d + 1));

    Rng rng(seed);
    for (long t = 0; t < T; ++t) {
        for (long d = 0; d < D; ++d) {
            double v = spec.trend_slope * static_cast<double>(t);
            if (spec.sine_amplitude != 0.0) {
                const double phase =
                    spec.sine_period * static_cast<double>(d) / static_cast<double>(D);
                v += spec.sine_amplitude *
                     std::sin(kTwoPi * (static_cast<double>(t) + phase) /
                              spec.sine_period);
            }
            if (spec.noise_sigma > 0) v += rng.normal(0.0, spec.noise_sigma);
            s.values[t * D + d] = v;
        }
    }
    return s;
}

void ExperimentConfig::validate() const {
    const double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("config: split ratios sum to " + std::to_string(sum));
    if (window.lookback < 1 || window.horizon < 1)
        throw std::invalid_argument("config: lookback and horizon must be >= 1");
    if (models.empty()) throw std::invalid_argument("config: no models");
    for (const auto& m : models) parse_arch(m);
    if (methods.empty()) throw std::invalid_argument("config: no methods");
    for (const auto& m : methods) parse_method(m);
    if (csv_path.empty() && (synth_T < 1 || synth_D < 1))
        throw std::invalid_argument("config: bad synthetic dimensions");
    AttackConfig probe;
    probe.epsilon = epsilon;
    probe.steps = steps;
    probe.step_size = step_size;
    probe.decay = decay;
    probe.validate();
    if (epochs < 0 || batch_size < 1 || learning_rate < 0)
        throw std::invalid_argument("config: bad training settings");
    if (hidden < 1) throw std::invalid_argument("config: hidden size must be >= 1");
}

std::string ExperimentConfig::dataset_id() const {
    return csv_path.empty() ? "synthetic" : basename_of(csv_path);
}

Pipeline prepare(const ExperimentConfig& config) {
    config.validate();

    RawSeries raw = config.csv_path.empty()
                        ? synth_series(config.synth_T, config.synth_D, config.synth,
                                       derive_seed(config.master_seed, "synth"))
                        : ingest_csv(config.csv_path, {config.date_column});

    auto parts = split(raw, config.ratios, config.window);
    auto stats = compute_stats(parts.train);

    Pipeline pl{std::move(raw),
                stats,
                build_windows(normalize(parts.train, stats), config.window),
                build_windows(normalize(parts.test, stats), config.window),
                std::nullopt,
                {}};
    if (parts.val_usable)
        pl.val_data = build_windows(normalize(parts.val, stats), config.window);

    for (const auto& tag : config.models) {
        ModelSpec spec;
        spec.arch = parse_arch(tag);
        spec.lookback = config.window.lookback;
        spec.horizon = config.window.horizon;
        spec.dim = pl.train_data.dim();
        spec.hidden = config.hidden;
        spec.seed = derive_seed(config.master_seed, "init/" + tag);
        ForecastModel model(spec);
        TrainConfig tc{config.epochs, config.learning_rate, config.batch_size,
                       derive_seed(config.master_seed, "train/" + tag)};
        train(model, pl.train_data, tc);
        pl.models.emplace_back(tag, std::move(model));
    }
    return pl;
}

PerturbationSeries craft_series(const ExperimentConfig& config,
                                const ForecastModel& surrogate,
                                const std::string& surrogate_tag,
                                const WindowedDataset& data,
                                const std::string& method) {
    AttackConfig cfg;
    cfg.epsilon = config.epsilon;
    cfg.steps = config.steps;
    cfg.step_size = config.step_size;
    cfg.decay = config.decay;
    cfg.method = parse_method(method);
    cfg.signed_value_factor = config.signed_value_factor;
    cfg.random_init = config.random_init;
    cfg.seed = derive_seed(config.master_seed, "attack/" + method + "/" + surrogate_tag);

    switch (cfg.method) {
        case Method::tgsm:
            return tgsm(surrogate, data, cfg.epsilon, cfg.signed_value_factor);
        case Method::mi_tgam:
            return mi_tgam(surrogate, data, cfg);
        default: {
            auto per_sample = attack_set(surrogate, data, cfg);
            return unify_baseline(
                per_sample, data.first_sample(), data.last_sample(), data.lookback(),
                data.dim(), cfg.epsilon,
                derive_seed(config.master_seed, "unify/" + method + "/" + surrogate_tag));
        }
    }
}

namespace {

std::vector<AttackReport> run_matrix(const ExperimentConfig& config, const Pipeline& pl,
                                     bool full) {
    std::vector<Metrics> clean(pl.models.size());
    for (size_t i = 0; i < pl.models.size(); ++i)
        clean[i] = evaluate(pl.models[i].second, pl.test_data);

    std::vector<AttackReport> reports;
    for (size_t s = 0; s < pl.models.size(); ++s) {
        const auto& [stag, smodel] = pl.models[s];
        for (const auto& method : config.methods) {
            auto series = craft_series(config, smodel, stag, pl.test_data, method);

            std::vector<SamplePerturbation> slices;
            for (long n = series.first_sample(); n <= series.last_sample(); ++n)
                slices.push_back({n, slice(series, n)});
            auto tuap = verify_tuap(slices, pl.test_data, config.epsilon);

            for (size_t t = 0; t < pl.models.size(); ++t) {
                if (!full && t != s) continue;
                const auto& [ttag, tmodel] = pl.models[t];
                auto attacked = evaluate(tmodel, pl.test_data, &series);

                AttackReport r;
                r.dataset = config.dataset_id();
                r.surrogate = stag;
                r.target = ttag;
                r.method = method;
                r.epsilon = config.epsilon;
                r.steps = config.steps;
                r.step_size = config.step_size;
                r.decay = config.decay;
                r.seed = config.master_seed;
                r.clean_mse = clean[t].mse;
                r.clean_mae = clean[t].mae;
                r.attacked_mse = attacked.mse;
                r.attacked_mae = attacked.mae;
                r.mse_degradation_pct = degradation(attacked.mse, clean[t].mse);
                r.mae_degradation_pct = degradation(attacked.mae, clean[t].mae);
                r.tuap_verified = tuap.ok();
                if (!tuap.ok() && tuap.first_violation)
                    r.violation = tuap.first_violation->describe();
                reports.push_back(std::move(r));
            }
        }
    }
    return reports;
}

}  // namespace

std::vector<AttackReport> run_whitebox(const ExperimentConfig& config) {
    return run_matrix(config, prepare(config), /*full=*/false);
}

std::vector<AttackReport> run_whitebox(const ExperimentConfig& config,
                                       const Pipeline& pipeline) {
    return run_matrix(config, pipeline, /*full=*/false);
}

std::vector<AttackReport> run_transfer(const ExperimentConfig& config) {
    if (config.models.size() < 2)
        throw std::invalid_argument("transfer: at least two models are required");
    return run_matrix(config, prepare(config), /*full=*/true);
}

std::vector<AttackReport> run_transfer(const ExperimentConfig& config,
                                       const Pipeline& pipeline) {
    if (config.models.size() < 2)
        throw std::invalid_argument("transfer: at least two models are required");
    return run_matrix(config, pipeline, /*full=*/true);
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "epsilon") return SweepAxis::epsilon;
    if (name == "iterations") return SweepAxis::iterations;
    if (name == "lookback") return SweepAxis::lookback;
    throw std::invalid_argument("sweep: unknown axis \"" + name + "\"");
}

std::string axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::epsilon: return "epsilon";
        case SweepAxis::iterations: return "iterations";
        case SweepAxis::lookback: return "lookback";
    }
    throw std::logic_error("sweep: bad axis");
}

std::vector<SweepRow> run_sensitivity(const ExperimentConfig& config, SweepAxis axis,
                                      const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    std::vector<SweepRow> rows;
    for (double value : grid) {
        ExperimentConfig point = config;
        switch (axis) {
            case SweepAxis::epsilon:
                point.epsilon = value;
                point.step_size = value / static_cast<double>(point.steps);
                break;
            case SweepAxis::iterations:
                point.steps = std::lround(value);
                point.step_size =
                    point.epsilon / static_cast<double>(point.steps);
                break;
            case SweepAxis::lookback:
                point.window.lookback = std::lround(value);
                break;
        }
        for (auto& report : run_whitebox(point))
            rows.push_back({axis, value, std::move(report)});
    }
    return rows;
}

namespace {

constexpr const char* kReportHeader =
    "dataset,surrogate,target,method,epsilon,steps,step_size,decay,seed,"
    "clean_mse,attacked_mse,mse_degradation_pct,"
    "clean_mae,attacked_mae,mae_degradation_pct,tuap_verified,violation";

void write_report_row(std::ofstream& out, const AttackReport& r) {
    out << r.dataset << ',' << r.surrogate << ',' << r.target << ',' << r.method << ',';
    put_value(out, r.epsilon);
    out << ',' << r.steps << ',';
    put_value(out, r.step_size);
    out << ',';
    put_value(out, r.decay);
    out << ',' << r.seed << ',';
    put_value(out, r.clean_mse);
    out << ',';
    put_value(out, r.attacked_mse);
    out << ',';
    put_value(out, r.mse_degradation_pct);
    out << ',';
    put_value(out, r.clean_mae);
    out << ',';
    put_value(out, r.attacked_mae);
    out << ',';
    put_value(out, r.mae_degradation_pct);
    out << ',' << (r.tuap_verified ? 1 : 0) << ',' << sanitize(r.violation) << '\n';
}

}  // namespace

void emit_report_csv(const std::vector<AttackReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << kReportHeader << '\n';
    for (const auto& r : reports) write_report_row(out, r);
}

void emit_report_json(const std::vector<AttackReport>& reports, const std::string& path) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["dataset"] = r.dataset;
        j["surrogate"] = r.surrogate;
        j["target"] = r.target;
        j["method"] = r.method;
        j["epsilon"] = r.epsilon;
        j["steps"] = r.steps;
        j["step_size"] = r.step_size;
        j["decay"] = r.decay;
        j["seed"] = r.seed;
        j["clean_mse"] = r.clean_mse;
        j["attacked_mse"] = r.attacked_mse;
        j["mse_degradation_pct"] = r.mse_degradation_pct;
        j["clean_mae"] = r.clean_mae;
        j["attacked_mae"] = r.attacked_mae;
        j["mae_degradation_pct"] = r.mae_degradation_pct;
        j["tuap_verified"] = r.tuap_verified;
        j["violation"] = r.violation;
        arr.push_back(std::move(j));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << arr.dump(1) << '\n';
}

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("sweep: cannot write " + path);
    out << "axis,value," << kReportHeader << '\n';
    for (const auto& row : rows) {
        out << axis_name(row.axis) << ',';
        put_value(out, row.value);
        out << ',';
        write_report_row(out, row.report);
    }
}

void emit_plotdata(const ForecastModel& model, const WindowedDataset& data,
                   const PerturbationSeries& series, long sample,
                   const std::string& path) {
    auto x = data.input(sample);
    auto delta = slice(series, sample);
    auto xa = Tensor::from(x.shape(), x.values());
    for (size_t i = 0; i < xa.values().size(); ++i)
        xa.mutable_values()[i] += delta.values()[i];

    auto clean_pred = model.predict(x);
    auto adv_pred = model.predict(xa);
    auto y = data.target(sample);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("plotdata: cannot write " + path);
    out << "sample,segment,step,variable,clean,perturbed,truth\n";
    const long D = data.dim();
    const auto& names = data.series().variable_names;
    for (long l = 0; l < data.lookback(); ++l) {
        for (long d = 0; d < D; ++d) {
            out << sample << ",input," << (l + 1) << ',' << names[d] << ',';
            put_value(out, x.at(l, d));
            out << ',';
            put_value(out, xa.at(l, d));
            out << ',';
            put_value(out, x.at(l, d));
            out << '\n';
        }
    }
    for (long h = 0; h < data.horizon(); ++h) {
        for (long d = 0; d < D; ++d) {
            out << sample << ",forecast," << (h + 1) << ',' << names[d] << ',';
            put_value(out, clean_pred.at(h, d));
            out << ',';
            put_value(out, adv_pred.at(h, d));
            out << ',';
            put_value(out, y.at(h, d));
            out << '\n';
        }
    }
}

}  // namespace tsattack
