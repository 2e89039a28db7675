#include "tsattack/models.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "tsattack/rng.hpp"

namespace tsattack {

namespace {

constexpr int kCheckpointVersion = 1;

Tensor init_weight(long in_dim, long out_dim, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::vector<double> v(static_cast<size_t>(in_dim * out_dim));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from({in_dim, out_dim}, std::move(v), /*requires_grad=*/true);
}

Tensor init_bias(long n) { return Tensor::zeros({n}, /*requires_grad=*/true); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

Arch parse_arch(const std::string& name) {
    if (name == "linear") return Arch::linear;
    if (name == "mlp") return Arch::mlp;
    if (name == "rnn_lite") return Arch::rnn_lite;
    throw std::invalid_argument("model: unknown architecture \"" + name + "\"");
}

std::string arch_name(Arch arch) {
    switch (arch) {
        case Arch::linear: return "linear";
        case Arch::mlp: return "mlp";
        case Arch::rnn_lite: return "rnn_lite";
    }
    throw std::logic_error("model: bad architecture tag");
}

ForecastModel::ForecastModel(const ModelSpec& spec) : spec_(spec) {
    if (spec_.lookback < 1 || spec_.horizon < 1 || spec_.dim < 1 || spec_.hidden < 1)
        throw std::invalid_argument("model: dimensions must be positive");
    Rng rng(spec_.seed);
    const long in = spec_.lookback * spec_.dim;
    const long out = spec_.horizon * spec_.dim;
    switch (spec_.arch) {
        case Arch::linear:
            params_.emplace_back("w", init_weight(in, out, rng));
            params_.emplace_back("b", init_bias(out));
            break;
        case Arch::mlp:
            params_.emplace_back("w1", init_weight(in, spec_.hidden, rng));
            params_.emplace_back("b1", init_bias(spec_.hidden));
            params_.emplace_back("w2", init_weight(spec_.hidden, out, rng));
            params_.emplace_back("b2", init_bias(out));
            break;
        case Arch::rnn_lite:
            params_.emplace_back("w_xh", init_weight(spec_.dim, spec_.hidden, rng));
            params_.emplace_back("w_hh", init_weight(spec_.hidden, spec_.hidden, rng));
            params_.emplace_back("b_h", init_bias(spec_.hidden));
            params_.emplace_back("w_hy", init_weight(spec_.hidden, out, rng));
            params_.emplace_back("b_y", init_bias(out));
            break;
    }
}

Tensor ForecastModel::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw std::logic_error("model: missing parameter " + name);
}

Tensor ForecastModel::predict(const Tensor& x) const {
    if (x.shape() != std::vector<long>{spec_.lookback, spec_.dim})
        throw std::invalid_argument("model: input shape mismatch, expected [" +
                                    std::to_string(spec_.lookback) + "," +
                                    std::to_string(spec_.dim) + "]");
    switch (spec_.arch) {
        case Arch::linear: {
            auto flat = reshape(x, {1, spec_.lookback * spec_.dim});
            return reshape(affine(flat, param("w"), param("b")),
                           {spec_.horizon, spec_.dim});
        }
        case Arch::mlp: {
            auto flat = reshape(x, {1, spec_.lookback * spec_.dim});
            auto h = tanh(affine(flat, param("w1"), param("b1")));
            return reshape(affine(h, param("w2"), param("b2")),
                           {spec_.horizon, spec_.dim});
        }
        case Arch::rnn_lite: {
            auto w_xh = param("w_xh");
            auto w_hh = param("w_hh");
            auto b_h = param("b_h");
            Tensor h = Tensor::zeros({1, spec_.hidden});
            for (long t = 0; t < spec_.lookback; ++t) {
                auto xt = slice_rows(x, t, t + 1);
                h = tanh(bias_add(add(matmul(xt, w_xh), matmul(h, w_hh)), b_h));
            }
            return reshape(affine(h, param("w_hy"), param("b_y")),
                           {spec_.horizon, spec_.dim});
        }
    }
    throw std::logic_error("model: bad architecture tag");
}

void ForecastModel::zero_grad() const {
    for (const auto& [name, t] : params_) t.zero_grad();
}

void ForecastModel::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "tsattack-checkpoint";
    j["version"] = kCheckpointVersion;
    j["arch"] = arch_name(spec_.arch);
    j["lookback"] = spec_.lookback;
    j["horizon"] = spec_.horizon;
    j["dim"] = spec_.dim;
    j["hidden"] = spec_.hidden;
    j["seed"] = spec_.seed;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, t] : params_) params[name] = t.values();
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << j.dump(1) << '\n';
}

ForecastModel ForecastModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "tsattack-checkpoint")
        throw std::runtime_error("checkpoint: unrecognized format in " + path);
    if (j.value("version", 0) != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    ModelSpec spec;
    spec.arch = parse_arch(j.at("arch").get<std::string>());
    spec.lookback = j.at("lookback").get<long>();
    spec.horizon = j.at("horizon").get<long>();
    spec.dim = j.at("dim").get<long>();
    spec.hidden = j.at("hidden").get<long>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    ForecastModel model(spec);
    for (auto& [name, t] : model.params_) {
        auto stored = j.at("params").at(name).get<std::vector<double>>();
        if (stored.size() != t.values().size())
            throw std::runtime_error("checkpoint: parameter " + name + " has " +
                                     std::to_string(stored.size()) + " values, expected " +
                                     std::to_string(t.values().size()));
        t.mutable_values() = std::move(stored);
    }
    return model;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    return squared_error(pred, target);
}

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
    return absolute_error(pred, target);
}

TrainResult train(ForecastModel& model, const WindowedDataset& data,
                  const TrainConfig& config) {
    if (data.sample_count() < 1) throw std::invalid_argument("train: empty dataset");
    if (config.epochs < 0 || config.batch_size < 1 || config.learning_rate < 0)
        throw std::invalid_argument("train: bad config");

    Rng rng(config.seed);
    std::vector<long> order(static_cast<size_t>(data.sample_count()));
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = data.first_sample() + static_cast<long>(i);

    TrainResult result;
    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with our own engine mapping, for a portable order
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        double epoch_loss = 0.0;
        long seen = 0;
        size_t pos = 0;
        while (pos < order.size()) {
            const size_t batch_end =
                std::min(pos + static_cast<size_t>(config.batch_size), order.size());
            const double batch_n = static_cast<double>(batch_end - pos);
            model.zero_grad();
            for (; pos < batch_end; ++pos) {
                auto loss = mse_loss(model.predict(data.input(order[pos])),
                                     data.target(order[pos]));
                loss.backward();
                epoch_loss += loss.value();
                ++seen;
            }
            if (!std::isfinite(epoch_loss)) {
                long last_finite = epoch - 1;
                throw std::runtime_error(
                    "train: loss diverged at epoch " + std::to_string(epoch) +
                    (last_finite >= 0
                         ? "; last finite epoch " + std::to_string(last_finite) +
                               " had MSE " + std::to_string(result.epoch_mse.back())
                         : "; no finite epoch completed"));
            }
            const double scale = config.learning_rate / batch_n;
            for (auto& [name, t] : model.params()) {
                auto& v = t.mutable_values();
                const auto& g = t.grad();
                for (size_t i = 0; i < v.size(); ++i) v[i] -= scale * g[i];
                if (!all_finite(v))
                    throw std::runtime_error("train: parameter " + name +
                                             " went non-finite at epoch " +
                                             std::to_string(epoch));
            }
        }
        result.epoch_mse.push_back(epoch_loss / static_cast<double>(seen));
    }
    model.zero_grad();
    return result;
}

}  // namespace tsattack
