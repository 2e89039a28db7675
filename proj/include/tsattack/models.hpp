#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsattack/dataset.hpp"
#include "tsattack/tensor.hpp"

namespace tsattack {

// Desk-scale differentiable forecasters: L x D history in, H x D forecast out.
//
//   linear    flatten(L*D) -> H*D direct map
//   mlp       flatten -> tanh hidden layer -> H*D
//   rnn_lite  single tanh recurrent cell unrolled over L steps, linear head
//
// tanh everywhere so gradient-oracle tests stay away from the relu kink.

enum class Arch { linear, mlp, rnn_lite };

Arch parse_arch(const std::string& name);
std::string arch_name(Arch arch);

struct ModelSpec {
    Arch arch = Arch::linear;
    long lookback = 48;
    long horizon = 24;
    long dim = 1;
    long hidden = 32;  // mlp / rnn_lite only
    std::uint64_t seed = 0;
};

class ForecastModel {
public:
    explicit ForecastModel(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }

    // Tape-recording forward pass; differentiable w.r.t. x and parameters.
    Tensor predict(const Tensor& x) const;

    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    void zero_grad() const;

    void save(const std::string& path) const;
    static ForecastModel load(const std::string& path);

private:
    ModelSpec spec_;
    std::vector<std::pair<std::string, Tensor>> params_;

    Tensor param(const std::string& name) const;
};

Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor mae_loss(const Tensor& pred, const Tensor& target);

struct TrainConfig {
    long epochs = 30;
    double learning_rate = 0.05;
    long batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> epoch_mse;  // running training loss per epoch
};

// Plain SGD on the MSE objective. Deterministic given the config seed; aborts
// if the loss goes non-finite, reporting the last finite epoch.
TrainResult train(ForecastModel& model, const WindowedDataset& data,
                  const TrainConfig& config);

}  // namespace tsattack
