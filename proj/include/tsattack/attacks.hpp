#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsattack/dataset.hpp"
#include "tsattack/models.hpp"
#include "tsattack/tensor.hpp"

namespace tsattack {

// Sample-level attacks: each sample gets an independent perturbation, so
// overlapping windows generally receive contradictory values for a shared
// timestamp. All methods use the relative per-element budget eps * |x| in
// place of a scalar eps-ball, and sign(0) = 0 throughout.

enum class Method {
    fgsm,
    bim,
    pgd,
    mi_fgsm,
    atsg,
    tca,
    // timestamp-unified methods, generated by the tuap module
    tgsm,
    mi_tgam,
};

Method parse_method(const std::string& name);
std::string method_name(Method m);
// True for the per-sample baselines that need unification before they
// satisfy the timestamp-consistency constraint.
bool is_sample_level(Method m);

struct AttackConfig {
    double epsilon = 0.1;   // relative budget
    long steps = 10;        // K
    double step_size = 0.01;  // alpha, relative per-step magnitude
    double decay = 1.0;     // mu, momentum factor
    Method method = Method::mi_tgam;
    std::uint64_t seed = 0;
    // use the signed observation as the update direction factor instead of
    // its magnitude (the literal single-step form; see tuap)
    bool signed_value_factor = false;
    // PGD-style random start inside the budget for mi_tgam
    bool random_init = false;

    void validate() const;
};

struct SamplePerturbation {
    long sample = 0;  // n
    Tensor delta;     // L x D, normalized units
};

// B[l][d] = eps * |x[l][d]|
Tensor budget(const Tensor& x, double epsilon);
// Clamp each element of delta into [-B, +B].
Tensor clip_rel(const Tensor& delta, const Tensor& bound);
// Three-way cosine-similarity clip: returns +B, -B, or clip_rel(delta, B),
// whichever endpoint keeps x + candidate most similar to x (strictly), with
// ties falling to the clipped delta.
Tensor tca_clip(const Tensor& x, const Tensor& delta, const Tensor& bound);

// d/dx loss(f(x), y); loss is MSE, or MAE when use_mae is set.
Tensor input_gradient(const ForecastModel& model, const Tensor& x, const Tensor& y,
                      bool use_mae = false);

Tensor fgsm(const ForecastModel& model, const Tensor& x, const Tensor& y,
            double epsilon);
Tensor bim(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg);
Tensor pgd(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg, std::uint64_t sample_seed);
Tensor mi_fgsm(const ForecastModel& model, const Tensor& x, const Tensor& y,
               const AttackConfig& cfg);
// fgsm with the MAE attack loss
Tensor atsg(const ForecastModel& model, const Tensor& x, const Tensor& y,
            double epsilon);
Tensor tca(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg);

// One independent perturbation per sample, ordered by sample index.
std::vector<SamplePerturbation> attack_set(const ForecastModel& model,
                                           const WindowedDataset& data,
                                           const AttackConfig& cfg);

}  // namespace tsattack
