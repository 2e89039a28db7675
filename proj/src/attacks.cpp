#include "tsattack/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsattack/rng.hpp"

namespace tsattack {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> vec_add(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

std::vector<double> vec_sub(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "fgsm") return Method::fgsm;
    if (name == "bim") return Method::bim;
    if (name == "pgd") return Method::pgd;
    if (name == "mi_fgsm") return Method::mi_fgsm;
    if (name == "atsg") return Method::atsg;
    if (name == "tca") return Method::tca;
    if (name == "tgsm") return Method::tgsm;
    if (name == "mi_tgam") return Method::mi_tgam;
    throw std::invalid_argument("attack: unknown method \"" + name + "\"");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::fgsm: return "fgsm";
        case Method::bim: return "bim";
        case Method::pgd: return "pgd";
        case Method::mi_fgsm: return "mi_fgsm";
        case Method::atsg: return "atsg";
        case Method::tca: return "tca";
        case Method::tgsm: return "tgsm";
        case Method::mi_tgam: return "mi_tgam";
    }
    throw std::logic_error("attack: bad method tag");
}

bool is_sample_level(Method m) {
    return m != Method::tgsm && m != Method::mi_tgam;
}

void AttackConfig::validate() const {
    // epsilon == 0 is the null attack, kept as an experiment control
    if (epsilon < 0) throw std::invalid_argument("attack: epsilon must be >= 0");
    if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
    if (epsilon > 0 && (!(step_size > 0) || step_size > epsilon))
        throw std::invalid_argument("attack: step_size must be in (0, epsilon]");
    if (decay < 0) throw std::invalid_argument("attack: decay must be >= 0");
}

Tensor budget(const Tensor& x, double epsilon) {
    std::vector<double> b(x.values().size());
    for (size_t i = 0; i < b.size(); ++i) b[i] = epsilon * std::abs(x.values()[i]);
    return Tensor::from(x.shape(), std::move(b));
}

Tensor clip_rel(const Tensor& delta, const Tensor& bound) {
    if (delta.shape() != bound.shape())
        throw std::invalid_argument("clip_rel: shape mismatch");
    std::vector<double> out(delta.values().size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(delta.values()[i], -bound.values()[i], bound.values()[i]);
    return Tensor::from(delta.shape(), std::move(out));
}

Tensor tca_clip(const Tensor& x, const Tensor& delta, const Tensor& bound) {
    bool x_nonzero = false;
    for (double v : x.values())
        if (v != 0.0) {
            x_nonzero = true;
            break;
        }
    if (!x_nonzero) return clip_rel(delta, bound);

    const double sim_plus = cosine(x.values(), vec_add(x.values(), bound.values()));
    const double sim_minus = cosine(x.values(), vec_sub(x.values(), bound.values()));
    const double sim_delta = cosine(x.values(), vec_add(x.values(), delta.values()));

    if (sim_plus > sim_minus && sim_plus > sim_delta) return bound;
    if (sim_minus > sim_plus && sim_minus > sim_delta) {
        std::vector<double> neg(bound.values().size());
        for (size_t i = 0; i < neg.size(); ++i) neg[i] = -bound.values()[i];
        return Tensor::from(bound.shape(), std::move(neg));
    }
    return clip_rel(delta, bound);
}

Tensor input_gradient(const ForecastModel& model, const Tensor& x, const Tensor& y,
                      bool use_mae) {
    auto xg = Tensor::from(x.shape(), x.values(), /*requires_grad=*/true);
    model.zero_grad();
    auto loss = use_mae ? mae_loss(model.predict(xg), y) : mse_loss(model.predict(xg), y);
    loss.backward();
    return Tensor::from(x.shape(), xg.grad());
}

Tensor fgsm(const ForecastModel& model, const Tensor& x, const Tensor& y,
            double epsilon) {
    auto g = input_gradient(model, x, y);
    auto b = budget(x, epsilon);
    std::vector<double> d(g.values().size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = b.values()[i] * sign(g.values()[i]);
    return Tensor::from(x.shape(), std::move(d));
}

Tensor atsg(const ForecastModel& model, const Tensor& x, const Tensor& y,
            double epsilon) {
    auto g = input_gradient(model, x, y, /*use_mae=*/true);
    auto b = budget(x, epsilon);
    std::vector<double> d(g.values().size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = b.values()[i] * sign(g.values()[i]);
    return Tensor::from(x.shape(), std::move(d));
}

namespace {

enum class Clip { box, cosine };

// Shared iterative loop: BIM, PGD (random start), MI-FGSM (momentum) and TCA
// (cosine clip) differ only in the start point, the direction source and the
// clip rule.
Tensor iterate(const ForecastModel& model, const Tensor& x, const Tensor& y,
               const AttackConfig& cfg, std::vector<double> delta, double mu,
               Clip clip_kind) {
    const auto& xv = x.values();
    auto b = budget(x, cfg.epsilon);
    std::vector<double> momentum(xv.size(), 0.0);
    for (long k = 0; k < cfg.steps; ++k) {
        auto xa = Tensor::from(x.shape(), vec_add(xv, delta));
        auto g = input_gradient(model, xa, y);
        const double* dir;
        if (mu >= 0.0) {
            double l1 = 0.0;
            for (double v : g.values()) l1 += std::abs(v);
            for (size_t i = 0; i < momentum.size(); ++i)
                momentum[i] = mu * momentum[i] + (l1 > 0.0 ? g.values()[i] / l1 : 0.0);
            dir = momentum.data();
        } else {
            dir = g.values().data();
        }
        std::vector<double> stepped(xv.size());
        for (size_t i = 0; i < stepped.size(); ++i)
            stepped[i] = delta[i] + cfg.step_size * std::abs(xv[i]) * sign(dir[i]);
        auto t = Tensor::from(x.shape(), std::move(stepped));
        delta = (clip_kind == Clip::box ? clip_rel(t, b) : tca_clip(x, t, b)).values();
    }
    return Tensor::from(x.shape(), std::move(delta));
}

}  // namespace

Tensor bim(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg) {
    return iterate(model, x, y, cfg, std::vector<double>(x.values().size(), 0.0),
                   /*mu=*/-1.0, Clip::box);
}

Tensor pgd(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg, std::uint64_t sample_seed) {
    Rng rng(sample_seed);
    auto b = budget(x, cfg.epsilon);
    std::vector<double> start(x.values().size());
    for (size_t i = 0; i < start.size(); ++i)
        start[i] = rng.uniform(-b.values()[i], b.values()[i]);
    return iterate(model, x, y, cfg, std::move(start), /*mu=*/-1.0, Clip::box);
}

Tensor mi_fgsm(const ForecastModel& model, const Tensor& x, const Tensor& y,
               const AttackConfig& cfg) {
    return iterate(model, x, y, cfg, std::vector<double>(x.values().size(), 0.0),
                   cfg.decay, Clip::box);
}

Tensor tca(const ForecastModel& model, const Tensor& x, const Tensor& y,
           const AttackConfig& cfg) {
    return iterate(model, x, y, cfg, std::vector<double>(x.values().size(), 0.0),
                   /*mu=*/-1.0, Clip::cosine);
}

std::vector<SamplePerturbation> attack_set(const ForecastModel& model,
                                           const WindowedDataset& data,
                                           const AttackConfig& cfg) {
    cfg.validate();
    if (!is_sample_level(cfg.method))
        throw std::invalid_argument("attack: " + method_name(cfg.method) +
                                    " is timestamp-unified; use the tuap module");
    std::vector<SamplePerturbation> out;
    out.reserve(static_cast<size_t>(data.sample_count()));
    for (long n = data.first_sample(); n <= data.last_sample(); ++n) {
        auto x = data.input(n);
        auto y = data.target(n);
        Tensor delta;
        switch (cfg.method) {
            case Method::fgsm: delta = fgsm(model, x, y, cfg.epsilon); break;
            case Method::bim: delta = bim(model, x, y, cfg); break;
            case Method::pgd:
                delta = pgd(model, x, y, cfg,
                            derive_seed(cfg.seed, "pgd/" + std::to_string(n)));
                break;
            case Method::mi_fgsm: delta = mi_fgsm(model, x, y, cfg); break;
            case Method::atsg: delta = atsg(model, x, y, cfg.epsilon); break;
            case Method::tca: delta = tca(model, x, y, cfg); break;
            default: throw std::logic_error("attack: unhandled method");
        }
        out.push_back({n, std::move(delta)});
    }
    return out;
}

}  // namespace tsattack
