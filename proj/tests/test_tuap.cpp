#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsattack/rng.hpp"
#include "tsattack/tuap.hpp"

using namespace tsattack;

namespace {

RawSeries series_from(std::vector<double> values, long D) {
    RawSeries s;
    s.cols = D;
    s.rows = static_cast<long>(values.size()) / D;
    s.values = std::move(values);
    for (long d = 0; d < D; ++d) s.variable_names.push_back("v" + std::to_string(d + 1));
    return s;
}

RawSeries sine_series(long T, long D, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(T * D);
    for (long t = 0; t < T; ++t)
        for (long d = 0; d < D; ++d)
            v[t * D + d] =
                std::sin(2.0 * 3.14159265358979 * (t + 3.0 * d) / 12.0) +
                rng.uniform(-0.05, 0.05);
    return series_from(std::move(v), D);
}

ForecastModel trained_toy(const WindowedDataset& data, std::uint64_t seed) {
    ForecastModel m({Arch::mlp, data.lookback(), data.horizon(), data.dim(), 8, seed});
    train(m, data, {25, 0.1, 8, seed + 1});
    return m;
}

GradientCache random_cache(long tau, long last, long L, long D, std::uint64_t seed) {
    GradientCache cache(tau, last, L, D, 0);
    Rng rng(seed);
    for (long n = tau; n <= last; ++n) {
        std::vector<double> g(static_cast<size_t>(L * D));
        for (auto& v : g) v = rng.uniform(-3, 3);
        cache.set(n, std::move(g));
    }
    return cache;
}

// Brute-force oracle: sum the cache rows named by overlap_set directly.
std::vector<double> accumulate_brute(const GradientCache& cache, long t) {
    std::vector<double> g(static_cast<size_t>(cache.dim), 0.0);
    for (auto [i, l] : overlap_set(t, cache.first_sample, cache.last_sample,
                                   cache.lookback))
        for (long d = 0; d < cache.dim; ++d)
            g[d] += cache.at(i)[(l - 1) * cache.dim + d];
    return g;
}

bool series_within_budget(const PerturbationSeries& s, const WindowedDataset& data) {
    for (long t = s.first_t; t <= s.last_t; ++t)
        for (long d = 0; d < s.dim; ++d)
            if (std::abs(s.row(t)[d]) > s.epsilon * std::abs(data.value(t, d)) + 1e-9)
                return false;
    return true;
}

std::vector<SamplePerturbation> slices_of(const PerturbationSeries& s) {
    std::vector<SamplePerturbation> out;
    for (long n = s.first_sample(); n <= s.last_sample(); ++n)
        out.push_back({n, slice(s, n)});
    return out;
}

}  // namespace

TEST_CASE("accumulate equals the overlap_set sum") {
    SUBCASE("single sample is the identity") {
        auto cache = random_cache(4, 4, 3, 2, 1);
        auto g = accumulate(cache);
        CHECK(g.first_t == 4);
        CHECK(g.last_t == 6);
        for (long t = 4; t <= 6; ++t)
            for (long d = 0; d < 2; ++d)
                CHECK(g.row(t)[d] == cache.at(4)[(t - 4) * 2 + d]);
    }
    SUBCASE("all-ones cache counts overlaps") {
        // tau=1, L=2, N=3: counts 1,2,2,1
        GradientCache cache(1, 3, 2, 1, 0);
        for (long n = 1; n <= 3; ++n) cache.set(n, {1.0, 1.0});
        auto g = accumulate(cache);
        CHECK(g.g == std::vector<double>{1.0, 2.0, 2.0, 1.0});
    }
    SUBCASE("random caches across boundary regimes") {
        long case_id = 0;
        for (long tau : {1L, 7L}) {
            for (long L : {1L, 2L, 3L, 5L}) {
                for (long count : {1L, 2L, 3L, 5L, 8L}) {  // N<L, N=L, N>L
                    const long last = tau + count - 1;
                    auto cache = random_cache(tau, last, L, 2, 100 + ++case_id);
                    auto g = accumulate(cache);
                    for (long t = tau; t <= last + L - 1; ++t) {
                        auto expect = accumulate_brute(cache, t);
                        for (long d = 0; d < 2; ++d)
                            CHECK(g.row(t)[d] == expect[d]);  // exact
                    }
                }
            }
        }
    }
    SUBCASE("missing sample is reported") {
        GradientCache cache(1, 3, 2, 1, 0);
        cache.set(1, {1.0, 1.0});
        cache.set(3, {1.0, 1.0});
        CHECK_THROWS_WITH_AS(accumulate(cache), "accumulate: cache is missing sample 2",
                             std::invalid_argument);
    }
}

TEST_CASE("slice") {
    auto s = make_series(3, 6, 4, 2, 0.1);  // t in [3, 9]
    Rng rng(5);
    for (auto& v : s.p) v = rng.uniform(-1, 1);

    auto first = slice(s, 3);
    CHECK(first.shape() == std::vector<long>{4, 2});
    for (long l = 0; l < 4; ++l)
        for (long d = 0; d < 2; ++d) CHECK(first.at(l, d) == s.row(3 + l)[d]);

    auto last = slice(s, 6);
    for (long l = 0; l < 4; ++l)
        for (long d = 0; d < 2; ++d) CHECK(last.at(l, d) == s.row(6 + l)[d]);

    // adjacency identity, exact
    for (long n = 3; n < 6; ++n) {
        auto a = slice(s, n);
        auto b = slice(s, n + 1);
        for (long l = 0; l + 1 < 4; ++l)
            for (long d = 0; d < 2; ++d) CHECK(a.at(l + 1, d) == b.at(l, d));
    }

    CHECK_THROWS_AS(slice(s, 2), std::out_of_range);
    CHECK_THROWS_AS(slice(s, 7), std::out_of_range);
}

TEST_CASE("tgsm") {
    WindowSpec spec{4, 2};
    auto data = build_windows(sine_series(20, 1, 11), spec);
    auto model = trained_toy(data, 3);

    SUBCASE("single-sample set matches the timestamp-by-timestamp reference") {
        auto tiny = build_windows(sine_series(6, 1, 12), spec);
        REQUIRE(tiny.sample_count() == 1);
        auto series = tgsm(model, tiny, 0.1);

        const long n = tiny.first_sample();
        auto x = tiny.input(n);
        auto y = tiny.target(n);
        std::vector<double> p_ref(4, 0.0);
        for (long l = 0; l < 4; ++l) {
            std::vector<double> xv = x.values();
            for (long r = 0; r < l; ++r) xv[r] += p_ref[r];
            auto g = input_gradient(model, Tensor::from({4, 1}, std::move(xv)), y);
            double gl = g.values()[l];
            double factor = std::abs(tiny.value(n + l, 0));
            double sgn = gl > 0 ? 1.0 : (gl < 0 ? -1.0 : 0.0);
            p_ref[l] = 0.1 * sgn * factor;
        }
        auto d = slice(series, n);
        CHECK(d.values() == p_ref);
    }
    SUBCASE("zero-gradient model yields a zero series") {
        ForecastModel flat({Arch::linear, 4, 2, 1, 8, 0});
        for (auto& [name, t] : flat.params())
            for (auto& v : t.mutable_values()) v = 0.0;
        auto constant = build_windows(
            series_from({0.4, 0.5, 0.4, 0.5, 0.4, 0.5, 0.4, 0.5, 0.4, 0.5}, 1), spec);
        auto series = tgsm(flat, constant, 0.1);
        // prediction is 0 regardless of input, so the input gradient vanishes
        for (double v : series.p) CHECK(v == 0.0);
    }
    SUBCASE("budget holds at every timestamp") {
        auto series = tgsm(model, data, 0.1);
        CHECK(series_within_budget(series, data));
        // and perturbations are generically active
        double norm = 0;
        for (double v : series.p) norm += std::abs(v);
        CHECK(norm > 0);
    }
    SUBCASE("verifies as temporally consistent") {
        auto series = tgsm(model, data, 0.1);
        auto report = verify_tuap(slices_of(series), data, 0.1);
        CHECK(report.ok());
    }
}

TEST_CASE("mi_tgam") {
    WindowSpec spec{4, 2};
    auto data = build_windows(sine_series(20, 2, 21), spec);
    auto model = trained_toy(data, 7);

    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.steps = 5;
    cfg.step_size = 0.02;
    cfg.decay = 1.0;
    cfg.method = Method::mi_tgam;

    SUBCASE("single sample, K=1 reduces to fgsm with step alpha") {
        auto tiny = build_windows(sine_series(6, 2, 22), spec);
        REQUIRE(tiny.sample_count() == 1);
        for (double mu : {0.0, 0.5, 1.0, 3.0}) {
            AttackConfig one = cfg;
            one.steps = 1;
            one.step_size = 0.02;
            one.decay = mu;
            auto series = mi_tgam(model, tiny, one);
            auto d = slice(series, tiny.first_sample());
            auto f = fgsm(model, tiny.input(tiny.first_sample()),
                          tiny.target(tiny.first_sample()), 0.02);
            CHECK(d.values() == f.values());
        }
    }
    SUBCASE("mu=0, K=1 equals the sign of the accumulated clean gradient") {
        AttackConfig one = cfg;
        one.steps = 1;
        one.decay = 0.0;
        auto series = mi_tgam(model, data, one);

        GradientCache cache(data.first_sample(), data.last_sample(), 4, 2, 0);
        for (long n = data.first_sample(); n <= data.last_sample(); ++n)
            cache.set(n,
                      input_gradient(model, data.input(n), data.target(n)).values());
        auto g = accumulate(cache);
        for (long t = series.first_t; t <= series.last_t; ++t) {
            for (long d = 0; d < 2; ++d) {
                double gl = g.row(t)[d];
                double sgn = gl > 0 ? 1.0 : (gl < 0 ? -1.0 : 0.0);
                double expect = one.step_size * sgn * std::abs(data.value(t, d));
                CHECK(series.row(t)[d] == expect);
            }
        }
    }
    SUBCASE("fixed-sign gradients saturate exactly at K*alpha = eps") {
        // positive two-weight linear model on positive data keeps every
        // residual and gradient positive through all iterations
        std::vector<double> vals;
        Rng rng(9);
        for (long t = 0; t < 12; ++t) vals.push_back(rng.uniform(1.2, 1.9));
        auto up = build_windows(series_from(std::move(vals), 1), WindowSpec{2, 1});
        ForecastModel lin({Arch::linear, 2, 1, 1, 2, 0});
        lin.params()[0].second.mutable_values() = {1.5, 1.5};  // pred > 3.6 > y
        lin.params()[1].second.mutable_values() = {0.0};

        AttackConfig sat;
        sat.epsilon = 0.125;              // power-of-two budget:
        sat.step_size = 0.03125;          // 4 exact steps land on the bound
        sat.steps = 4;
        sat.decay = 1.0;
        auto series = mi_tgam(lin, up, sat);
        for (long t = series.first_t; t <= series.last_t; ++t)
            CHECK(std::abs(series.row(t)[0]) ==
                  sat.epsilon * std::abs(up.value(t, 0)));
    }
    SUBCASE("budget holds after every iteration") {
        for (long k = 1; k <= cfg.steps; ++k) {
            AttackConfig partial = cfg;
            partial.steps = k;
            CHECK(series_within_budget(mi_tgam(model, data, partial), data));
        }
    }
    SUBCASE("zero observations get zero perturbation") {
        std::vector<double> vals = {0.5, 0.0, 0.7, 0.2, 0.0, 0.6, 0.1, 0.9, 0.0, 0.3};
        auto zeroes = build_windows(series_from(std::move(vals), 1), spec);
        ForecastModel narrow({Arch::mlp, 4, 2, 1, 8, 23});
        auto series = mi_tgam(narrow, zeroes, cfg);
        for (long t = series.first_t; t <= series.last_t; ++t)
            if (zeroes.value(t, 0) == 0.0) CHECK(series.row(t)[0] == 0.0);
    }
    SUBCASE("determinism, including random init") {
        AttackConfig r = cfg;
        r.random_init = true;
        r.seed = 1234;
        auto a = mi_tgam(model, data, r);
        auto b = mi_tgam(model, data, r);
        CHECK(a.p == b.p);
        CHECK(series_within_budget(a, data));
    }
    SUBCASE("one gradient pass per sample per iteration") {
        reset_backward_invocations();
        mi_tgam(model, data, cfg);
        CHECK(backward_invocations() ==
              static_cast<std::uint64_t>(cfg.steps * data.sample_count()));
    }
    SUBCASE("verifies as temporally consistent") {
        auto series = mi_tgam(model, data, cfg);
        CHECK(verify_tuap(slices_of(series), data, cfg.epsilon).ok());
    }
}

TEST_CASE("unify_baseline") {
    WindowSpec spec{3, 2};
    auto data = build_windows(sine_series(14, 1, 31), spec);
    auto model = trained_toy(data, 13);

    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.steps = 3;
    cfg.step_size = 0.04;
    cfg.method = Method::fgsm;

    auto per_sample = attack_set(model, data, cfg);

    SUBCASE("single sample passes through") {
        auto tiny = build_windows(sine_series(5, 1, 32), spec);
        REQUIRE(tiny.sample_count() == 1);
        auto one = attack_set(model, tiny, cfg);
        auto series = unify_baseline(one, tiny.first_sample(), tiny.last_sample(), 3, 1,
                                     cfg.epsilon, 99);
        CHECK(slice(series, tiny.first_sample()).values() == one[0].delta.values());
    }
    SUBCASE("identical deltas survive any seed") {
        auto uniform = per_sample;
        // overwrite sample deltas so every timestamp sees the same value in
        // every overlapping window
        for (auto& sp : uniform) {
            std::vector<double> v(static_cast<size_t>(3));
            for (long l = 0; l < 3; ++l)
                v[l] = 0.01 * static_cast<double>(sp.sample + l);  // depends on t only
            sp.delta = Tensor::from({3, 1}, std::move(v));
        }
        auto s1 = unify_baseline(uniform, data.first_sample(), data.last_sample(), 3, 1,
                                 cfg.epsilon, 1);
        auto s2 = unify_baseline(uniform, data.first_sample(), data.last_sample(), 3, 1,
                                 cfg.epsilon, 2);
        CHECK(s1.p == s2.p);
        for (long t = s1.first_t; t <= s1.last_t; ++t)
            CHECK(s1.row(t)[0] == 0.01 * static_cast<double>(t));
    }
    SUBCASE("seed determinism and source membership") {
        auto a = unify_baseline(per_sample, data.first_sample(), data.last_sample(), 3,
                                1, cfg.epsilon, 7);
        auto b = unify_baseline(per_sample, data.first_sample(), data.last_sample(), 3,
                                1, cfg.epsilon, 7);
        CHECK(a.p == b.p);
        // every unified value comes from one of the overlapping samples
        for (long t = a.first_t; t <= a.last_t; ++t) {
            bool found = false;
            for (auto [i, l] : data.overlaps(t))
                if (per_sample[i - data.first_sample()].delta.at(l - 1, 0) == a.row(t)[0])
                    found = true;
            CHECK(found);
        }
    }
    SUBCASE("unified baseline verifies as consistent and within budget") {
        auto series = unify_baseline(per_sample, data.first_sample(), data.last_sample(),
                                     3, 1, cfg.epsilon, 7);
        CHECK(verify_tuap(slices_of(series), data, cfg.epsilon).ok());
    }
}

TEST_CASE("verify_tuap") {
    WindowSpec spec{3, 2};
    auto data = build_windows(sine_series(14, 1, 41), spec);
    auto model = trained_toy(data, 17);

    SUBCASE("raw sample-level attack fails with a located violation") {
        AttackConfig cfg;
        cfg.epsilon = 0.1;
        cfg.method = Method::fgsm;
        auto per_sample = attack_set(model, data, cfg);
        auto report = verify_tuap(per_sample, data, cfg.epsilon);
        CHECK_FALSE(report.consistent);
        CHECK(report.within_budget);
        REQUIRE(report.first_violation.has_value());
        auto v = *report.first_violation;
        CHECK(v.kind == TuapViolation::Kind::inconsistency);
        // the reported coordinates really do disagree
        const auto& a = per_sample[v.sample - data.first_sample()];
        const auto& b = per_sample[v.sample + 1 - data.first_sample()];
        CHECK(a.delta.at(v.t - a.sample, v.d) != b.delta.at(v.t - b.sample, v.d));
    }
    SUBCASE("budget violation is located") {
        auto series = make_series(data.first_sample(), data.last_sample(), 3, 1, 0.1);
        auto deltas = slices_of(series);  // all zeros: consistent
        // push one element to 2 eps |v|
        long n = data.first_sample() + 1;
        auto v = deltas[1].delta.values();
        v[2] = 0.2 * std::abs(data.value(n + 2, 0)) + 1e-6;
        deltas[1].delta = Tensor::from({3, 1}, v);
        auto report = verify_tuap(deltas, data, 0.1);
        CHECK_FALSE(report.within_budget);
        REQUIRE(report.first_violation.has_value());
        CHECK(report.first_violation->kind == TuapViolation::Kind::budget);
        CHECK(report.first_violation->t == n + 2);
        CHECK(report.first_violation->d == 0);
        CHECK_FALSE(report.first_violation->describe().empty());
    }
}

TEST_CASE("series csv export") {
    WindowSpec spec{3, 2};
    auto raw = sine_series(14, 2, 51);
    auto stats = compute_stats(raw);
    auto data = build_windows(normalize(raw, stats), spec);
    auto model = trained_toy(data, 19);
    auto series = tgsm(model, data, 0.1);

    write_series_csv(series, data, "/tmp/tuap_norm.csv");
    write_series_csv(series, data, "/tmp/tuap_raw.csv", &stats);

    std::ifstream in("/tmp/tuap_norm.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "timestamp,variable,clean_value,perturbation,perturbed_value");
    long rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == series.timestamps() * series.dim);

    // denormalized perturbation scales by the variable's std
    std::ifstream rin("/tmp/tuap_raw.csv");
    std::getline(rin, line);
    REQUIRE(std::getline(rin, line));
    auto last_comma = line.rfind(',');
    auto mid = line.substr(0, last_comma);
    auto p0 = mid.substr(mid.rfind(',') + 1);
    double raw_pert = std::stod(p0);
    CHECK(raw_pert ==
          doctest::Approx(series.row(series.first_t)[0] * stats.stddev[0])
              .epsilon(1e-12));
}
