#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsattack/rng.hpp"
#include "tsattack/tensor.hpp"

using namespace tsattack;

namespace {

bool grad_close(double a, double b) {
    return std::abs(a - b) <= 1e-7 + 1e-4 * std::max(std::abs(a), std::abs(b));
}

Tensor random_tensor(std::vector<long> shape, Rng& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
    long n = 1;
    for (long d : shape) n *= d;
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("elementwise forward") {
    auto a = Tensor::from({2}, {1.0, 2.0});
    auto b = Tensor::from({2}, {3.0, 4.0});
    auto c = add(a, b);
    CHECK(c.values() == std::vector<double>{4.0, 6.0});
    CHECK_FALSE(c.requires_grad());

    auto d = sub(b, a);
    CHECK(d.values() == std::vector<double>{2.0, 2.0});
    auto e = mul(a, b);
    CHECK(e.values() == std::vector<double>{3.0, 8.0});

    CHECK_THROWS_WITH_AS(add(a, Tensor::from({3}, {1, 2, 3})),
                         "add: shape mismatch [2] vs [3]", std::invalid_argument);
}

TEST_CASE("matmul identity") {
    auto I = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto m = Tensor::from({2, 2}, {1.5, -2.0, 3.25, 0.5});
    auto y = matmul(I, m);
    CHECK(y.values() == m.values());
    CHECK_THROWS_AS(matmul(m, Tensor::from({3, 1}, {1, 2, 3})), std::invalid_argument);
}

TEST_CASE("squared and absolute error") {
    auto p = Tensor::from({1}, {0.5});
    auto t = Tensor::from({1}, {0.0});
    CHECK(squared_error(p, t).value() == doctest::Approx(0.25).epsilon(1e-15));

    auto p4 = Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5});
    auto t4 = Tensor::zeros({2, 2});
    CHECK(squared_error(p4, t4).value() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(absolute_error(p4, t4).value() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("backward closed form") {
    // root = mean((w*x - y)^2), w=2, x=3, y=1 -> droot/dx = 2*w*(wx - y) = 20
    auto w = Tensor::from({1, 1}, {2.0});
    auto x = Tensor::from({1, 1}, {3.0}, /*requires_grad=*/true);
    auto y = Tensor::from({1, 1}, {1.0});
    auto loss = squared_error(matmul(w, x), y);
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("backward on unrelated leaf gives zeros") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    auto z = Tensor::from({2}, {5.0, 6.0}, true);
    auto loss = mean(mul(x, x));
    loss.backward();
    CHECK(z.grad() == std::vector<double>{0.0, 0.0});
    CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("repeated backward accumulates additively") {
    auto x = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    auto loss = mean(mul(x, x));
    loss.backward();
    auto once = x.grad();
    loss.backward();
    for (size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == 2.0 * once[i]);
    x.zero_grad();
    loss.backward();
    for (size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == once[i]);
}

TEST_CASE("backward rejects non-scalar root") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(mul(x, x).backward(), std::invalid_argument);
}

TEST_CASE("finite difference oracle basics") {
    auto sq = [](const Tensor& t) { return t.values()[0] * t.values()[0]; };
    auto g = finite_diff_gradient(sq, Tensor::from({1}, {3.0}), 1e-5);
    CHECK(g.values()[0] == doctest::Approx(6.0).epsilon(1e-6));

    auto total = [](const Tensor& t) {
        double s = 0;
        for (double v : t.values()) s += v;
        return s;
    };
    auto g2 = finite_diff_gradient(total, Tensor::from({2, 2}, {1, 2, 3, 4}), 1e-5);
    for (double v : g2.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(finite_diff_gradient(sq, Tensor::from({1}, {1.0}), 0.0),
                    std::invalid_argument);
}

TEST_CASE("two-layer mlp gradients match finite differences") {
    Rng rng(20240811);
    auto w1 = random_tensor({4, 6}, rng);
    auto b1 = random_tensor({6}, rng);
    auto w2 = random_tensor({6, 3}, rng);
    auto b2 = random_tensor({3}, rng);
    auto y = random_tensor({1, 3}, rng);

    auto f = [&](const Tensor& x) {
        auto h = tanh(affine(reshape(x, {1, 4}), w1, b1));
        return squared_error(affine(h, w2, b2), y).value();
    };

    for (int trial = 0; trial < 5; ++trial) {
        auto x = random_tensor({2, 2}, rng, true);
        auto h = tanh(affine(reshape(x, {1, 4}), w1, b1));
        auto loss = squared_error(affine(h, w2, b2), y);
        loss.backward();
        auto fd = finite_diff_gradient(f, x.detached(), 1e-5);
        for (size_t i = 0; i < fd.values().size(); ++i)
            CHECK_MESSAGE(grad_close(x.grad()[i], fd.values()[i]),
                          "element ", i, ": ", x.grad()[i], " vs ", fd.values()[i]);
    }
}

TEST_CASE("every op matches finite differences at random points") {
    Rng rng(99);
    auto scalarize = [](const Tensor& t) { return mean(mul(t, t)); };

    struct Case {
        const char* name;
        std::function<Tensor(const Tensor&)> build;
    };
    auto other = random_tensor({3, 4}, rng);
    auto bias = random_tensor({4}, rng);
    auto mat = random_tensor({4, 2}, rng);
    std::vector<Case> cases = {
        {"add", [&](const Tensor& x) { return add(x, other); }},
        {"sub", [&](const Tensor& x) { return sub(other, x); }},
        {"mul", [&](const Tensor& x) { return mul(x, other); }},
        {"matmul", [&](const Tensor& x) { return matmul(x, mat); }},
        {"bias_add", [&](const Tensor& x) { return bias_add(x, bias); }},
        {"tanh", [&](const Tensor& x) { return tanh(x); }},
        // inputs are bounded away from 0, so the relu kink is not sampled
        {"relu", [&](const Tensor& x) { return relu(x); }},
        {"reshape", [&](const Tensor& x) { return reshape(x, {4, 3}); }},
        {"slice", [&](const Tensor& x) { return slice_rows(x, 1, 3); }},
        {"concat",
         [&](const Tensor& x) { return concat_rows({x, slice_rows(x, 0, 2)}); }},
        {"mean", [&](const Tensor& x) { return mean(x); }},
        {"squared_error", [&](const Tensor& x) { return squared_error(x, other); }},
        {"absolute_error", [&](const Tensor& x) { return absolute_error(x, other); }},
    };

    for (const auto& c : cases) {
        for (int trial = 0; trial < 3; ++trial) {
            // offset keeps |x| in [0.5, 1.5]: avoids relu/abs kinks
            std::vector<double> v(12);
            for (auto& e : v) {
                e = rng.uniform(0.5, 1.5);
                if (rng.uniform01() < 0.5) e = -e;
            }
            auto x = Tensor::from({3, 4}, v, true);
            auto out = c.build(x);
            auto loss = out.size() == 1 ? out : mean(mul(out, out));
            loss.backward();
            auto f = [&](const Tensor& xx) {
                auto o = c.build(xx);
                if (o.size() == 1) return o.value();
                double s = 0;
                for (double e : o.values()) s += e * e;
                return s / static_cast<double>(o.size());
            };
            auto fd = finite_diff_gradient(f, x.detached(), 1e-5);
            for (size_t i = 0; i < fd.values().size(); ++i)
                CHECK_MESSAGE(grad_close(x.grad()[i], fd.values()[i]), c.name,
                              " element ", i, ": backward ", x.grad()[i], " vs fd ",
                              fd.values()[i]);
        }
    }
    (void)scalarize;
}

TEST_CASE("forward is deterministic") {
    Rng rng(5);
    auto a = random_tensor({5, 5}, rng);
    auto b = random_tensor({5, 5}, rng);
    auto y1 = matmul(tanh(a), b);
    auto y2 = matmul(tanh(a), b);
    CHECK(y1.values() == y2.values());
}

TEST_CASE("backward invocation counter") {
    reset_backward_invocations();
    auto x = Tensor::from({1}, {2.0}, true);
    auto loss = mul(x, x);
    loss.backward();
    loss.backward();
    CHECK(backward_invocations() == 2);
}

TEST_CASE("constants are not taped") {
    auto a = Tensor::from({2}, {1.0, 2.0});
    auto b = Tensor::from({2}, {3.0, 4.0});
    auto c = add(a, b);
    // mutating a constant result is allowed: it is a leaf value node
    c.mutable_values()[0] = 9.0;
    CHECK(c.values()[0] == 9.0);

    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    auto taped = add(x, b);
    CHECK(taped.requires_grad());
    CHECK_THROWS_AS(taped.mutable_values(), std::logic_error);
}
