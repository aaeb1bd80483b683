#include <doctest.h>

#include <cmath>
#include <cstring>

#include "dect/grad_check.hpp"
#include "dect/rng.hpp"
#include "dect/tensor.hpp"

using namespace dect;

namespace {

template <typename T>
Tensor<T> vec(std::vector<T> v, bool grad = false) {
    const int n = static_cast<int>(v.size());
    return Tensor<T>::leaf({n}, std::move(v), grad);
}

std::vector<double> random_vec(size_t n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Values kept away from zero so |x| and rectifiers are smooth at the probe.
std::vector<double> random_vec_off_zero(size_t n, uint64_t seed, double margin = 5e-2) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        const double mag = rng.uniform(margin, 1.0);
        x = rng.bernoulli(0.5) ? mag : -mag;
    }
    return v;
}

}  // namespace

TEST_SUITE("tensor") {
    TEST_CASE("elementwise add/sub/mul on equal shapes") {
        auto a = vec<double>({1, 2});
        auto b = vec<double>({3, 4});
        CHECK(add(a, b).values() == std::vector<double>{4, 6});
        CHECK(sub(b, a).values() == std::vector<double>{2, 2});
        CHECK(mul(a, b).values() == std::vector<double>{3, 8});
    }

    TEST_CASE("unary elementwise definitions") {
        CHECK(dect::abs(vec<double>({-0.5, 0.5})).values() == std::vector<double>{0.5, 0.5});
        CHECK(neg(vec<double>({1, -2})).values() == std::vector<double>{-1, 2});
        CHECK(dect::log(vec<double>({1.0})).values()[0] == 0.0);
        // The log floor keeps non-positive inputs finite.
        CHECK(dect::log(vec<double>({0.0})).values()[0] == doctest::Approx(std::log(1e-12)));
        CHECK(clamp(vec<double>({-2.0, 0.3, 2.0}), -1.0, 1.0).values() ==
              std::vector<double>{-1.0, 0.3, 1.0});
    }

    TEST_CASE("scalar broadcasting") {
        auto a = vec<double>({1, 2, 3});
        auto s = Tensor<double>::scalar(10.0);
        CHECK(add(a, s).values() == std::vector<double>{11, 12, 13});
        CHECK(add(s, a).values() == std::vector<double>{11, 12, 13});
        CHECK(sub(a, s).values() == std::vector<double>{-9, -8, -7});
        CHECK(sub(s, a).values() == std::vector<double>{9, 8, 7});
        CHECK(mul(a, s).values() == std::vector<double>{10, 20, 30});
        CHECK_THROWS_AS(add(a, vec<double>({1, 2})), DimError);
    }

    TEST_CASE("elementwise dispatcher enforces arity") {
        auto a = vec<double>({1, 2});
        auto b = vec<double>({3, 4});
        CHECK(elementwise(ElementwiseKind::add, a, b).values() == std::vector<double>{4, 6});
        CHECK_THROWS_AS(elementwise(ElementwiseKind::add, a), DimError);
        CHECK_THROWS_AS(elementwise(ElementwiseKind::log, a, b), DimError);
        CHECK_THROWS_AS(elementwise(ElementwiseKind::abs, a, b), DimError);
        CHECK_THROWS_AS(elementwise(ElementwiseKind::neg, a, b), DimError);
    }

    TEST_CASE("activation definitions") {
        CHECK(sigmoid(Tensor<double>::scalar(0.0)).item() == 0.5);
        CHECK(relu(vec<double>({-1, 2})).values() == std::vector<double>{0, 2});
        CHECK(leaky_relu(Tensor<double>::scalar(-1.0)).item() == doctest::Approx(-0.2));
        CHECK(dect::tanh(Tensor<double>::scalar(0.0)).item() == 0.0);
        CHECK(sigmoid(Tensor<double>::scalar(30.0)).item() == doctest::Approx(1.0));
        CHECK(sigmoid(Tensor<double>::scalar(-30.0)).item() == doctest::Approx(0.0));
    }

    TEST_CASE("mean_all") {
        CHECK(mean_all(vec<double>({2, 4})).item() == 3.0);
        CHECK(mean_all(Tensor<double>::full({3, 2}, 7.0)).item() == 7.0);
        auto x = vec<double>({1, 2, 3, 4}, true);
        auto m = mean_all(x);
        backward(m);
        for (double g : x.grad()) CHECK(g == 0.25);
        CHECK_THROWS_AS(Tensor<double>::zeros({0}), DimError);
    }

    TEST_CASE("reshape preserves data and gradients") {
        auto x = vec<double>({1, 2, 3, 4}, true);
        auto r = reshape(x, {2, 2});
        CHECK(r.shape() == std::vector<int>{2, 2});
        CHECK(r.values() == x.values());
        backward(mean_all(mul(r, r)));
        CHECK(x.grad()[2] == doctest::Approx(2.0 * 3.0 / 4.0));
        CHECK_THROWS_AS(reshape(x, {3, 2}), DimError);
    }

    TEST_CASE("backward computes the L1 sign and sigmoid slope") {
        auto w = vec<double>({1.0}, true);
        auto y = vec<double>({0.0});
        auto loss = mean_all(dect::abs(sub(w, y)));
        backward(loss);
        CHECK(w.grad()[0] == 1.0);

        auto w2 = Tensor<double>::scalar(0.0, true);
        auto s = sigmoid(w2);
        backward(s);
        CHECK(w2.grad()[0] == 0.25);
    }

    TEST_CASE("backward requires a scalar") {
        auto x = vec<double>({1, 2}, true);
        CHECK_THROWS_AS(backward(add(x, x)), ContractError);
    }

    TEST_CASE("gradients accumulate additively across backward calls") {
        auto x = vec<double>({2.0}, true);
        auto l1 = mean_all(mul(x, x));
        backward(l1);
        CHECK(x.grad()[0] == 4.0);
        auto l2 = mean_all(mul(x, x));
        backward(l2);
        CHECK(x.grad()[0] == 8.0);
        x.zero_grad();
        CHECK(x.grad()[0] == 0.0);
    }

    TEST_CASE("gradient accumulates when a tensor feeds multiple consumers") {
        auto x = vec<double>({3.0}, true);
        auto y = add(mul(x, x), mul(x, x));  // 2 x^2, dy/dx = 4x
        backward(y);
        CHECK(x.grad()[0] == 12.0);
    }

    TEST_CASE("backward is deterministic: identical tapes give bit-identical gradients") {
        auto data = random_vec(32, 11);
        auto run = [&] {
            auto x = Tensor<double>::leaf({32}, data, true);
            backward(mean_all(mul(sigmoid(x), dect::tanh(add(x, x)))));
            return x.grad();
        };
        const auto first = run();
        const auto second = run();
        CHECK(std::memcmp(first.data(), second.data(), first.size() * sizeof(double)) == 0);
    }

    TEST_CASE("gradients are invariant to the insertion order of independent branches") {
        const auto data = random_vec(16, 12);
        // Single-contribution branches: the leaf gradient is a two-term sum,
        // which floating-point addition keeps bit-exact under swapping.
        auto c1 = Tensor<double>::leaf({16}, random_vec(16, 13));
        auto c2 = Tensor<double>::leaf({16}, random_vec(16, 14));
        auto run_simple = [&](bool swap_order) {
            auto x = Tensor<double>::leaf({16}, data, true);
            auto f = mean_all(mul(x, c1));
            auto g = mean_all(mul(x, c2));
            backward(swap_order ? add(g, f) : add(f, g));
            return x.grad();
        };
        const auto a = run_simple(false);
        const auto b = run_simple(true);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

        // With more contributions per leaf the sums reassociate, so the
        // invariance is analytic rather than bitwise.
        auto run_fanout = [&](bool swap_order) {
            auto x = Tensor<double>::leaf({16}, data, true);
            auto f = mean_all(mul(x, x));
            auto g = mean_all(sigmoid(x));
            backward(swap_order ? add(g, f) : add(f, g));
            return x.grad();
        };
        const auto p = run_fanout(false);
        const auto q = run_fanout(true);
        for (size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-14));
    }

    TEST_CASE("no-grad mode suspends tape recording") {
        auto x = vec<double>({1.0, 2.0}, true);
        {
            NoGradGuard guard;
            auto y = mul(x, x);
            CHECK_FALSE(y.requires_grad());
        }
        auto y = mul(x, x);
        CHECK(y.requires_grad());
    }

    TEST_CASE("grad_check: closed-form quadratic") {
        auto f = [](const Tensor<double>& x) { return mean_all(mul(x, x)); };
        const double err = grad_check<double>(f, {2}, {1.0, 2.0}, 1e-5);
        CHECK(err < 1e-6);
    }

    TEST_CASE("grad_check: constant function has zero error") {
        auto f = [](const Tensor<double>& x) { return mean_all(mul(x, Tensor<double>::zeros(x.shape()))); };
        CHECK(grad_check<double>(f, {3}, {1.0, -2.0, 0.5}, 1e-5) == 0.0);
    }

    TEST_CASE("grad_check: every elementwise op and activation") {
        // Random weighting makes per-element gradient errors visible through
        // the scalar reduction.
        const auto w = random_vec(12, 99, 0.5, 1.5);
        auto weighted = [&](Tensor<double> t) {
            return mean_all(mul(t, Tensor<double>::leaf({12}, w)));
        };
        const auto smooth = random_vec(12, 7);
        const auto off_zero = random_vec_off_zero(12, 8);
        const auto positive = random_vec(12, 9, 0.2, 2.0);
        const std::vector<int> shape{12};

        auto other = Tensor<double>::leaf(shape, random_vec(12, 10));
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(add(x, other)); }, shape,
                                 smooth, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(sub(other, x)); }, shape,
                                 smooth, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(mul(x, other)); }, shape,
                                 smooth, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(neg(x)); }, shape, smooth,
                                 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(dect::abs(x)); }, shape,
                                 off_zero, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(dect::log(x)); }, shape,
                                 positive, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(clamp(x, -0.8, 0.8)); },
                                 shape, off_zero, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(relu(x)); }, shape,
                                 off_zero, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(leaky_relu(x)); }, shape,
                                 off_zero, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(dect::tanh(x)); }, shape,
                                 smooth, 1e-6) < 1e-5);
        CHECK(grad_check<double>([&](const Tensor<double>& x) { return weighted(sigmoid(x)); }, shape,
                                 smooth, 1e-6) < 1e-5);

        // Scalar-broadcast gradients, both orientations.
        auto big = Tensor<double>::leaf({12}, random_vec(12, 13));
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& s) { return weighted(mul(big, s)); }, {1}, {0.7}, 1e-6) < 1e-5);
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& s) { return weighted(add(s, big)); }, {1}, {0.3}, 1e-6) < 1e-5);
    }

    TEST_CASE("clamp gradient vanishes outside the interval") {
        auto x = vec<double>({-2.0, 0.0, 2.0}, true);
        backward(mean_all(clamp(x, -1.0, 1.0)));
        CHECK(x.grad()[0] == 0.0);
        CHECK(x.grad()[1] == doctest::Approx(1.0 / 3));
        CHECK(x.grad()[2] == 0.0);
    }

    TEST_CASE("leaf shape validation") {
        CHECK_THROWS_AS(Tensor<double>::leaf({2, 2}, {1.0, 2.0, 3.0}), DimError);
        CHECK_THROWS_AS(Tensor<double>::leaf({-1}, {}), DimError);
    }
}
