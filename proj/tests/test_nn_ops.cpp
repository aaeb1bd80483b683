#include <doctest.h>

#include <cmath>

#include "dect/grad_check.hpp"
#include "dect/nn_ops.hpp"
#include "dect/rng.hpp"

using namespace dect;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Reference cross-correlation with reflection padding, written directly from
// the definition (no im2col, no GEMM); the production path must match it.
std::vector<double> conv2d_reference(const std::vector<double>& input, int n, int ci, int h, int w,
                                     const std::vector<double>& weight, int co, int k,
                                     const std::vector<double>& bias, int stride, int pad) {
    auto reflect = [](int t, int size) {
        if (t < 0) return -t;
        if (t >= size) return 2 * size - 2 - t;
        return t;
    };
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    std::vector<double> out(static_cast<size_t>(n) * co * ho * wo);
    for (int s = 0; s < n; ++s)
        for (int o = 0; o < co; ++o)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = bias[o];
                    for (int i = 0; i < ci; ++i)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int y = reflect(oy * stride + ky - pad, h);
                                const int x = reflect(ox * stride + kx - pad, w);
                                acc += weight[((static_cast<size_t>(o) * ci + i) * k + ky) * k + kx] *
                                       input[((static_cast<size_t>(s) * ci + i) * h + y) * w + x];
                            }
                    out[((static_cast<size_t>(s) * co + o) * ho + oy) * wo + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_SUITE("nn_ops") {
    TEST_CASE("conv2d: 1x1 identity kernel is the identity map, forward and backward") {
        const auto img = random_vec(2 * 5 * 7, 21);
        auto x = Tensor<double>::leaf({2, 1, 5, 7}, img, true);
        auto w = Tensor<double>::leaf({1, 1, 1, 1}, {1.0}, true);
        auto b = Tensor<double>::zeros({1});
        auto y = conv2d(x, w, b, 1, 0);
        CHECK(y.shape() == std::vector<int>{2, 1, 5, 7});
        CHECK(y.values() == img);
        backward(mean_all(y));
        for (double g : x.grad()) CHECK(g == doctest::Approx(1.0 / 70));
    }

    TEST_CASE("conv2d: all-ones 3x3 kernel on a constant image sums to 9c") {
        const double c = 0.37;
        auto x = Tensor<double>::full({1, 1, 6, 6}, c);
        auto w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
        auto b = Tensor<double>::zeros({1});
        auto y = conv2d(x, w, b, 1, 1);  // reflection padding keeps the field constant
        CHECK(y.shape() == std::vector<int>{1, 1, 6, 6});
        for (double v : y.values()) CHECK(v == doctest::Approx(9.0 * c));
    }

    TEST_CASE("conv2d: 2x2 kernel over a 2x2 image equals the dot product") {
        const auto img = random_vec(4, 31);
        const auto ker = random_vec(4, 32);
        double dot = 0;
        for (int i = 0; i < 4; ++i) dot += img[i] * ker[i];
        auto y = conv2d(Tensor<double>::leaf({1, 1, 2, 2}, img), Tensor<double>::leaf({1, 1, 2, 2}, ker),
                        Tensor<double>::zeros({1}), 1, 0);
        CHECK(y.shape() == std::vector<int>{1, 1, 1, 1});
        CHECK(y.item() == doctest::Approx(dot));
    }

    TEST_CASE("conv2d matches the direct reference over strides, pads and channels") {
        for (const auto& [n, ci, h, w, co, k, stride, pad] :
             {std::array<int, 8>{2, 3, 8, 6, 4, 3, 1, 1}, std::array<int, 8>{1, 2, 9, 9, 3, 3, 2, 1},
              std::array<int, 8>{2, 1, 8, 8, 2, 7, 1, 3}, std::array<int, 8>{1, 4, 5, 5, 2, 1, 2, 0}}) {
            const auto img = random_vec(static_cast<size_t>(n) * ci * h * w, 100 + k);
            const auto ker = random_vec(static_cast<size_t>(co) * ci * k * k, 200 + k);
            const auto bias = random_vec(co, 300 + k);
            auto y = conv2d(Tensor<double>::leaf({n, ci, h, w}, img),
                            Tensor<double>::leaf({co, ci, k, k}, ker), Tensor<double>::leaf({co}, bias),
                            stride, pad);
            const auto ref = conv2d_reference(img, n, ci, h, w, ker, co, k, bias, stride, pad);
            REQUIRE(y.values().size() == ref.size());
            for (size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]));
        }
    }

    TEST_CASE("conv2d validates its contracts") {
        auto x = Tensor<double>::zeros({1, 2, 4, 4});
        auto w = Tensor<double>::zeros({3, 1, 3, 3});  // expects 1 input channel, not 2
        auto b = Tensor<double>::zeros({3});
        CHECK_THROWS_AS(conv2d(x, w, b, 1, 1), DimError);
        auto w2 = Tensor<double>::zeros({3, 2, 3, 3});
        CHECK_THROWS_AS(conv2d(x, w2, Tensor<double>::zeros({2}), 1, 1), DimError);
        CHECK_THROWS_AS(conv2d(x, w2, b, 1, 4), DimError);   // reflection wider than the image
        CHECK_THROWS_AS(conv2d(x, Tensor<double>::zeros({3, 2, 7, 7}), b, 1, 0), DimError);
        CHECK_THROWS_AS(conv2d(x, w2, b, 0, 1), ContractError);
    }

    TEST_CASE("conv2d output size follows floor((H + 2p - K)/s) + 1") {
        auto y = conv2d(Tensor<double>::zeros({1, 1, 9, 9}), Tensor<double>::zeros({1, 1, 3, 3}),
                        Tensor<double>::zeros({1}), 2, 1);
        CHECK(y.shape() == std::vector<int>{1, 1, 5, 5});
    }

    TEST_CASE("conv2d gradients match finite differences") {
        const std::vector<int> xs{1, 2, 6, 6};
        const auto img = random_vec(2 * 6 * 6, 41);
        const auto ker = random_vec(3 * 2 * 3 * 3, 42);
        const auto bias = random_vec(3, 43);
        auto scalarize = [&](const Tensor<double>& y) {
            return mean_all(mul(y, Tensor<double>::leaf(y.shape(), random_vec(y.numel(), 44, 0.5, 1.5))));
        };

        CHECK(grad_check<double>(
                  [&](const Tensor<double>& x) {
                      return scalarize(conv2d(x, Tensor<double>::leaf({3, 2, 3, 3}, ker),
                                              Tensor<double>::leaf({3}, bias), 1, 1));
                  },
                  xs, img, 1e-6) < 1e-5);
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& w) {
                      return scalarize(conv2d(Tensor<double>::leaf(xs, img), w,
                                              Tensor<double>::leaf({3}, bias), 2, 1));
                  },
                  {3, 2, 3, 3}, ker, 1e-6) < 1e-5);
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& b) {
                      return scalarize(conv2d(Tensor<double>::leaf(xs, img),
                                              Tensor<double>::leaf({3, 2, 3, 3}, ker), b, 1, 1));
                  },
                  {3}, bias, 1e-6) < 1e-5);
    }

    TEST_CASE("upsample_nearest: factor 1 is the identity") {
        const auto img = random_vec(2 * 3 * 4, 51);
        auto y = upsample_nearest(Tensor<double>::leaf({1, 2, 3, 4}, img), 1);
        CHECK(y.values() == img);
    }

    TEST_CASE("upsample_nearest replicates blocks") {
        auto y = upsample_nearest(Tensor<double>::leaf({1, 1, 2, 2}, {1, 2, 3, 4}), 2);
        CHECK(y.shape() == std::vector<int>{1, 1, 4, 4});
        CHECK(y.values() ==
              std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
    }

    TEST_CASE("upsample_nearest backward sums each replicated block") {
        auto x = Tensor<double>::leaf({1, 1, 2, 2}, {1, 2, 3, 4}, true);
        auto y = upsample_nearest(x, 2);
        // Sum of outputs = 16 * mean; each input feeds four outputs.
        backward(mul(mean_all(y), Tensor<double>::scalar(16.0)));
        for (double g : x.grad()) CHECK(g == doctest::Approx(4.0));
        CHECK(grad_check<double>(
                  [](const Tensor<double>& t) {
                      return mean_all(mul(upsample_nearest(t, 2),
                                          Tensor<double>::leaf({1, 1, 4, 4}, random_vec(16, 52))));
                  },
                  {1, 1, 2, 2}, random_vec(4, 53), 1e-6) < 1e-5);
        CHECK_THROWS_AS(upsample_nearest(x, 0), ContractError);
    }

    TEST_CASE("instance_norm: constant channel becomes zero (variance floored by eps)") {
        auto x = Tensor<double>::full({1, 2, 3, 3}, 5.0);
        auto y = instance_norm(x, Tensor<double>::full({2}, 1.0), Tensor<double>::zeros({2}));
        for (double v : y.values()) CHECK(v == doctest::Approx(0.0));
    }

    TEST_CASE("instance_norm: closed-form standardization of a two-pixel channel") {
        auto x = Tensor<double>::leaf({1, 1, 1, 2}, {-1.0, 1.0});
        auto y = instance_norm(x, Tensor<double>::full({1}, 1.0), Tensor<double>::zeros({1}));
        // mean 0, population variance 1; the eps in the denominator shrinks
        // the output slightly below unit magnitude.
        const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
        CHECK(y.values()[0] == doctest::Approx(-expected).epsilon(1e-9));
        CHECK(y.values()[1] == doctest::Approx(expected).epsilon(1e-9));
    }

    TEST_CASE("instance_norm: zero gain collapses to the shift") {
        auto x = Tensor<double>::leaf({1, 1, 2, 2}, random_vec(4, 61));
        auto y = instance_norm(x, Tensor<double>::zeros({1}), Tensor<double>::full({1}, 3.0));
        for (double v : y.values()) CHECK(v == 3.0);
    }

    TEST_CASE("instance_norm rejects a single spatial element") {
        CHECK_THROWS_AS(instance_norm(Tensor<double>::zeros({1, 2, 1, 1}), Tensor<double>::full({2}, 1.0),
                                      Tensor<double>::zeros({2})),
                        DegenerateInputError);
    }

    TEST_CASE("instance_norm gradients match finite differences") {
        const std::vector<int> xs{2, 3, 4, 4};
        const auto img = random_vec(2 * 3 * 4 * 4, 71);
        const auto gains = random_vec(3, 72, 0.5, 1.5);
        const auto shifts = random_vec(3, 73);
        auto scalarize = [](const Tensor<double>& y) {
            return mean_all(mul(y, Tensor<double>::leaf(y.shape(), random_vec(y.numel(), 74, 0.5, 1.5))));
        };
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& x) {
                      return scalarize(instance_norm(x, Tensor<double>::leaf({3}, gains),
                                                     Tensor<double>::leaf({3}, shifts)));
                  },
                  xs, img, 1e-6) < 1e-5);
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& g) {
                      return scalarize(instance_norm(Tensor<double>::leaf(xs, img), g,
                                                     Tensor<double>::leaf({3}, shifts)));
                  },
                  {3}, gains, 1e-6) < 1e-5);
        CHECK(grad_check<double>(
                  [&](const Tensor<double>& s) {
                      return scalarize(instance_norm(Tensor<double>::leaf(xs, img),
                                                     Tensor<double>::leaf({3}, gains), s));
                  },
                  {3}, shifts, 1e-6) < 1e-5);
    }

    TEST_CASE("mean_hw pools each channel") {
        auto x = Tensor<double>::leaf({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
        auto y = mean_hw(x);
        CHECK(y.shape() == std::vector<int>{1, 2, 1, 1});
        CHECK(y.values() == std::vector<double>{2.5, 25.0});
        CHECK(grad_check<double>(
                  [](const Tensor<double>& t) {
                      return mean_all(mul(mean_hw(t), Tensor<double>::leaf({1, 2, 1, 1}, {0.7, 1.3})));
                  },
                  {1, 2, 2, 2}, random_vec(8, 81), 1e-6) < 1e-5);
    }
}
