#pragma once

#include <functional>
#include <vector>

#include "dect/tensor.hpp"

namespace dect {

// Compares reverse-mode gradients of a scalar-valued tensor function against
// central finite differences at `point`. Returns the maximum over coordinates
// of |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
//
// `f` must rebuild its expression from the tensor it is given; the function
// should be smooth at the probe point (keep kinked activations away from
// their kinks).
template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                  const std::vector<int>& shape, const std::vector<T>& point, T h) {
    Tensor<T> x = Tensor<T>::leaf(shape, point, /*requires_grad=*/true);
    Tensor<T> y = f(x);
    if (y.numel() != 1) throw ContractError("grad_check requires a scalar-valued function");
    backward(y);
    std::vector<T> analytic = x.has_grad() ? x.grad() : std::vector<T>(point.size(), T(0));

    double worst = 0.0;
    NoGradGuard guard;
    for (size_t i = 0; i < point.size(); ++i) {
        std::vector<T> probe = point;
        probe[i] = point[i] + h;
        const double up = static_cast<double>(f(Tensor<T>::leaf(shape, probe)).item());
        probe[i] = point[i] - h;
        const double down = static_cast<double>(f(Tensor<T>::leaf(shape, probe)).item());
        const double numeric = (up - down) / (2.0 * static_cast<double>(h));
        const double a = static_cast<double>(analytic[i]);
        const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace dect
