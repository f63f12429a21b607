#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gsnias/rng.hpp"
#include "gsnias/tensor.hpp"

namespace gsnias {

// Compares analytic gradients against central differences for `samples`
// randomly chosen scalar entries, spread round-robin over the parameter
// tensors so every group gets probed. Returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const std::function<ad::Tensor()>& closure,
                         std::vector<ad::Tensor> params, int samples, Rng& rng,
                         double h = 1e-5) {
    ad::Tensor loss = closure();
    if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
    for (auto& p : params) p.zero_grad();
    ad::backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    auto eval = [&]() {
        ad::NoGradGuard ng;
        double v = closure().item();
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
        return v;
    };

    double max_rel = 0.0;
    for (int s = 0; s < samples; ++s) {
        const size_t k = static_cast<size_t>(s) % params.size();
        const size_t i = static_cast<size_t>(rng.next_below(params[k].size()));
        double& theta = params[k].value()[i];
        const double saved = theta;
        theta = saved + h;
        const double f_plus = eval();
        theta = saved - h;
        const double f_minus = eval();
        theta = saved;
        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic[k][i];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
    return max_rel;
}

}  // namespace gsnias
