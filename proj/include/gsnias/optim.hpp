#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsnias/tensor.hpp"

namespace gsnias {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;  // L2 term added to the gradient before moments
};

// First/second moment buffers per parameter plus a shared step counter.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long t = 0;

    void init(const std::vector<ad::Tensor>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.size(), 0.0);
            v.emplace_back(p.size(), 0.0);
        }
        t = 0;
    }
};

// One Adam update with bias correction over all parameters. Reads each
// parameter's grad buffer; does not clear it.
inline void adam_step(std::vector<ad::Tensor>& params, AdamState& state, double lr,
                      const AdamConfig& cfg = AdamConfig{}) {
    if (state.m.size() != params.size()) state.init(params);
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (size_t k = 0; k < params.size(); ++k) {
        auto& theta = params[k].value();
        auto& grad = params[k].grad();
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (size_t i = 0; i < theta.size(); ++i) {
            if (!std::isfinite(grad[i]))
                throw std::runtime_error("adam_step: non-finite gradient");
            const double g = grad[i] + cfg.weight_decay * theta[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// lr multiplied by `decay` after every `every` epochs (epoch is 0-based).
inline double scheduled_lr(double base_lr, double decay, int every, int epoch) {
    return base_lr * std::pow(decay, static_cast<double>(epoch / every));
}

}  // namespace gsnias
