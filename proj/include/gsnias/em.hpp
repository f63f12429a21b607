// Expectation-maximization view of the per-node aggregation fixed point:
// neighbors are treated as draws from a von Mises-Fisher density around a
// mean direction c, the E-step infers responsibilities, the M-step re-fits c.
// Deliberately written in plain scalar code with no dependency on the tensor
// stack, so it can certify the network's iterates from the outside.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gsnias::em {

struct VmfInstance {
    std::vector<double> h_i;                     // unit vector
    std::vector<std::vector<double>> neighbors;  // unit vectors h_j
    std::vector<double> c;                       // current mean direction, unit
};

struct EmStep {
    std::vector<double> alphas;  // responsibilities, sum to 1
    std::vector<double> c_next;  // refit mean direction, unit
    double q_value = 0.0;        // expected complete-data objective at c_next
    // q_value plus the responsibilities' entropy: the variational lower bound
    // on the log-likelihood. q_value alone is what the M-step maximizes for
    // fixed responsibilities, but only the bound is monotone across E/M
    // rounds (the entropy term is constant within one M-step, not across
    // rounds), so convergence certification must track `bound`.
    double bound = 0.0;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline std::vector<double> unit(const std::vector<double>& v) {
    double nsq = 0.0;
    for (double x : v) nsq += x * x;
    const double n = std::sqrt(nsq);
    if (!(n > 1e-12)) throw std::runtime_error("unit: degenerate vector");
    std::vector<double> out(v.size());
    for (size_t k = 0; k < v.size(); ++k) out[k] = v[k] / n;
    return out;
}

// E-step: alpha_j = exp(h_j . c) / sum_j exp(h_j . c)
// M-step: c_next = UN(h_i + sum_j alpha_j h_j)
// Q at the new c: h_i . c_next + sum_j alpha_j (h_j . c_next)
inline EmStep em_iterate(const VmfInstance& inst) {
    const size_t m = inst.neighbors.size();
    if (m == 0) throw std::invalid_argument("em_iterate: no neighbors");
    const size_t d = inst.h_i.size();

    EmStep step;
    step.alphas.resize(m);
    double max_score = -1e300;
    for (size_t j = 0; j < m; ++j) {
        step.alphas[j] = dot(inst.neighbors[j], inst.c);
        if (step.alphas[j] > max_score) max_score = step.alphas[j];
    }
    double z = 0.0;
    for (size_t j = 0; j < m; ++j) {
        step.alphas[j] = std::exp(step.alphas[j] - max_score);
        z += step.alphas[j];
    }
    for (size_t j = 0; j < m; ++j) step.alphas[j] /= z;

    std::vector<double> mix = inst.h_i;
    for (size_t j = 0; j < m; ++j)
        for (size_t k = 0; k < d; ++k) mix[k] += step.alphas[j] * inst.neighbors[j][k];
    step.c_next = unit(mix);

    step.q_value = dot(inst.h_i, step.c_next);
    for (size_t j = 0; j < m; ++j)
        step.q_value += step.alphas[j] * dot(inst.neighbors[j], step.c_next);
    step.bound = step.q_value;
    for (size_t j = 0; j < m; ++j)
        if (step.alphas[j] > 0.0) step.bound -= step.alphas[j] * std::log(step.alphas[j]);
    return step;
}

}  // namespace gsnias::em
