// Sequence model over the two item representations: one shared GRU produces
// a session state per stream, each stream scores all items, and a learned
// sigmoid-weighted mixture fuses the two score distributions.
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "gsnias/anchors.hpp"
#include "gsnias/rng.hpp"
#include "gsnias/tensor.hpp"

namespace gsnias {

// Gate weights are stored input-major (d_in x d_out) so the unbatched path
// (matvec_t) and the padded batch path (matmul) read them identically.
struct GruParams {
    ad::Tensor W_z, U_z, b_z;
    ad::Tensor W_r, U_r, b_r;
    ad::Tensor W_h, U_h, b_h;

    static GruParams init(int d, Rng& rng) {
        const double b = 1.0 / std::sqrt(static_cast<double>(d));
        auto mat = [&] { return AnchorEncoderParams::draw(d, d, b, rng); };
        auto vec = [&] { return AnchorEncoderParams::draw(d, 0, b, rng); };
        GruParams p{mat(), mat(), vec(), mat(), mat(), vec(), mat(), mat(), vec()};
        return p;
    }

    std::vector<ad::Tensor> params() const {
        return {W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h};
    }
};

struct FusionWeights {
    ad::Tensor omega_a, omega_b;  // scalar logits, start at 0 -> weights 0.5

    static FusionWeights init() {
        return {ad::Tensor::scalar(0.0, true), ad::Tensor::scalar(0.0, true)};
    }

    std::vector<ad::Tensor> params() const { return {omega_a, omega_b}; }
};

// z = sig(Wz x + Uz h + bz); r likewise; cand = tanh(Wh x + Uh (r*h) + bh);
// h' = h + z * (cand - h). Zero initial state.
inline ad::Tensor gru_forward(const GruParams& p, const std::vector<ad::Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("gru_forward: empty sequence");
    const int d = p.b_z.rows();
    ad::Tensor h = ad::Tensor::zeros_vector(d);
    for (const auto& x : xs) {
        auto z = ad::sigmoid(ad::add(ad::add(ad::matvec_t(p.W_z, x), ad::matvec_t(p.U_z, h)), p.b_z));
        auto r = ad::sigmoid(ad::add(ad::add(ad::matvec_t(p.W_r, x), ad::matvec_t(p.U_r, h)), p.b_r));
        auto cand = ad::tanh(
            ad::add(ad::add(ad::matvec_t(p.W_h, x), ad::matvec_t(p.U_h, ad::mul(r, h))), p.b_h));
        h = ad::add(h, ad::mul(z, ad::sub(cand, h)));
    }
    return h;
}

// Padded batch recurrence over prefix index lists. Rows whose sequence has
// ended keep their state through a 0/1 mask, so the result row is each
// sequence's last valid hidden state. Padding gathers row 0 (masked away).
inline ad::Tensor gru_forward_batched(const GruParams& p,
                                      const std::vector<std::vector<int>>& prefixes,
                                      const ad::Tensor& E) {
    if (prefixes.empty()) throw std::invalid_argument("gru_forward_batched: empty batch");
    size_t max_len = 0;
    for (const auto& seq : prefixes) {
        if (seq.empty()) throw std::invalid_argument("gru_forward_batched: empty sequence");
        max_len = std::max(max_len, seq.size());
    }
    const int B = static_cast<int>(prefixes.size());
    const int d = E.cols();

    ad::Tensor H = ad::Tensor::zeros_matrix(B, d);
    for (size_t t = 0; t < max_len; ++t) {
        std::vector<int> idx(static_cast<size_t>(B), 0);
        std::vector<double> mask(static_cast<size_t>(B) * static_cast<size_t>(d), 0.0);
        std::vector<double> keep(static_cast<size_t>(B) * static_cast<size_t>(d), 1.0);
        for (int b = 0; b < B; ++b) {
            if (t < prefixes[static_cast<size_t>(b)].size()) {
                idx[static_cast<size_t>(b)] = prefixes[static_cast<size_t>(b)][t];
                for (int j = 0; j < d; ++j) {
                    mask[static_cast<size_t>(b) * d + j] = 1.0;
                    keep[static_cast<size_t>(b) * d + j] = 0.0;
                }
            }
        }
        auto X = ad::index_select(E, idx);
        auto Z = ad::sigmoid(ad::add_rowvec(ad::add(ad::matmul(X, p.W_z), ad::matmul(H, p.U_z)), p.b_z));
        auto R = ad::sigmoid(ad::add_rowvec(ad::add(ad::matmul(X, p.W_r), ad::matmul(H, p.U_r)), p.b_r));
        auto cand = ad::tanh(
            ad::add_rowvec(ad::add(ad::matmul(X, p.W_h), ad::matmul(ad::mul(R, H), p.U_h)), p.b_h));
        auto stepped = ad::add(H, ad::mul(Z, ad::sub(cand, H)));
        H = ad::add(ad::mul(ad::Tensor::matrix(B, d, std::move(mask)), stepped),
                    ad::mul(ad::Tensor::matrix(B, d, std::move(keep)), H));
    }
    return H;
}

// softmax over the N item scores H s
inline ad::Tensor predict(const ad::Tensor& H, const ad::Tensor& s) {
    return ad::softmax(ad::matvec(H, s));
}

inline ad::Tensor fuse(const ad::Tensor& y_a, const ad::Tensor& y_b, const FusionWeights& w) {
    return ad::add(ad::mul(y_a, ad::sigmoid(w.omega_a)), ad::mul(y_b, ad::sigmoid(w.omega_b)));
}

struct PredictionBundle {
    ad::Tensor y_a, y_b, y_fused;
};

inline constexpr double kLogFloor = 1e-12;

// -ln y_a[t] - ln y_b[t] - ln y_fused[t], probabilities clamped at 1e-12
inline ad::Tensor loss(const PredictionBundle& bundle, int target) {
    auto pick = [&](const ad::Tensor& y) { return ad::log(ad::element(y, target), kLogFloor); };
    return ad::scale(ad::add(ad::add(pick(bundle.y_a), pick(bundle.y_b)), pick(bundle.y_fused)),
                     -1.0);
}

// Everything trainable, in one place. The single GruParams instance serves
// both representation streams.
struct ModelState {
    int n_items = 0, d = 0, n_anchors = 0;
    ad::Tensor H0;
    AnchorEncoderParams encoder;
    GruParams gru;
    FusionWeights fusion;

    static ModelState init(int n_items, int d, int n_anchors, Rng& rng) {
        ModelState m;
        m.n_items = n_items;
        m.d = d;
        m.n_anchors = n_anchors;
        const double b = 1.0 / std::sqrt(static_cast<double>(d));
        m.H0 = AnchorEncoderParams::draw(n_items, d, b, rng);
        m.encoder = AnchorEncoderParams::init(d, n_anchors, rng);
        m.gru = GruParams::init(d, rng);
        m.fusion = FusionWeights::init();
        return m;
    }

    // fixed order: embedding table, encoder, GRU gates, fusion logits
    std::vector<ad::Tensor> all_params() const {
        std::vector<ad::Tensor> out{H0};
        for (auto& t : encoder.params()) out.push_back(t);
        for (auto& t : gru.params()) out.push_back(t);
        for (auto& t : fusion.params()) out.push_back(t);
        return out;
    }
};

// One session end to end: gather both representations of the prefix, run the
// shared GRU per stream, score, fuse.
inline PredictionBundle forward_session(const ModelState& model, const std::vector<int>& prefix,
                                        const ad::Tensor& H_a, const ad::Tensor& H_b) {
    if (prefix.empty()) throw std::invalid_argument("forward_session: empty prefix");
    std::vector<ad::Tensor> xs_a, xs_b;
    xs_a.reserve(prefix.size());
    xs_b.reserve(prefix.size());
    for (int v : prefix) {
        if (v < 0 || v >= H_a.rows())
            throw std::invalid_argument("forward_session: prefix item out of range");
        xs_a.push_back(ad::row(H_a, v));
        xs_b.push_back(ad::row(H_b, v));
    }
    PredictionBundle out;
    auto s_a = gru_forward(model.gru, xs_a);
    auto s_b = gru_forward(model.gru, xs_b);
    out.y_a = predict(H_a, s_a);
    out.y_b = predict(H_b, s_b);
    out.y_fused = fuse(out.y_a, out.y_b, model.fusion);
    return out;
}

struct BatchBundle {
    ad::Tensor Y_a, Y_b, Y_fused;  // B x N each
};

inline BatchBundle forward_batch(const ModelState& model,
                                 const std::vector<std::vector<int>>& prefixes,
                                 const ad::Tensor& H_a, const ad::Tensor& H_b) {
    BatchBundle out;
    auto S_a = gru_forward_batched(model.gru, prefixes, H_a);
    auto S_b = gru_forward_batched(model.gru, prefixes, H_b);
    out.Y_a = ad::softmax_rows(ad::matmul_nt(S_a, H_a));
    out.Y_b = ad::softmax_rows(ad::matmul_nt(S_b, H_b));
    out.Y_fused = ad::add(ad::mul(out.Y_a, ad::sigmoid(model.fusion.omega_a)),
                          ad::mul(out.Y_b, ad::sigmoid(model.fusion.omega_b)));
    return out;
}

// Batch mean of the three-term loss.
inline ad::Tensor loss_batch(const BatchBundle& bundle, const std::vector<int>& targets) {
    auto pick = [&](const ad::Tensor& Y) { return ad::log(ad::gather_cols(Y, targets), kLogFloor); };
    auto per_example =
        ad::add(ad::add(pick(bundle.Y_a), pick(bundle.Y_b)), pick(bundle.Y_fused));
    return ad::scale(ad::mean(per_example), -1.0);
}

}  // namespace gsnias
