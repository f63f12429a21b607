// Item informativeness by session-footprint entropy, anchor selection, and
// the anchor-basis encoding of every item.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gsnias/corpus.hpp"
#include "gsnias/rng.hpp"
#include "gsnias/tensor.hpp"

namespace gsnias {

struct EntropyTable {
    std::vector<double> entropy;
    std::vector<long long> session_count;  // sessions containing the item
    long long total_clicks = 0;
    long long total_sessions = 0;
};

// Each session containing item i contributes one term
//   P = (session length / total clicks) * (n_i / session count)
// and H(i) = -sum P ln P. Duplicate clicks inside a session count the
// session once. The terms need not sum to 1; the value ranks items only.
inline EntropyTable item_entropy(const SessionCorpus& corpus) {
    if (corpus.sessions.empty()) throw std::runtime_error("item_entropy: empty corpus");
    const int n = corpus.n_items();
    EntropyTable t;
    t.entropy.assign(static_cast<size_t>(n), 0.0);
    t.session_count.assign(static_cast<size_t>(n), 0);
    t.total_sessions = static_cast<long long>(corpus.sessions.size());

    std::vector<std::vector<int>> members;  // distinct items per session
    members.reserve(corpus.sessions.size());
    for (const auto& s : corpus.sessions) {
        t.total_clicks += static_cast<long long>(s.items.size());
        std::vector<int> distinct = s.items;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (int i : distinct) ++t.session_count[static_cast<size_t>(i)];
        members.push_back(std::move(distinct));
    }
    for (size_t j = 0; j < corpus.sessions.size(); ++j) {
        const double len_share = static_cast<double>(corpus.sessions[j].items.size()) /
                                 static_cast<double>(t.total_clicks);
        for (int i : members[j]) {
            const double p = len_share * static_cast<double>(t.session_count[static_cast<size_t>(i)]) /
                             static_cast<double>(t.total_sessions);
            if (p > 0.0) t.entropy[static_cast<size_t>(i)] -= p * std::log(p);
        }
    }
    return t;
}

struct AnchorSet {
    std::vector<int> items;  // descending entropy, ties by ascending index

    int size() const { return static_cast<int>(items.size()); }
};

inline AnchorSet select_anchors(const EntropyTable& table, int M) {
    const int n = static_cast<int>(table.entropy.size());
    if (M < 1 || M > n) throw std::invalid_argument("select_anchors: M out of range");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (table.entropy[static_cast<size_t>(a)] != table.entropy[static_cast<size_t>(b)])
            return table.entropy[static_cast<size_t>(a)] > table.entropy[static_cast<size_t>(b)];
        return a < b;
    });
    AnchorSet set;
    set.items.assign(order.begin(), order.begin() + M);
    return set;
}

// Trainable pieces of the anchor encoder: the anchor-space transform and the
// two-layer network that produces item-anchor assignment logits.
struct AnchorEncoderParams {
    ad::Tensor W_c, b_c;    // d x d, d
    ad::Tensor W_p1, b_p1;  // d x d, d
    ad::Tensor W_p2, b_p2;  // d x M, M

    static ad::Tensor draw(int rows, int cols, double bound, Rng& rng) {
        std::vector<double> v(static_cast<size_t>(rows) * static_cast<size_t>(std::max(cols, 1)));
        for (auto& x : v) x = rng.next_double(-bound, bound);
        return cols > 0 ? ad::Tensor::matrix(rows, cols, std::move(v), true)
                        : ad::Tensor::vector(std::move(v), true);
    }

    static AnchorEncoderParams init(int d, int M, Rng& rng) {
        const double b = 1.0 / std::sqrt(static_cast<double>(d));
        AnchorEncoderParams p{draw(d, d, b, rng), draw(d, 0, b, rng),
                              draw(d, d, b, rng), draw(d, 0, b, rng),
                              draw(d, M, b, rng), draw(M, 0, b, rng)};
        return p;
    }

    std::vector<ad::Tensor> params() const { return {W_c, b_c, W_p1, b_p1, W_p2, b_p2}; }
};

struct ItemEncodings {
    ad::Tensor P;    // N x M, rows sum to 1
    ad::Tensor C;    // M x d anchor encodings
    ad::Tensor H_b;  // N x d, each row a convex mix of C's rows
};

// C = A W_c + b_c over the anchor rows A of H_a. Assignment logits come from
// a LeakyReLU layer over H_a followed by a linear map to M scores; P is the
// row softmax and H_b = P C.
inline ItemEncodings item_encodings(const ad::Tensor& H_a, const AnchorSet& anchors,
                                    const AnchorEncoderParams& p) {
    if (!H_a.is_matrix()) throw std::invalid_argument("item_encodings: H_a must be a matrix");
    for (int a : anchors.items)
        if (a < 0 || a >= H_a.rows())
            throw std::invalid_argument("item_encodings: anchor index out of range");
    if (p.W_p2.cols() != anchors.size())
        throw std::invalid_argument("item_encodings: W_p2 anchor-count mismatch");

    ItemEncodings out;
    auto A = ad::index_select(H_a, anchors.items);
    out.C = ad::add_rowvec(ad::matmul(A, p.W_c), p.b_c);
    auto hidden = ad::leaky_relu(ad::add_rowvec(ad::matmul(H_a, p.W_p1), p.b_p1));
    out.P = ad::softmax_rows(ad::add_rowvec(ad::matmul(hidden, p.W_p2), p.b_p2));
    out.H_b = ad::matmul(out.P, out.C);
    return out;
}

}  // namespace gsnias
