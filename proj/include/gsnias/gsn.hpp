// Graph spring propagation: every node's embedding relaxes toward a unit
// mixture of itself and its sampled neighbors, with aggregation weights
// re-softmaxed against the current mixture for T rounds. Layers stack on a
// shared synchronous snapshot and the per-layer outputs are summed.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnias/graph.hpp"
#include "gsnias/tensor.hpp"

namespace gsnias {

// UN(h) = h / ||h||
inline ad::Tensor unit_normalize(const ad::Tensor& h) { return ad::l2_normalize(h); }

// Per-iteration snapshot of the aggregation state, for external certification.
struct GsnTrace {
    std::vector<std::vector<double>> alphas;  // one entry per iteration
    std::vector<std::vector<double>> cs;
};

namespace detail_gsn {

// Core T-round update against a fixed m x d neighbor matrix.
// Returns the final mixture direction and the final aggregation weights.
inline std::pair<ad::Tensor, std::vector<double>> node_update(const ad::Tensor& h_i,
                                                              const ad::Tensor& nb, int T,
                                                              GsnTrace* trace) {
    if (T < 1) throw std::invalid_argument("gsn_node_update: T must be >= 1");
    ad::Tensor c = h_i;
    std::vector<double> last_alphas;
    for (int t = 0; t < T; ++t) {
        auto alphas = ad::softmax(ad::matvec(nb, c));
        c = ad::l2_normalize(ad::add(h_i, ad::matvec_t(nb, alphas)));
        last_alphas = alphas.value();
        if (trace) {
            trace->alphas.push_back(last_alphas);
            trace->cs.push_back(c.value());
        }
    }
    return {c, std::move(last_alphas)};
}

}  // namespace detail_gsn

// One node's relaxation against its neighbor embeddings. All inputs must be
// unit vectors. Zero neighbors: the embedding passes through untouched.
inline std::pair<ad::Tensor, std::vector<double>> gsn_node_update(
    const ad::Tensor& h_i, const std::vector<ad::Tensor>& neighbors, int T = 4,
    GsnTrace* trace = nullptr) {
    if (neighbors.empty()) return {h_i, {}};
    return detail_gsn::node_update(h_i, ad::stack_rows(neighbors), T, trace);
}

struct GsnLayerOutput {
    ad::Tensor H;                                // N x d, unit rows
    std::vector<std::vector<int>> neighbor_ids;  // ascending item index per node
    std::vector<std::vector<double>> alphas;     // aligned with neighbor_ids
};

namespace detail_gsn {

inline std::vector<std::vector<int>> sorted_neighbors(const SampledAdjacency& adj) {
    std::vector<std::vector<int>> out = adj.neighbors;
    for (auto& ids : out) std::sort(ids.begin(), ids.end());
    return out;
}

}  // namespace detail_gsn

// One synchronous layer: rows are unit-normalized once, then every node
// relaxes against that same snapshot. Neighbor sums run in ascending item
// index order so results do not depend on sampling list order.
inline GsnLayerOutput gsn_layer(const ad::Tensor& H, const SampledAdjacency& adj, int T = 4) {
    if (!H.is_matrix() || H.rows() != static_cast<int>(adj.neighbors.size()))
        throw std::invalid_argument("gsn_layer: embedding/adjacency size mismatch");

    GsnLayerOutput out;
    out.neighbor_ids = detail_gsn::sorted_neighbors(adj);
    out.alphas.resize(out.neighbor_ids.size());

    auto snapshot = ad::normalize_rows(H);
    std::vector<ad::Tensor> rows;
    rows.reserve(static_cast<size_t>(H.rows()));
    for (int i = 0; i < H.rows(); ++i) {
        auto h_i = ad::row(snapshot, i);
        const auto& ids = out.neighbor_ids[static_cast<size_t>(i)];
        if (ids.empty()) {
            rows.push_back(h_i);
            continue;
        }
        auto [c, a] = detail_gsn::node_update(h_i, ad::index_select(snapshot, ids), T, nullptr);
        rows.push_back(c);
        out.alphas[static_cast<size_t>(i)] = std::move(a);
    }
    out.H = ad::stack_rows(rows);
    return out;
}

// H_a = H(0) + H(1) + ... + H(L), H(0) the row-normalized table and each
// H(l) one spring layer over the previous. Differentiable end to end.
inline ad::Tensor item_embeddings(const ad::Tensor& H0, const SampledAdjacency& adj, int L,
                                  int T = 4) {
    if (L < 0) throw std::invalid_argument("item_embeddings: L must be >= 0");
    auto layer_in = ad::normalize_rows(H0);
    auto sum = layer_in;
    for (int l = 0; l < L; ++l) {
        layer_in = gsn_layer(layer_in, adj, T).H;
        sum = ad::add(sum, layer_in);
    }
    return sum;
}

// Final aggregation weights of every layer, captured without building
// gradient tape. Because each round re-derives the mixture from the layer
// snapshot, the layer output depends on the last round's weights only —
// replaying with these frozen weights reproduces the full forward pass.
struct FrozenAlphas {
    std::vector<std::vector<std::vector<double>>> per_layer;  // [layer][node][neighbor]
};

inline FrozenAlphas freeze_alphas(const ad::Tensor& H0, const SampledAdjacency& adj, int L,
                                  int T = 4) {
    ad::NoGradGuard guard;
    FrozenAlphas out;
    out.per_layer.reserve(static_cast<size_t>(L));
    auto layer_in = ad::normalize_rows(H0);
    for (int l = 0; l < L; ++l) {
        auto layer = gsn_layer(layer_in, adj, T);
        out.per_layer.push_back(layer.alphas);
        layer_in = layer.H;
    }
    return out;
}

// Differentiable replay of item_embeddings under fixed aggregation weights:
// one mixture per node per layer instead of T.
inline ad::Tensor item_embeddings_frozen(const ad::Tensor& H0, const SampledAdjacency& adj,
                                         const FrozenAlphas& frozen) {
    const auto ids_by_node = detail_gsn::sorted_neighbors(adj);
    auto layer_in = ad::normalize_rows(H0);
    auto sum = layer_in;
    for (const auto& layer_alphas : frozen.per_layer) {
        if (layer_alphas.size() != ids_by_node.size())
            throw std::invalid_argument("item_embeddings_frozen: node count mismatch");
        // mirror gsn_layer exactly, including its row re-normalization
        auto snapshot = ad::normalize_rows(layer_in);
        std::vector<ad::Tensor> rows;
        rows.reserve(ids_by_node.size());
        for (size_t i = 0; i < ids_by_node.size(); ++i) {
            auto h_i = ad::row(snapshot, static_cast<int>(i));
            const auto& ids = ids_by_node[i];
            if (ids.empty()) {
                rows.push_back(h_i);
                continue;
            }
            if (layer_alphas[i].size() != ids.size())
                throw std::invalid_argument("item_embeddings_frozen: alpha length mismatch");
            auto nb = ad::index_select(snapshot, ids);
            auto alphas = ad::Tensor::vector(std::vector<double>(layer_alphas[i]));
            rows.push_back(ad::l2_normalize(ad::add(h_i, ad::matvec_t(nb, alphas))));
        }
        layer_in = ad::stack_rows(rows);
        sum = ad::add(sum, layer_in);
    }
    return sum;
}

// Text dump: header `N d`, then one row per line, full double precision.
inline void dump_embeddings(const std::vector<double>& values, int n, int d,
                            const std::string& path) {
    if (static_cast<size_t>(n) * static_cast<size_t>(d) != values.size())
        throw std::invalid_argument("dump_embeddings: shape mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << n << ' ' << d << '\n';
    char buf[64];
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", values[static_cast<size_t>(i) * d + j]);
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gsnias
