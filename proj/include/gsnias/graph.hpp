// Undirected co-occurrence graph over items and deterministic top-weight
// neighbor sampling.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsnias/corpus.hpp"

namespace gsnias {

struct ItemGraph {
    int n_nodes = 0;
    // adjacency[i] holds (neighbor, weight) sorted by neighbor index
    std::vector<std::vector<std::pair<int, long long>>> adjacency;

    long long degree(int i) const { return static_cast<long long>(adjacency[static_cast<size_t>(i)].size()); }
};

// Per-node list of at most r neighbor indices, highest co-occurrence first.
struct SampledAdjacency {
    int r = 0;
    std::vector<std::vector<int>> neighbors;
};

// Counts co-occurrences of distinct items over all position pairs (p, q),
// p < q, q - p <= k, within each session. Symmetric, no self-loops.
inline ItemGraph build_graph(const SessionCorpus& corpus, int k = 3) {
    if (k < 1) throw std::invalid_argument("build_graph: k must be >= 1");
    if (corpus.sessions.empty()) throw std::runtime_error("build_graph: empty corpus");

    const int n = corpus.n_items();
    std::unordered_map<std::uint64_t, long long> weight;
    for (const auto& s : corpus.sessions) {
        const auto& v = s.items;
        for (size_t p = 0; p < v.size(); ++p) {
            const size_t qmax = std::min(v.size(), p + static_cast<size_t>(k) + 1);
            for (size_t q = p + 1; q < qmax; ++q) {
                if (v[p] == v[q]) continue;
                const int lo = std::min(v[p], v[q]), hi = std::max(v[p], v[q]);
                ++weight[static_cast<std::uint64_t>(lo) * static_cast<std::uint64_t>(n) +
                         static_cast<std::uint64_t>(hi)];
            }
        }
    }

    ItemGraph g;
    g.n_nodes = n;
    g.adjacency.resize(static_cast<size_t>(n));
    for (const auto& [key, w] : weight) {
        const int i = static_cast<int>(key / static_cast<std::uint64_t>(n));
        const int j = static_cast<int>(key % static_cast<std::uint64_t>(n));
        g.adjacency[static_cast<size_t>(i)].emplace_back(j, w);
        g.adjacency[static_cast<size_t>(j)].emplace_back(i, w);
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

// Keeps the r heaviest neighbors per node; equal weights prefer the smaller
// item index. Nodes with fewer than r neighbors keep everything.
inline SampledAdjacency sample_neighbors(const ItemGraph& g, int r = 12) {
    if (r < 1) throw std::invalid_argument("sample_neighbors: r must be >= 1");
    SampledAdjacency out;
    out.r = r;
    out.neighbors.resize(static_cast<size_t>(g.n_nodes));
    for (int i = 0; i < g.n_nodes; ++i) {
        auto ranked = g.adjacency[static_cast<size_t>(i)];
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        const size_t keep = std::min(ranked.size(), static_cast<size_t>(r));
        auto& list = out.neighbors[static_cast<size_t>(i)];
        list.reserve(keep);
        for (size_t t = 0; t < keep; ++t) list.push_back(ranked[t].first);
    }
    return out;
}

// One line `i<TAB>j<TAB>w` per undirected edge, i < j, ascending.
inline void save_graph(const ItemGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (int i = 0; i < g.n_nodes; ++i)
        for (const auto& [j, w] : g.adjacency[static_cast<size_t>(i)])
            if (i < j) out << i << '\t' << j << '\t' << w << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

// n_nodes < 0 infers the node count from the largest index seen.
inline ItemGraph load_graph(const std::string& path, int n_nodes = -1) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::array<long long, 3>> edges;
    std::string line;
    size_t lineno = 0;
    int max_idx = -1;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        std::array<long long, 3> e{};
        size_t pos = 0;
        for (int f = 0; f < 3; ++f) {
            size_t tab = f < 2 ? line.find('\t', pos) : line.size();
            if (tab == std::string::npos) detail::parse_error(path, lineno, "expected i<TAB>j<TAB>w");
            const std::string tok = line.substr(pos, tab - pos);
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), e[static_cast<size_t>(f)]);
            if (ec != std::errc{} || ptr != tok.data() + tok.size())
                detail::parse_error(path, lineno, "bad integer '" + tok + "'");
            pos = tab + 1;
        }
        if (e[0] < 0 || e[1] <= e[0] || e[2] < 1)
            detail::parse_error(path, lineno, "edge must satisfy 0 <= i < j, w >= 1");
        max_idx = std::max(max_idx, static_cast<int>(e[1]));
        edges.push_back(e);
    }
    ItemGraph g;
    g.n_nodes = n_nodes < 0 ? max_idx + 1 : n_nodes;
    if (max_idx >= g.n_nodes) throw std::runtime_error(path + ": node index exceeds declared count");
    g.adjacency.resize(static_cast<size_t>(g.n_nodes));
    for (const auto& e : edges) {
        g.adjacency[static_cast<size_t>(e[0])].emplace_back(static_cast<int>(e[1]), e[2]);
        g.adjacency[static_cast<size_t>(e[1])].emplace_back(static_cast<int>(e[0]), e[2]);
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

}  // namespace gsnias
