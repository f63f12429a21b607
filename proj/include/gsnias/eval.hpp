#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "gsnias/checkpoint.hpp"
#include "gsnias/corpus.hpp"
#include "gsnias/gsn.hpp"

namespace gsnias {

struct Metrics {
    double hr_at_k = 0.0;   // fraction of targets ranked within the cutoff
    double mrr_at_k = 0.0;  // mean reciprocal rank, zero beyond the cutoff
    int k = 20;
    long long n_evaluated = 0;
    long long n_skipped = 0;  // examples with out-of-vocabulary indices
};

namespace detail_eval {

// Tallies ranks by value so the resulting means do not depend on the order
// the examples arrived in: the reciprocal-rank sum is taken rank-ascending.
struct RankTally {
    explicit RankTally(int k) : cutoff(k), at_rank(static_cast<size_t>(k) + 1, 0) {}

    void add(int rank) {
        ++n;
        if (rank <= cutoff) ++at_rank[static_cast<size_t>(rank)];
    }

    Metrics finish(long long skipped) const {
        Metrics m;
        m.k = cutoff;
        m.n_evaluated = n;
        m.n_skipped = skipped;
        if (n == 0) return m;
        long long hits = 0;
        double recip = 0.0;
        for (int rank = 1; rank <= cutoff; ++rank) {
            hits += at_rank[static_cast<size_t>(rank)];
            recip += static_cast<double>(at_rank[static_cast<size_t>(rank)]) / rank;
        }
        m.hr_at_k = static_cast<double>(hits) / static_cast<double>(n);
        m.mrr_at_k = recip / static_cast<double>(n);
        return m;
    }

    int cutoff;
    long long n = 0;
    std::vector<long long> at_rank;
};

// 1-based rank of `target` within row `row` of a score matrix, scores
// descending with ties going to the smaller item index.
inline int rank_in_row(const ad::Tensor& scores, int row, int target) {
    const double s = scores.at(row, target);
    int rank = 1;
    for (int i = 0; i < scores.cols(); ++i) {
        const double v = scores.at(row, i);
        if (v > s || (v == s && i < target)) ++rank;
    }
    return rank;
}

inline bool in_vocab(const TrainingExample& ex, int n_items) {
    if (ex.target < 0 || ex.target >= n_items) return false;
    for (int v : ex.prefix)
        if (v < 0 || v >= n_items) return false;
    return !ex.prefix.empty();
}

}  // namespace detail_eval

// Scores every test example with the checkpointed model and ranks all items
// by fused probability. Examples touching unknown item indices are skipped
// and surface in n_skipped.
inline Metrics evaluate(const Checkpoint& ck, const std::vector<TrainingExample>& test,
                        int K = 20) {
    if (K < 1) throw std::invalid_argument("evaluate: cutoff must be positive");
    ad::NoGradGuard guard;
    const int n = ck.model.n_items;
    auto H_a = item_embeddings(ck.model.H0, ck.adj, ck.config.L, ck.config.T);
    auto enc = item_encodings(H_a, ck.anchors, ck.model.encoder);

    std::vector<const TrainingExample*> valid;
    long long skipped = 0;
    for (const auto& ex : test) {
        if (detail_eval::in_vocab(ex, n))
            valid.push_back(&ex);
        else
            ++skipped;
    }

    detail_eval::RankTally tally(K);
    const size_t stride = static_cast<size_t>(ck.config.batch);
    for (size_t start = 0; start < valid.size(); start += stride) {
        const size_t stop = std::min(valid.size(), start + stride);
        std::vector<std::vector<int>> prefixes;
        prefixes.reserve(stop - start);
        for (size_t i = start; i < stop; ++i) prefixes.push_back(valid[i]->prefix);
        auto batch = forward_batch(ck.model, prefixes, H_a, enc.H_b);
        for (size_t i = start; i < stop; ++i)
            tally.add(detail_eval::rank_in_row(batch.Y_fused, static_cast<int>(i - start),
                                               valid[i]->target));
    }
    return tally.finish(skipped);
}

// Global click counts per item over the whole corpus.
inline std::vector<long long> item_click_counts(const SessionCorpus& corpus) {
    std::vector<long long> counts(static_cast<size_t>(corpus.n_items()), 0);
    for (const auto& s : corpus.sessions)
        for (int v : s.items) ++counts[static_cast<size_t>(v)];
    return counts;
}

// Items ordered by training popularity, ties broken by ascending index.
inline std::vector<int> baseline_pop(const SessionCorpus& corpus) {
    auto counts = item_click_counts(corpus);
    std::vector<int> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return counts[static_cast<size_t>(a)] > counts[static_cast<size_t>(b)];
    });
    return order;
}

// Same-session popularity: within-prefix counts first, global popularity as
// the backfill, index ascending on full ties.
inline std::vector<int> baseline_spop(const SessionCorpus& corpus, const std::vector<int>& prefix) {
    auto global = item_click_counts(corpus);
    std::vector<long long> local(global.size(), 0);
    for (int v : prefix)
        if (v >= 0 && v < static_cast<int>(local.size())) ++local[static_cast<size_t>(v)];
    std::vector<int> order(global.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto sa = static_cast<size_t>(a), sb = static_cast<size_t>(b);
        if (local[sa] != local[sb]) return local[sa] > local[sb];
        return global[sa] > global[sb];
    });
    return order;
}

// Runs any prefix -> item-ranking function over the test examples; the rank
// of a target is its 1-based position in the returned ordering.
template <typename Ranker>
Metrics evaluate_ranking(int n_items, Ranker&& ranker, const std::vector<TrainingExample>& test,
                         int K = 20) {
    if (K < 1) throw std::invalid_argument("evaluate_ranking: cutoff must be positive");
    detail_eval::RankTally tally(K);
    long long skipped = 0;
    for (const auto& ex : test) {
        if (!detail_eval::in_vocab(ex, n_items)) {
            ++skipped;
            continue;
        }
        const std::vector<int> order = ranker(ex.prefix);
        int rank = K + 1;  // targets missing from a partial ranking count as misses
        for (int pos = 0; pos < static_cast<int>(order.size()); ++pos) {
            if (order[static_cast<size_t>(pos)] == ex.target) {
                rank = pos + 1;
                break;
            }
        }
        tally.add(rank);
    }
    return tally.finish(skipped);
}

// `metric<TAB>value` lines, one per field.
inline std::string metrics_lines(const Metrics& m) {
    const std::string k = std::to_string(m.k);
    std::string out;
    out += "hr@" + k + "\t" + detail_cfg::fmt_double(m.hr_at_k) + "\n";
    out += "mrr@" + k + "\t" + detail_cfg::fmt_double(m.mrr_at_k) + "\n";
    out += "n_evaluated\t" + std::to_string(m.n_evaluated) + "\n";
    out += "n_skipped\t" + std::to_string(m.n_skipped) + "\n";
    return out;
}

inline std::string metrics_json(const Metrics& m) {
    std::string out = "{";
    out += "\"k\": " + std::to_string(m.k);
    out += ", \"hr_at_k\": " + detail_cfg::fmt_double(m.hr_at_k);
    out += ", \"mrr_at_k\": " + detail_cfg::fmt_double(m.mrr_at_k);
    out += ", \"n_evaluated\": " + std::to_string(m.n_evaluated);
    out += ", \"n_skipped\": " + std::to_string(m.n_skipped);
    out += "}\n";
    return out;
}

}  // namespace gsnias
