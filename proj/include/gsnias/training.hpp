#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnias/checkpoint.hpp"
#include "gsnias/corpus.hpp"
#include "gsnias/eval.hpp"
#include "gsnias/graph.hpp"
#include "gsnias/gsn.hpp"
#include "gsnias/optim.hpp"

namespace gsnias {

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;  // example-weighted mean over the epoch's batches
    double lr = 0.0;
};

namespace detail_train {

inline void check_finite(double loss, int epoch, size_t batch) {
    if (std::isfinite(loss)) return;
    throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch));
}

}  // namespace detail_train

// Full pipeline: co-click graph, neighbor sampling, entropy-ranked anchors,
// then Adam over the fused loss with the configured learning-rate schedule.
// The graph, the sampled neighborhoods, and the anchors are computed once up
// front from the training corpus; only the embeddings move during training.
inline Checkpoint train(const TrainConfig& cfg, const SessionCorpus& corpus,
                        const std::function<void(const EpochStats&)>& on_epoch = {}) {
    cfg.validate();
    if (cfg.M > corpus.n_items())
        throw std::invalid_argument("train: more anchors than items");

    const auto adj = sample_neighbors(build_graph(corpus, cfg.k), cfg.r);
    const auto anchors = select_anchors(item_entropy(corpus), cfg.M);
    const auto examples = augment(corpus, cfg.max_session_len);
    if (examples.empty()) throw std::invalid_argument("train: corpus yields no examples");

    Rng rng(cfg.seed);
    ModelState model = ModelState::init(corpus.n_items(), cfg.d, cfg.M, rng);
    auto params = model.all_params();
    AdamState opt;
    AdamConfig adam;
    adam.weight_decay = cfg.l2;

    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = scheduled_lr(cfg.lr, cfg.lr_decay, cfg.lr_every, epoch);
        rng.shuffle(order);

        FrozenAlphas frozen;
        if (cfg.gsn_refresh == GsnRefresh::per_epoch)
            frozen = freeze_alphas(model.H0, adj, cfg.L, cfg.T);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
            std::vector<std::vector<int>> prefixes;
            std::vector<int> targets;
            prefixes.reserve(stop - start);
            targets.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) {
                prefixes.push_back(examples[order[i]].prefix);
                targets.push_back(examples[order[i]].target);
            }

            auto H_a = cfg.gsn_refresh == GsnRefresh::per_step
                           ? item_embeddings(model.H0, adj, cfg.L, cfg.T)
                           : item_embeddings_frozen(model.H0, adj, frozen);
            auto enc = item_encodings(H_a, anchors, model.encoder);
            auto bundle = forward_batch(model, prefixes, H_a, enc.H_b);
            auto batch_loss = loss_batch(bundle, targets);

            const double lval = batch_loss.item();
            detail_train::check_finite(lval, epoch, start / static_cast<size_t>(cfg.batch));
            loss_sum += lval * static_cast<double>(stop - start);

            for (auto& p : params) p.zero_grad();
            ad::backward(batch_loss);
            adam_step(params, opt, lr, adam);
        }

        if (on_epoch)
            on_epoch({epoch, loss_sum / static_cast<double>(order.size()), lr});
    }

    Checkpoint ck;
    ck.config = cfg;
    ck.vocab = corpus.labels;
    ck.anchors = anchors;
    ck.adj = adj;
    ck.model = std::move(model);
    return ck;
}

}  // namespace gsnias
