#pragma once

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gsnias {

// When the spring-layer embeddings are refreshed during training: per_step
// rebuilds the full propagation every mini-batch (the reference semantics);
// per_epoch freezes each layer's attention weights at the top of the epoch
// and replays them as constants, which costs one aggregation per batch.
enum class GsnRefresh { per_step, per_epoch };

inline const char* refresh_name(GsnRefresh m) {
    return m == GsnRefresh::per_step ? "per_step" : "per_epoch";
}

inline GsnRefresh parse_refresh(const std::string& s) {
    if (s == "per_step") return GsnRefresh::per_step;
    if (s == "per_epoch") return GsnRefresh::per_epoch;
    throw std::invalid_argument("gsn_refresh must be per_step or per_epoch, got '" + s + "'");
}

struct TrainConfig {
    int d = 100;              // embedding width
    int batch = 100;          // mini-batch size
    double lr = 0.01;         // Adam base learning rate
    double lr_decay = 0.1;    // multiplier applied every lr_every epochs
    int lr_every = 3;
    double l2 = 1e-5;         // weight decay folded into the gradient
    int k = 3;                // co-click window radius for the item graph
    int T = 4;                // spring rounds per layer
    int L = 1;                // spring layers
    int M = 100;              // anchor count (must not exceed the item count)
    int r = 12;               // sampled neighbors per item
    int epochs = 10;
    std::uint64_t seed = 42;
    int max_session_len = 19;  // prefixes are clipped to this many clicks
    GsnRefresh gsn_refresh = GsnRefresh::per_step;

    void validate() const {
        auto need = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("config: ") + what);
        };
        need(d > 0, "d must be positive");
        need(batch > 0, "batch must be positive");
        need(lr > 0.0, "lr must be positive");
        need(lr_decay > 0.0, "lr_decay must be positive");
        need(lr_every > 0, "lr_every must be positive");
        need(l2 >= 0.0, "l2 must be nonnegative");
        need(k >= 1, "k must be at least 1");
        need(T >= 1, "T must be at least 1");
        need(L >= 1, "L must be at least 1");
        need(M >= 1, "M must be at least 1");
        need(r >= 1, "r must be at least 1");
        need(epochs >= 0, "epochs must be nonnegative");
        need(max_session_len >= 1, "max_session_len must be positive");
    }
};

namespace detail_cfg {

// Shortest decimal that round-trips the exact double.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& s) {
    double out = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        throw std::invalid_argument("config: bad number for " + key + ": '" + s + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& s) {
    long long out = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        throw std::invalid_argument("config: bad integer for " + key + ": '" + s + "'");
    return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    std::uint64_t out = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        throw std::invalid_argument("config: bad integer for " + key + ": '" + s + "'");
    return out;
}

}  // namespace detail_cfg

// Assigns one key=value entry; unknown keys are an error so that a typo in a
// config file cannot silently fall back to a default.
inline void set_config_field(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail_cfg;
    if (key == "d")
        cfg.d = static_cast<int>(parse_int(key, value));
    else if (key == "batch")
        cfg.batch = static_cast<int>(parse_int(key, value));
    else if (key == "lr")
        cfg.lr = parse_double(key, value);
    else if (key == "lr_decay")
        cfg.lr_decay = parse_double(key, value);
    else if (key == "lr_every")
        cfg.lr_every = static_cast<int>(parse_int(key, value));
    else if (key == "l2")
        cfg.l2 = parse_double(key, value);
    else if (key == "k")
        cfg.k = static_cast<int>(parse_int(key, value));
    else if (key == "T")
        cfg.T = static_cast<int>(parse_int(key, value));
    else if (key == "L")
        cfg.L = static_cast<int>(parse_int(key, value));
    else if (key == "M")
        cfg.M = static_cast<int>(parse_int(key, value));
    else if (key == "r")
        cfg.r = static_cast<int>(parse_int(key, value));
    else if (key == "epochs")
        cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed")
        cfg.seed = parse_u64(key, value);
    else if (key == "max_session_len")
        cfg.max_session_len = static_cast<int>(parse_int(key, value));
    else if (key == "gsn_refresh")
        cfg.gsn_refresh = parse_refresh(value);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

// Ordered key/value view; the checkpoint manifest and the CLI both reuse it so
// the accepted keys stay in one place.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
    using detail_cfg::fmt_double;
    return {
        {"d", std::to_string(cfg.d)},
        {"batch", std::to_string(cfg.batch)},
        {"lr", fmt_double(cfg.lr)},
        {"lr_decay", fmt_double(cfg.lr_decay)},
        {"lr_every", std::to_string(cfg.lr_every)},
        {"l2", fmt_double(cfg.l2)},
        {"k", std::to_string(cfg.k)},
        {"T", std::to_string(cfg.T)},
        {"L", std::to_string(cfg.L)},
        {"M", std::to_string(cfg.M)},
        {"r", std::to_string(cfg.r)},
        {"epochs", std::to_string(cfg.epochs)},
        {"seed", std::to_string(cfg.seed)},
        {"max_session_len", std::to_string(cfg.max_session_len)},
        {"gsn_refresh", refresh_name(cfg.gsn_refresh)},
    };
}

}  // namespace gsnias
