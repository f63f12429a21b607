// Session datasets: loading, filtering, prefix augmentation, and a synthetic
// generator with category-structured transitions.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsnias/rng.hpp"

namespace gsnias {

struct Session {
    std::string id;
    std::vector<int> items;  // dense item indices, chronological order
};

// Sessions plus the item vocabulary that their indices refer to.
// labels[i] is the external label of index i; vocab inverts that mapping.
struct SessionCorpus {
    std::vector<Session> sessions;
    std::vector<std::string> labels;
    std::unordered_map<std::string, int> vocab;

    int n_items() const { return static_cast<int>(labels.size()); }

    int intern(const std::string& label) {
        auto it = vocab.find(label);
        if (it != vocab.end()) return it->second;
        const int idx = n_items();
        labels.push_back(label);
        vocab.emplace(label, idx);
        return idx;
    }
};

struct TrainingExample {
    std::vector<int> prefix;
    int target = 0;
};

enum class CorpusFormat { event_csv, lines };

namespace detail {

inline void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

[[noreturn]] inline void parse_error(const std::string& path, size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline long long parse_timestamp(const std::string& s, const std::string& path, size_t line) {
    long long t = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        parse_error(path, line, "bad timestamp '" + s + "'");
    return t;
}

}  // namespace detail

// Reads `session_id,item_id,timestamp` rows. Rows sharing a session id are
// merged (wherever they sit in the file) and ordered by timestamp; ties keep
// file order. Session and vocabulary order follow first appearance.
inline SessionCorpus load_event_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    detail::strip_cr(line);
    if (line != "session_id,item_id,timestamp")
        detail::parse_error(path, 1, "expected header 'session_id,item_id,timestamp'");

    SessionCorpus corpus;
    std::unordered_map<std::string, size_t> session_of;
    std::vector<std::vector<std::pair<long long, int>>> clicks;  // (timestamp, item)

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
            detail::parse_error(path, lineno, "expected 3 comma-separated fields");
        std::string sid = line.substr(0, c1);
        std::string item = line.substr(c1 + 1, c2 - c1 - 1);
        if (sid.empty() || item.empty())
            detail::parse_error(path, lineno, "empty session or item id");
        const long long ts = detail::parse_timestamp(line.substr(c2 + 1), path, lineno);

        auto [it, fresh] = session_of.emplace(std::move(sid), corpus.sessions.size());
        if (fresh) {
            corpus.sessions.push_back({it->first, {}});
            clicks.emplace_back();
        }
        clicks[it->second].emplace_back(ts, corpus.intern(item));
    }
    if (corpus.sessions.empty()) throw std::runtime_error(path + ": no sessions");

    for (size_t s = 0; s < clicks.size(); ++s) {
        std::stable_sort(clicks[s].begin(), clicks[s].end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        corpus.sessions[s].items.reserve(clicks[s].size());
        for (const auto& [ts, item] : clicks[s]) corpus.sessions[s].items.push_back(item);
    }
    return corpus;
}

// Reads `session_id<TAB>item,item,...` lines, one session per line.
inline SessionCorpus load_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    SessionCorpus corpus;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            detail::parse_error(path, lineno, "expected 'session_id<TAB>items'");
        Session sess;
        sess.id = line.substr(0, tab);
        size_t pos = tab + 1;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            if (comma == pos) detail::parse_error(path, lineno, "empty item label");
            sess.items.push_back(corpus.intern(line.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        corpus.sessions.push_back(std::move(sess));
    }
    if (corpus.sessions.empty()) throw std::runtime_error(path + ": no sessions");
    return corpus;
}

inline SessionCorpus load_sessions(const std::string& path, CorpusFormat format) {
    return format == CorpusFormat::event_csv ? load_event_csv(path) : load_lines(path);
}

inline void save_event_csv(const SessionCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "session_id,item_id,timestamp\n";
    for (const auto& s : corpus.sessions) {
        for (size_t t = 0; t < s.items.size(); ++t)
            out << s.id << ',' << corpus.labels[s.items[t]] << ',' << t << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void save_lines(const SessionCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& s : corpus.sessions) {
        out << s.id << '\t';
        for (size_t t = 0; t < s.items.size(); ++t) {
            if (t) out << ',';
            out << corpus.labels[s.items[t]];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Alternately drops rare items and short sessions until neither filter fires,
// then re-densifies the vocabulary keeping the surviving indices in their
// original relative order.
inline SessionCorpus preprocess(const SessionCorpus& input, int min_item_freq = 5,
                                int min_session_len = 2) {
    std::vector<Session> sessions = input.sessions;
    const int n = input.n_items();
    std::vector<bool> alive(static_cast<size_t>(n), true);

    for (;;) {
        std::vector<long long> freq(static_cast<size_t>(n), 0);
        for (const auto& s : sessions)
            for (int v : s.items) ++freq[static_cast<size_t>(v)];

        bool changed = false;
        for (int i = 0; i < n; ++i) {
            if (alive[static_cast<size_t>(i)] && freq[static_cast<size_t>(i)] > 0 &&
                freq[static_cast<size_t>(i)] < min_item_freq) {
                alive[static_cast<size_t>(i)] = false;
                changed = true;
            }
        }
        std::vector<Session> kept;
        kept.reserve(sessions.size());
        for (auto& s : sessions) {
            std::vector<int> items;
            items.reserve(s.items.size());
            for (int v : s.items)
                if (alive[static_cast<size_t>(v)]) items.push_back(v);
            if (static_cast<int>(items.size()) >= min_session_len)
                kept.push_back({std::move(s.id), std::move(items)});
            else
                changed = changed || !s.items.empty();
        }
        sessions = std::move(kept);
        if (!changed) break;
    }
    if (sessions.empty()) throw std::runtime_error("empty corpus after preprocessing");

    // Re-densify: only items still referenced keep a slot.
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (const auto& s : sessions)
        for (int v : s.items) used[static_cast<size_t>(v)] = true;
    std::vector<int> remap(static_cast<size_t>(n), -1);
    SessionCorpus out;
    for (int i = 0; i < n; ++i) {
        if (!used[static_cast<size_t>(i)]) continue;
        remap[static_cast<size_t>(i)] = out.n_items();
        out.labels.push_back(input.labels[static_cast<size_t>(i)]);
        out.vocab.emplace(input.labels[static_cast<size_t>(i)], remap[static_cast<size_t>(i)]);
    }
    out.sessions = std::move(sessions);
    for (auto& s : out.sessions)
        for (int& v : s.items) v = remap[static_cast<size_t>(v)];
    return out;
}

// Every session [v1..vt] becomes the examples ([v1..vt], v_{t+1}); prefixes
// keep only their most recent max_len items.
inline std::vector<TrainingExample> augment(const SessionCorpus& corpus, int max_len = 19) {
    if (max_len < 1) throw std::invalid_argument("augment: max_len must be >= 1");
    std::vector<TrainingExample> out;
    for (const auto& s : corpus.sessions) {
        for (size_t t = 1; t < s.items.size(); ++t) {
            const size_t begin = t > static_cast<size_t>(max_len) ? t - max_len : 0;
            out.push_back({{s.items.begin() + begin, s.items.begin() + t}, s.items[t]});
        }
    }
    return out;
}

// Random walks over items grouped into near-equal categories. Each step stays
// inside the current category with probability p_same_category and otherwise
// jumps to a uniformly chosen *different* category, so the measured fraction
// of same-category transitions matches p_same_category directly.
inline SessionCorpus generate_synthetic(std::uint64_t seed, int n_items, int n_categories,
                                        int n_sessions, int len_min, int len_max,
                                        double p_same_category) {
    if (n_items < 1 || n_categories < 1 || n_categories > n_items)
        throw std::invalid_argument("generate_synthetic: need 1 <= n_categories <= n_items");
    if (len_min < 2) throw std::invalid_argument("generate_synthetic: len_range.min < 2");
    if (len_max < len_min) throw std::invalid_argument("generate_synthetic: len_range inverted");
    if (!(p_same_category >= 0.0 && p_same_category <= 1.0))
        throw std::invalid_argument("generate_synthetic: p_same_category outside [0,1]");
    if (n_sessions < 1) throw std::invalid_argument("generate_synthetic: n_sessions < 1");

    // Contiguous blocks; the first n_items % n_categories blocks get one extra.
    std::vector<int> cat_begin(static_cast<size_t>(n_categories) + 1, 0);
    {
        const int base = n_items / n_categories, extra = n_items % n_categories;
        for (int c = 0; c < n_categories; ++c)
            cat_begin[static_cast<size_t>(c) + 1] =
                cat_begin[static_cast<size_t>(c)] + base + (c < extra ? 1 : 0);
    }
    std::vector<int> cat_of(static_cast<size_t>(n_items));
    for (int c = 0; c < n_categories; ++c)
        for (int i = cat_begin[static_cast<size_t>(c)]; i < cat_begin[static_cast<size_t>(c) + 1]; ++i)
            cat_of[static_cast<size_t>(i)] = c;

    SessionCorpus corpus;
    corpus.labels.reserve(static_cast<size_t>(n_items));
    for (int i = 0; i < n_items; ++i) corpus.intern("i" + std::to_string(i));

    Rng rng(seed);
    auto pick_in_cat = [&](int c) {
        const int lo = cat_begin[static_cast<size_t>(c)];
        const int hi = cat_begin[static_cast<size_t>(c) + 1];
        return lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo)));
    };

    corpus.sessions.reserve(static_cast<size_t>(n_sessions));
    for (int s = 0; s < n_sessions; ++s) {
        const int len =
            len_min + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(len_max - len_min + 1)));
        Session sess;
        sess.id = "s" + std::to_string(s);
        sess.items.reserve(static_cast<size_t>(len));
        int item = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_items)));
        sess.items.push_back(item);
        for (int t = 1; t < len; ++t) {
            int c = cat_of[static_cast<size_t>(item)];
            if (n_categories > 1 && rng.next_double() >= p_same_category) {
                int jump = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_categories - 1)));
                c = jump < c ? jump : jump + 1;
            }
            item = pick_in_cat(c);
            sess.items.push_back(item);
        }
        corpus.sessions.push_back(std::move(sess));
    }
    return corpus;
}

// Seeded shuffle of sessions, then a tail split. Both halves keep the full
// vocabulary so item indices stay comparable across the split.
inline std::pair<SessionCorpus, SessionCorpus> split_train_test(const SessionCorpus& corpus,
                                                                double test_frac,
                                                                std::uint64_t seed) {
    if (!(test_frac >= 0.0 && test_frac < 1.0))
        throw std::invalid_argument("split_train_test: test_frac outside [0,1)");
    std::vector<size_t> order(corpus.sessions.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const size_t n_test = static_cast<size_t>(static_cast<double>(order.size()) * test_frac);
    SessionCorpus train, test;
    train.labels = corpus.labels;
    train.vocab = corpus.vocab;
    test.labels = corpus.labels;
    test.vocab = corpus.vocab;
    for (size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < order.size() - n_test ? train : test;
        dst.sessions.push_back(corpus.sessions[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace gsnias
