// Pipeline driver: corpus preparation, graph construction, entropy reports,
// synthetic data, training, evaluation, and embedding dumps. Values resolve
// as explicit flags > --config file entries > built-in defaults.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "gsnias/anchors.hpp"
#include "gsnias/checkpoint.hpp"
#include "gsnias/corpus.hpp"
#include "gsnias/eval.hpp"
#include "gsnias/graph.hpp"
#include "gsnias/gsn.hpp"
#include "gsnias/training.hpp"

namespace {

using namespace gsnias;

CorpusFormat resolve_format(const std::string& flag, const std::string& path) {
    if (flag == "csv") return CorpusFormat::event_csv;
    if (flag == "lines") return CorpusFormat::lines;
    if (flag != "auto") throw std::runtime_error("unknown format '" + flag + "'");
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    return csv ? CorpusFormat::event_csv : CorpusFormat::lines;
}

SessionCorpus load_corpus(const std::string& path, const std::string& fmt_flag) {
    return resolve_format(fmt_flag, path) == CorpusFormat::event_csv ? load_event_csv(path)
                                                                     : load_lines(path);
}

void save_corpus(const SessionCorpus& corpus, const std::string& path,
                 const std::string& fmt_flag) {
    if (resolve_format(fmt_flag, path) == CorpusFormat::event_csv)
        save_event_csv(corpus, path);
    else
        save_lines(corpus, path);
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key=value lines; blank lines and #-comments allowed.
void apply_config_file(TrainConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + line + "'");
        try {
            set_config_field(cfg, trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

struct GlobalOpts {
    std::uint64_t seed = 42;
    bool seed_set = false;
    int threads = 1;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // flag-level config entries

    TrainConfig resolve() const {
        TrainConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (const auto& [key, value] : overrides) set_config_field(cfg, key, value);
        if (seed_set) cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

// Exposes every config key as a flag with the exact key name, so the config
// file and the command line cannot drift apart.
void add_config_flags(CLI::App* cmd, GlobalOpts& g) {
    for (const auto& [key, value] : config_entries(TrainConfig{})) {
        const std::string name = "--" + key;
        const std::string help = "config key (default " + value + ")";
        const std::string captured = key;
        cmd->add_option_function<std::string>(
            name, [&g, captured](const std::string& v) { g.overrides.emplace_back(captured, v); },
            help);
    }
}

void write_text(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "session-based recommender pipeline\n"
        "Option precedence: explicit flags > --config file > defaults.\n"
        "All stages run single-threaded; --threads 1 is the deterministic reference mode."};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed for synth/train (default 42)")
        ->each([&g](const std::string&) { g.seed_set = true; });
    app.add_option("--threads", g.threads, "worker threads (only 1 is implemented)")
        ->check(CLI::Range(1, 1024));
    app.add_option("--config", g.config_path, "key=value config file");

    std::string data, out, test_path, ckpt_path;
    std::string format = "auto";

    auto* pre = app.add_subcommand("preprocess", "drop rare items and short sessions");
    int min_item_freq = 5, min_session_len = 2;
    pre->add_option("--data", data, "input corpus")->required();
    pre->add_option("--out", out, "output corpus path")->required();
    pre->add_option("--format", format, "corpus format: auto|csv|lines");
    pre->add_option("--min-item-freq", min_item_freq, "minimum global clicks per item");
    pre->add_option("--min-session-len", min_session_len, "minimum clicks per session");
    pre->callback([&] {
        save_corpus(preprocess(load_corpus(data, format), min_item_freq, min_session_len), out,
                    format);
    });

    auto* bg = app.add_subcommand("build-graph", "co-click item graph as i<TAB>j<TAB>weight");
    bg->add_option("--data", data, "input corpus")->required();
    bg->add_option("--out", out, "graph output path")->required();
    bg->add_option("--format", format, "corpus format: auto|csv|lines");
    add_config_flags(bg, g);
    bg->callback([&] {
        const auto cfg = g.resolve();
        save_graph(build_graph(load_corpus(data, format), cfg.k), out);
    });

    auto* ent = app.add_subcommand("entropy", "items by descending click entropy");
    int top = 0;
    ent->add_option("--data", data, "input corpus")->required();
    ent->add_option("--top", top, "how many items to print (0 = all)");
    ent->add_option("--out", out, "output path (default stdout)");
    ent->add_option("--format", format, "corpus format: auto|csv|lines");
    ent->callback([&] {
        const auto corpus = load_corpus(data, format);
        const auto table = item_entropy(corpus);
        int m = corpus.n_items();
        if (top > 0 && top < m) m = top;
        const auto picked = select_anchors(table, m);
        std::string body;
        for (int idx : picked.items) {
            const auto i = static_cast<size_t>(idx);
            body += std::to_string(idx) + "\t" + detail_cfg::fmt_double(table.entropy[i]) + "\t" +
                    std::to_string(table.session_count[i]) + "\n";
        }
        write_text(out, body);
    });

    auto* synth = app.add_subcommand("synth", "deterministic category-structured corpus");
    int items = 200, categories = 5, sessions = 5000, len_min = 4, len_max = 10;
    double p_same = 0.9;
    synth->add_option("--items", items, "item count");
    synth->add_option("--categories", categories, "category count");
    synth->add_option("--sessions", sessions, "session count");
    synth->add_option("--len-min", len_min, "shortest session");
    synth->add_option("--len-max", len_max, "longest session");
    synth->add_option("--p-same", p_same, "probability the next click stays in category");
    synth->add_option("--out", out, "corpus output path")->required();
    synth->add_option("--format", format, "corpus format: auto|csv|lines");
    synth->callback([&] {
        save_corpus(generate_synthetic(g.seed, items, categories, sessions, len_min, len_max,
                                       p_same),
                    out, format);
    });

    auto* tr = app.add_subcommand("train", "fit the model and write a checkpoint");
    tr->add_option("--data", data, "training corpus")->required();
    tr->add_option("--out", out, "checkpoint output path")->required();
    tr->add_option("--format", format, "corpus format: auto|csv|lines");
    add_config_flags(tr, g);
    tr->callback([&] {
        const auto cfg = g.resolve();
        const auto corpus = load_corpus(data, format);
        auto ck = train(cfg, corpus, [](const EpochStats& s) {
            std::cout << "epoch\t" << s.epoch << "\tloss\t" << detail_cfg::fmt_double(s.mean_loss)
                      << "\tlr\t" << detail_cfg::fmt_double(s.lr) << "\n";
        });
        save_checkpoint(ck, out);
    });

    auto* ev = app.add_subcommand("evaluate", "rank held-out targets with a checkpoint");
    int cutoff = 20;
    ev->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    ev->add_option("--test", test_path, "held-out corpus")->required();
    ev->add_option("--cutoff", cutoff, "ranking cutoff K (default 20)");
    ev->add_option("--out", out, "also write a JSON summary here");
    ev->add_option("--format", format, "corpus format: auto|csv|lines");
    ev->callback([&] {
        const auto ck = load_checkpoint(ckpt_path);
        const auto corpus = load_corpus(test_path, format);
        const auto metrics = evaluate(ck, augment(corpus, ck.config.max_session_len), cutoff);
        std::cout << metrics_lines(metrics);
        if (!out.empty()) write_text(out, metrics_json(metrics));
    });

    auto* dump = app.add_subcommand("dump-embeddings", "propagated item embeddings as text");
    dump->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    dump->add_option("--out", out, "embedding output path")->required();
    dump->callback([&] {
        const auto ck = load_checkpoint(ckpt_path);
        ad::NoGradGuard guard;
        const auto H = item_embeddings(ck.model.H0, ck.adj, ck.config.L, ck.config.T);
        dump_embeddings(H.value(), ck.model.n_items, ck.model.d, out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "gsnias: " << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "gsnias: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
