#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnias/anchors.hpp"
#include "gsnias/config.hpp"
#include "gsnias/graph.hpp"
#include "gsnias/session_model.hpp"

namespace gsnias {

// Everything needed to score sessions without the training corpus: the model
// parameters, which items act as anchors, the sampled neighborhoods the
// spring layers ran on, and the vocabulary that maps labels to indices.
struct Checkpoint {
    TrainConfig config;
    std::vector<std::string> vocab;
    AnchorSet anchors;
    SampledAdjacency adj;
    ModelState model;
};

namespace detail_ckpt {

constexpr char kMagic[] = "GSNIAS1\n";  // 8 bytes on disk

struct TensorSpec {
    std::string name;
    std::string kind;  // matrix | vector | scalar
    int rows = 0, cols = 0;

    size_t numel() const {
        if (kind == "matrix") return static_cast<size_t>(rows) * static_cast<size_t>(cols);
        if (kind == "vector") return static_cast<size_t>(rows);
        return 1;
    }

    std::string line() const {
        std::string out = "tensor " + name + " " + kind;
        if (kind == "matrix")
            out += " " + std::to_string(rows) + " " + std::to_string(cols);
        else if (kind == "vector")
            out += " " + std::to_string(rows);
        return out;
    }
};

// Must list the parameters in the same order ModelState::all_params returns
// them; the payload is written and read back in this order.
inline std::vector<TensorSpec> layout(int n_items, int d, int m) {
    std::vector<TensorSpec> specs;
    auto mat = [&](const char* name, int r, int c) { specs.push_back({name, "matrix", r, c}); };
    auto vec = [&](const char* name, int r) { specs.push_back({name, "vector", r, 0}); };
    mat("H0", n_items, d);
    mat("W_c", d, d);
    vec("b_c", d);
    mat("W_p1", d, d);
    vec("b_p1", d);
    mat("W_p2", d, m);
    vec("b_p2", m);
    for (const char* g : {"z", "r", "h"}) {
        const std::string gate(g);
        mat(("W_" + gate).c_str(), d, d);
        mat(("U_" + gate).c_str(), d, d);
        vec(("b_" + gate).c_str(), d);
    }
    specs.push_back({"omega_a", "scalar", 0, 0});
    specs.push_back({"omega_b", "scalar", 0, 0});
    return specs;
}

inline void fail(const std::string& what) { throw std::runtime_error("checkpoint: " + what); }

inline std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) fail(std::string("truncated before ") + what);
    return line;
}

// "word rest-of-line" split used by the manifest parser.
inline std::pair<std::string, std::string> split_first(const std::string& line) {
    const auto pos = line.find(' ');
    if (pos == std::string::npos) return {line, ""};
    return {line.substr(0, pos), line.substr(pos + 1)};
}

}  // namespace detail_ckpt

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    using namespace detail_ckpt;
    const int n = static_cast<int>(ck.vocab.size());
    if (ck.model.n_items != n || ck.model.d != ck.config.d || ck.model.n_anchors != ck.config.M)
        fail("model dimensions disagree with config/vocabulary");
    auto specs = layout(n, ck.model.d, ck.model.n_anchors);
    auto params = ck.model.all_params();
    if (params.size() != specs.size()) fail("parameter list does not match the layout");
    for (size_t i = 0; i < specs.size(); ++i)
        if (params[i].size() != specs[i].numel())
            fail("unexpected shape for " + specs[i].name);

    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open '" + path + "' for writing");
    out.write(kMagic, 8);
    out << "version 1\n";
    for (const auto& [key, value] : config_entries(ck.config)) out << "config " << key << ' ' << value << '\n';
    out << "vocab " << n << '\n';
    for (const auto& label : ck.vocab) out << label << '\n';
    out << "anchors " << ck.anchors.size() << '\n';
    for (int i = 0; i < ck.anchors.size(); ++i)
        out << ck.anchors.items[static_cast<size_t>(i)] << (i + 1 < ck.anchors.size() ? ' ' : '\n');
    if (ck.anchors.size() == 0) out << '\n';
    out << "adjacency " << ck.adj.neighbors.size() << ' ' << ck.adj.r << '\n';
    for (const auto& nbrs : ck.adj.neighbors) {
        out << nbrs.size();
        for (int v : nbrs) out << ' ' << v;
        out << '\n';
    }
    out << "tensors " << specs.size() << '\n';
    for (const auto& s : specs) out << s.line() << '\n';
    out << "payload\n";
    for (const auto& p : params) {
        const auto& vals = p.value();
        out.write(reinterpret_cast<const char*>(vals.data()),
                  static_cast<std::streamsize>(vals.size() * sizeof(double)));
    }
    if (!out) fail("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace detail_ckpt;
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");

    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) fail("bad magic");
    if (next_line(in, "version") != "version 1") fail("unsupported version");

    Checkpoint ck;
    std::string line;
    // config block runs until the vocab header
    while (true) {
        line = next_line(in, "vocab header");
        auto [word, rest] = split_first(line);
        if (word == "vocab") break;
        if (word != "config") fail("expected config or vocab, got '" + line + "'");
        auto [key, value] = split_first(rest);
        set_config_field(ck.config, key, value);
    }
    const int n = static_cast<int>(detail_cfg::parse_int("vocab", split_first(line).second));
    if (n < 0) fail("negative vocab size");
    ck.vocab.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ck.vocab.push_back(next_line(in, "vocab entry"));

    line = next_line(in, "anchors header");
    {
        auto [word, rest] = split_first(line);
        if (word != "anchors") fail("expected anchors, got '" + line + "'");
        const int m = static_cast<int>(detail_cfg::parse_int("anchors", rest));
        std::istringstream row(next_line(in, "anchor list"));
        int v = 0;
        while (row >> v) {
            if (v < 0 || v >= n) fail("anchor index out of range");
            ck.anchors.items.push_back(v);
        }
        if (ck.anchors.size() != m) fail("anchor count mismatch");
    }

    line = next_line(in, "adjacency header");
    {
        std::istringstream head(line);
        std::string word;
        int rows = 0;
        if (!(head >> word >> rows >> ck.adj.r) || word != "adjacency" || rows != n)
            fail("bad adjacency header '" + line + "'");
        ck.adj.neighbors.resize(static_cast<size_t>(rows));
        for (auto& nbrs : ck.adj.neighbors) {
            std::istringstream row(next_line(in, "adjacency row"));
            size_t deg = 0;
            if (!(row >> deg)) fail("bad adjacency row");
            nbrs.resize(deg);
            for (auto& v : nbrs)
                if (!(row >> v) || v < 0 || v >= n) fail("bad adjacency neighbor");
        }
    }

    auto specs = layout(n, ck.config.d, ck.config.M);
    line = next_line(in, "tensor header");
    if (line != "tensors " + std::to_string(specs.size())) fail("bad tensor count '" + line + "'");
    for (const auto& s : specs)
        if (next_line(in, "tensor entry") != s.line()) fail("manifest does not match " + s.name);
    if (next_line(in, "payload marker") != "payload") fail("missing payload marker");

    // materialize the model, then overwrite every value buffer from the payload
    Rng scratch(0);
    ck.model = ModelState::init(n, ck.config.d, ck.config.M, scratch);
    auto params = ck.model.all_params();
    for (size_t i = 0; i < params.size(); ++i) {
        auto& vals = params[i].value();
        if (vals.size() != specs[i].numel()) fail("shape mismatch for " + specs[i].name);
        in.read(reinterpret_cast<char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(double)));
        if (static_cast<size_t>(in.gcount()) != vals.size() * sizeof(double))
            fail("payload truncated at " + specs[i].name);
    }
    if (in.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
    return ck;
}

}  // namespace gsnias
