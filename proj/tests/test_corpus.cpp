#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "gsnias/corpus.hpp"

using namespace gsnias;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/gsnias_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

SessionCorpus make_corpus(const std::vector<std::vector<std::string>>& sessions) {
    SessionCorpus c;
    int n = 0;
    for (const auto& s : sessions) {
        Session sess;
        sess.id = "s" + std::to_string(n++);
        for (const auto& label : s) sess.items.push_back(c.intern(label));
        c.sessions.push_back(std::move(sess));
    }
    return c;
}

}  // namespace

TEST_CASE("lines format parses a simple session") {
    TempFile f("lines1.tsv", "s1\ta,b,c\n");
    auto c = load_sessions(f.path, CorpusFormat::lines);
    REQUIRE(c.sessions.size() == 1);
    CHECK(c.sessions[0].id == "s1");
    CHECK(c.sessions[0].items == std::vector<int>{0, 1, 2});
    CHECK(c.n_items() == 3);
    CHECK(c.labels == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("event csv orders clicks by timestamp") {
    TempFile f("csv1.csv",
               "session_id,item_id,timestamp\n"
               "s1,a,2\n"
               "s1,b,1\n");
    auto c = load_sessions(f.path, CorpusFormat::event_csv);
    REQUIRE(c.sessions.size() == 1);
    // b clicked at t=1 comes before a at t=2, but vocabulary keeps file order
    CHECK(c.labels == std::vector<std::string>{"a", "b"});
    CHECK(c.sessions[0].items == std::vector<int>{1, 0});
}

TEST_CASE("event csv merges non-adjacent rows of one session") {
    TempFile f("csv2.csv",
               "session_id,item_id,timestamp\n"
               "s1,a,1\n"
               "s2,x,5\n"
               "s1,b,3\n"
               "s2,y,4\n"
               "s1,c,2\n");
    auto c = load_sessions(f.path, CorpusFormat::event_csv);
    REQUIRE(c.sessions.size() == 2);
    CHECK(c.sessions[0].id == "s1");
    // vocabulary order is file order: a, x, b, y, c
    CHECK(c.labels == std::vector<std::string>{"a", "x", "b", "y", "c"});
    CHECK(c.sessions[0].items == std::vector<int>{0, 4, 2});  // a, c, b by timestamp
    CHECK(c.sessions[1].items == std::vector<int>{3, 1});     // y, x
}

TEST_CASE("equal timestamps keep file order") {
    TempFile f("csv3.csv",
               "session_id,item_id,timestamp\n"
               "s1,a,7\n"
               "s1,b,7\n"
               "s1,c,7\n");
    auto c = load_sessions(f.path, CorpusFormat::event_csv);
    CHECK(c.sessions[0].items == std::vector<int>{0, 1, 2});
}

TEST_CASE("malformed input names the line") {
    TempFile bad_fields("csv4.csv", "session_id,item_id,timestamp\ns1,a\n");
    CHECK_THROWS_WITH(load_sessions(bad_fields.path, CorpusFormat::event_csv),
                      Catch::Matchers::ContainsSubstring(":2:"));
    TempFile bad_ts("csv5.csv", "session_id,item_id,timestamp\ns1,a,1\ns1,b,xyz\n");
    CHECK_THROWS_WITH(load_sessions(bad_ts.path, CorpusFormat::event_csv),
                      Catch::Matchers::ContainsSubstring(":3:"));
    TempFile bad_header("csv6.csv", "sid,item,ts\ns1,a,1\n");
    CHECK_THROWS_WITH(load_sessions(bad_header.path, CorpusFormat::event_csv),
                      Catch::Matchers::ContainsSubstring("header"));
    TempFile no_tab("lines2.tsv", "s1 a,b\n");
    CHECK_THROWS_WITH(load_sessions(no_tab.path, CorpusFormat::lines),
                      Catch::Matchers::ContainsSubstring(":1:"));
    TempFile empty("empty.csv", "");
    CHECK_THROWS(load_sessions(empty.path, CorpusFormat::event_csv));
    CHECK_THROWS(load_sessions(empty.path, CorpusFormat::lines));
    CHECK_THROWS(load_sessions("/nonexistent/nope.csv", CorpusFormat::event_csv));
}

TEST_CASE("lines round-trips through save_lines") {
    auto c = make_corpus({{"a", "b", "c"}, {"b", "d"}});
    TempFile f("roundtrip.tsv", "");
    save_lines(c, f.path);
    auto back = load_sessions(f.path, CorpusFormat::lines);
    REQUIRE(back.sessions.size() == 2);
    CHECK(back.labels == c.labels);
    CHECK(back.sessions[0].items == c.sessions[0].items);
    CHECK(back.sessions[1].items == c.sessions[1].items);
}

TEST_CASE("event csv round-trips through save_event_csv") {
    auto c = make_corpus({{"a", "b"}, {"b", "c", "a"}});
    TempFile f("roundtrip.csv", "");
    save_event_csv(c, f.path);
    auto back = load_sessions(f.path, CorpusFormat::event_csv);
    REQUIRE(back.sessions.size() == 2);
    CHECK(back.sessions[1].items == c.sessions[1].items);
}

TEST_CASE("preprocess keeps an already-clean corpus unchanged") {
    // every item appears 5 times, all sessions length >= 2
    auto c = make_corpus({{"a", "b"}, {"a", "b"}, {"a", "b"}, {"a", "b"}, {"a", "b"}});
    auto p = preprocess(c);
    REQUIRE(p.sessions.size() == 5);
    CHECK(p.labels == c.labels);
    for (size_t i = 0; i < 5; ++i) CHECK(p.sessions[i].items == c.sessions[i].items);
}

TEST_CASE("preprocess rejects a corpus that filters to nothing") {
    auto c = make_corpus({{"a", "b"}});
    CHECK_THROWS_WITH(preprocess(c), "empty corpus after preprocessing");
}

TEST_CASE("preprocess runs the filters to a fixed point") {
    // x appears 4 times -> removed; s0=[x,y] shrinks to [y] -> dropped; that
    // drop leaves y with 4 occurrences -> removed on the next pass.
    auto c = make_corpus({
        {"x", "y"},
        {"a", "b", "y", "x", "x"},
        {"a", "b", "y", "x"},
        {"a", "b", "y", "y"},
        {"a", "b", "a", "b"},
    });
    auto p = preprocess(c);
    REQUIRE(p.sessions.size() == 4);
    CHECK(p.labels == std::vector<std::string>{"a", "b"});
    CHECK(p.sessions[0].id == "s1");
    CHECK(p.sessions[0].items == std::vector<int>{0, 1});
    CHECK(p.sessions[1].items == std::vector<int>{0, 1});
    CHECK(p.sessions[2].items == std::vector<int>{0, 1});
    CHECK(p.sessions[3].items == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("preprocess is idempotent") {
    auto c = generate_synthetic(11, 40, 4, 60, 2, 6, 0.8);
    auto once = preprocess(c);
    auto twice = preprocess(once);
    REQUIRE(once.sessions.size() == twice.sessions.size());
    CHECK(once.labels == twice.labels);
    for (size_t i = 0; i < once.sessions.size(); ++i) {
        CHECK(once.sessions[i].id == twice.sessions[i].id);
        CHECK(once.sessions[i].items == twice.sessions[i].items);
    }
}

TEST_CASE("augment splits sessions into all prefixes") {
    auto c = make_corpus({{"a", "b", "c"}});
    auto ex = augment(c);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].prefix == std::vector<int>{0});
    CHECK(ex[0].target == 1);
    CHECK(ex[1].prefix == std::vector<int>{0, 1});
    CHECK(ex[1].target == 2);

    auto c2 = make_corpus({{"a", "b"}});
    CHECK(augment(c2).size() == 1);
}

TEST_CASE("augment truncates prefixes to the most recent max_len items") {
    SessionCorpus c;
    Session s;
    s.id = "long";
    for (int i = 0; i < 25; ++i) s.items.push_back(c.intern("v" + std::to_string(i)));
    c.sessions.push_back(s);
    auto ex = augment(c, 19);
    REQUIRE(ex.size() == 24);
    // last example predicts item 24 from the 19 items at positions 5..23
    const auto& last = ex.back();
    CHECK(last.target == 24);
    REQUIRE(last.prefix.size() == 19);
    CHECK(last.prefix.front() == 5);
    CHECK(last.prefix.back() == 23);
}

TEST_CASE("augment emits sum of (length - 1) examples") {
    auto c = generate_synthetic(3, 30, 3, 50, 2, 9, 0.7);
    size_t expected = 0;
    for (const auto& s : c.sessions) expected += s.items.size() - 1;
    CHECK(augment(c, 19).size() == expected);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    auto a = generate_synthetic(7, 50, 5, 40, 3, 8, 0.9);
    auto b = generate_synthetic(7, 50, 5, 40, 3, 8, 0.9);
    auto other = generate_synthetic(8, 50, 5, 40, 3, 8, 0.9);
    REQUIRE(a.sessions.size() == b.sessions.size());
    bool identical = true, differs = false;
    for (size_t i = 0; i < a.sessions.size(); ++i) {
        identical = identical && a.sessions[i].items == b.sessions[i].items;
        differs = differs || a.sessions[i].items != other.sessions[i].items;
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("synthetic degenerate parameters draw from a single pool") {
    auto c = generate_synthetic(5, 10, 1, 20, 2, 5, 1.0);
    CHECK(c.n_items() == 10);
    for (const auto& s : c.sessions) {
        CHECK(s.items.size() >= 2);
        CHECK(s.items.size() <= 5);
        for (int v : s.items) {
            CHECK(v >= 0);
            CHECK(v < 10);
        }
    }
}

TEST_CASE("synthetic rejects invalid parameters") {
    CHECK_THROWS(generate_synthetic(1, 10, 2, 5, 1, 5, 0.9));   // len_min < 2
    CHECK_THROWS(generate_synthetic(1, 10, 11, 5, 2, 5, 0.9));  // more categories than items
    CHECK_THROWS(generate_synthetic(1, 10, 2, 5, 5, 4, 0.9));   // inverted range
    CHECK_THROWS(generate_synthetic(1, 10, 2, 5, 2, 5, 1.5));   // bad probability
}

TEST_CASE("synthetic transitions stay within category at the requested rate") {
    const int n_items = 200, n_categories = 5;
    auto c = generate_synthetic(7, n_items, n_categories, 5000, 4, 10, 0.9);
    // independent category assignment: contiguous blocks of 40
    auto category = [&](int item) { return item / (n_items / n_categories); };
    long long same = 0, total = 0;
    for (const auto& s : c.sessions) {
        for (size_t t = 1; t < s.items.size(); ++t) {
            ++total;
            if (category(s.items[t]) == category(s.items[t - 1])) ++same;
        }
    }
    const double rate = static_cast<double>(same) / static_cast<double>(total);
    CHECK(rate == Catch::Approx(0.9).margin(0.02));
}

TEST_CASE("split keeps vocabulary and partitions sessions") {
    auto c = generate_synthetic(2, 30, 3, 100, 2, 6, 0.8);
    auto [train, test] = split_train_test(c, 0.1, 99);
    CHECK(train.sessions.size() == 90);
    CHECK(test.sessions.size() == 10);
    CHECK(train.labels == c.labels);
    CHECK(test.labels == c.labels);

    std::set<std::string> seen;
    for (const auto& s : train.sessions) seen.insert(s.id);
    for (const auto& s : test.sessions) {
        CHECK(seen.count(s.id) == 0);
        seen.insert(s.id);
    }
    CHECK(seen.size() == 100);

    auto [train2, test2] = split_train_test(c, 0.1, 99);
    REQUIRE(test2.sessions.size() == test.sessions.size());
    for (size_t i = 0; i < test.sessions.size(); ++i)
        CHECK(test.sessions[i].id == test2.sessions[i].id);
}
