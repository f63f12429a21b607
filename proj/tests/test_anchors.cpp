#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "gsnias/anchors.hpp"
#include "gsnias/gradcheck.hpp"

using namespace gsnias;
using ad::Tensor;

namespace {

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

// brute force with its own membership logic, as a second opinion
double entropy_by_enumeration(const SessionCorpus& c, int item) {
    double clicks = 0.0;
    for (const auto& s : c.sessions) clicks += static_cast<double>(s.items.size());
    double n_i = 0.0;
    for (const auto& s : c.sessions)
        if (std::find(s.items.begin(), s.items.end(), item) != s.items.end()) n_i += 1.0;
    double h = 0.0;
    for (const auto& s : c.sessions) {
        if (std::find(s.items.begin(), s.items.end(), item) == s.items.end()) continue;
        const double p = (static_cast<double>(s.items.size()) / clicks) *
                         (n_i / static_cast<double>(c.sessions.size()));
        h -= p * std::log(p);
    }
    return h;
}

Tensor random_matrix(int r, int c, Rng& rng, bool requires_grad = true) {
    std::vector<double> v(static_cast<size_t>(r) * c);
    for (auto& x : v) x = rng.next_double(-1.0, 1.0);
    return Tensor::matrix(r, c, std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("single-session corpus has zero entropy everywhere") {
    auto c = make_corpus({{"a", "b", "c"}});
    auto t = item_entropy(c);
    for (double h : t.entropy) CHECK(h == 0.0);
    CHECK(t.total_clicks == 3);
    CHECK(t.total_sessions == 1);
}

TEST_CASE("the two-session hand corpus matches enumeration and known values") {
    auto c = make_corpus({{"a", "b"}, {"a", "c", "b"}});
    auto t = item_entropy(c);
    REQUIRE(t.entropy.size() == 3);

    // a and b share their session footprint exactly
    CHECK(t.entropy[0] == t.entropy[1]);
    CHECK(t.session_count[0] == 2);
    CHECK(t.session_count[2] == 1);

    // -(0.4 ln 0.4 + 0.6 ln 0.6) and -0.3 ln 0.3
    CHECK(t.entropy[0] == Catch::Approx(0.673011667009256).margin(1e-10));
    CHECK(t.entropy[2] == Catch::Approx(0.361191841297781).margin(1e-10));

    for (int i = 0; i < 3; ++i)
        CHECK(t.entropy[static_cast<size_t>(i)] ==
              Catch::Approx(entropy_by_enumeration(c, i)).margin(1e-10));
}

TEST_CASE("duplicate clicks count their session once") {
    auto with_dup = make_corpus({{"a", "a", "b"}, {"b", "c"}});
    auto t = item_entropy(with_dup);
    CHECK(t.session_count[0] == 1);
    CHECK(t.total_clicks == 5);
    // one membership term for a: p = (3/5) * (1/2)
    const double p = 0.3;
    CHECK(t.entropy[0] == Catch::Approx(-p * std::log(p)).margin(1e-12));
}

TEST_CASE("entropy ignores session order and is nonnegative") {
    auto c1 = generate_synthetic(37, 30, 3, 50, 2, 7, 0.8);
    auto c2 = c1;
    std::reverse(c2.sessions.begin(), c2.sessions.end());
    auto t1 = item_entropy(c1);
    auto t2 = item_entropy(c2);
    for (size_t i = 0; i < t1.entropy.size(); ++i) {
        CHECK(t1.entropy[i] >= 0.0);
        // same sum in a different accumulation order
        CHECK(t1.entropy[i] == Catch::Approx(t2.entropy[i]).margin(1e-12));
    }
    SessionCorpus empty;
    CHECK_THROWS(item_entropy(empty));
}

TEST_CASE("anchor selection ranks by entropy then index") {
    auto c = make_corpus({{"a", "b"}, {"a", "c", "b"}});
    auto t = item_entropy(c);

    auto top2 = select_anchors(t, 2);
    CHECK(top2.items == std::vector<int>{0, 1});  // a, b beat c; tie favors a

    auto all = select_anchors(t, 3);
    CHECK(all.items == std::vector<int>{0, 1, 2});

    EntropyTable flat;
    flat.entropy = {1.0, 1.0, 1.0, 1.0};
    flat.session_count = {1, 1, 1, 1};
    CHECK(select_anchors(flat, 3).items == std::vector<int>{0, 1, 2});

    CHECK_THROWS(select_anchors(t, 4));
    CHECK_THROWS(select_anchors(t, 0));
}

TEST_CASE("a single anchor absorbs every item") {
    Rng rng(3);
    const int n = 5, d = 4;
    auto H_a = random_matrix(n, d, rng, false);
    auto p = AnchorEncoderParams::init(d, 1, rng);
    AnchorSet anchors;
    anchors.items = {2};
    auto enc = item_encodings(H_a, anchors, p);
    REQUIRE(enc.P.rows() == n);
    REQUIRE(enc.P.cols() == 1);
    for (int i = 0; i < n; ++i) {
        CHECK(enc.P.at(i, 0) == 1.0);
        for (int j = 0; j < d; ++j) CHECK(enc.H_b.at(i, j) == Catch::Approx(enc.C.at(0, j)).margin(1e-15));
    }
}

TEST_CASE("zero weights spread assignment uniformly") {
    Rng rng(5);
    const int n = 6, d = 4, M = 3;
    auto H_a = random_matrix(n, d, rng, false);
    AnchorEncoderParams p{Tensor::zeros_matrix(d, d, true), Tensor::zeros_vector(d, true),
                          Tensor::zeros_matrix(d, d, true), Tensor::zeros_vector(d, true),
                          Tensor::zeros_matrix(d, M, true), Tensor::zeros_vector(M, true)};
    AnchorSet anchors;
    anchors.items = {0, 2, 4};
    auto enc = item_encodings(H_a, anchors, p);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < M; ++m)
            CHECK(enc.P.at(i, m) == Catch::Approx(1.0 / M).margin(1e-15));
}

TEST_CASE("assignment rows are simplexes and encodings stay in the anchor hull") {
    Rng rng(11);
    const int n = 8, d = 5, M = 4;
    auto H_a = random_matrix(n, d, rng, false);
    auto p = AnchorEncoderParams::init(d, M, rng);
    AnchorSet anchors;
    anchors.items = {1, 3, 5, 7};
    auto enc = item_encodings(H_a, anchors, p);

    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int m = 0; m < M; ++m) {
            CHECK(enc.P.at(i, m) > 0.0);
            sum += enc.P.at(i, m);
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
    for (int j = 0; j < d; ++j) {
        double lo = 1e300, hi = -1e300;
        for (int m = 0; m < M; ++m) {
            lo = std::min(lo, enc.C.at(m, j));
            hi = std::max(hi, enc.C.at(m, j));
        }
        for (int i = 0; i < n; ++i) {
            CHECK(enc.H_b.at(i, j) >= lo - 1e-12);
            CHECK(enc.H_b.at(i, j) <= hi + 1e-12);
        }
    }
}

TEST_CASE("encoder rejects inconsistent inputs") {
    Rng rng(13);
    auto H_a = random_matrix(4, 3, rng, false);
    auto p = AnchorEncoderParams::init(3, 2, rng);
    AnchorSet bad;
    bad.items = {0, 9};
    CHECK_THROWS(item_encodings(H_a, bad, p));
    AnchorSet wrong_count;
    wrong_count.items = {0, 1, 2};
    CHECK_THROWS(item_encodings(H_a, wrong_count, p));
}

TEST_CASE("encoder gradients check out for every parameter") {
    Rng rng(17);
    const int n = 6, d = 4, M = 3;
    auto H_a = random_matrix(n, d, rng, true);
    auto p = AnchorEncoderParams::init(d, M, rng);
    AnchorSet anchors;
    anchors.items = {0, 3, 5};
    auto w = random_matrix(n, d, rng, false);
    auto closure = [&] {
        auto enc = item_encodings(H_a, anchors, p);
        return ad::sum(ad::mul(enc.H_b, w));
    };
    std::vector<Tensor> params{H_a};
    for (auto& t : p.params()) params.push_back(t);
    Rng srng(19);
    CHECK(grad_check(closure, params, 60, srng) < 1e-4);
}
