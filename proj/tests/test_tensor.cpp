#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gsnias/gradcheck.hpp"
#include "gsnias/rng.hpp"
#include "gsnias/tensor.hpp"

using namespace gsnias;
using ad::Tensor;

namespace {

Tensor random_vector(int n, Rng& rng, bool rg = true) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_double(-1.0, 1.0);
    return Tensor::vector(std::move(v), rg);
}

Tensor random_matrix(int r, int c, Rng& rng, bool rg = true) {
    std::vector<double> v(static_cast<size_t>(r) * c);
    for (auto& x : v) x = rng.next_double(-1.0, 1.0);
    return Tensor::matrix(r, c, std::move(v), rg);
}

}  // namespace

TEST_CASE("softmax forward") {
    auto y = ad::softmax(Tensor::vector({0.0, 0.0}));
    CHECK(y.at(0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(y.at(1) == Catch::Approx(0.5).margin(1e-15));

    // exp(1)/(exp(1)+1), 1/(exp(1)+1)
    auto z = ad::softmax(Tensor::vector({1.0, 0.0}));
    CHECK(z.at(0) == Catch::Approx(0.73106).margin(1e-5));
    CHECK(z.at(1) == Catch::Approx(0.26894).margin(1e-5));
}

TEST_CASE("softmax shift invariance and simplex outputs") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_vector(7, rng, false);
        const double c = rng.next_double(-50.0, 50.0);
        std::vector<double> shifted = x.value();
        for (auto& v : shifted) v += c;
        auto a = ad::softmax(x);
        auto b = ad::softmax(Tensor::vector(shifted));
        double total = 0.0;
        for (int i = 0; i < 7; ++i) {
            CHECK(a.at(i) == Catch::Approx(b.at(i)).margin(1e-12));
            CHECK(a.at(i) > 0.0);
            total += a.at(i);
        }
        CHECK(total == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("shape mismatch names the op") {
    auto a = Tensor::vector({1.0, 2.0});
    auto b = Tensor::vector({1.0, 2.0, 3.0});
    CHECK_THROWS_WITH(ad::add(a, b), Catch::Matchers::StartsWith("add:"));
    auto m = Tensor::zeros_matrix(2, 3);
    CHECK_THROWS_WITH(ad::matmul(m, m), Catch::Matchers::StartsWith("matmul:"));
    CHECK_THROWS_WITH(ad::matvec(m, a), Catch::Matchers::StartsWith("matvec:"));
}

TEST_CASE("backward of sum is all-ones") {
    auto x = Tensor::vector({1.0, -2.0, 3.5}, true);
    auto loss = ad::sum(x);
    ad::backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("sigmoid gradient at zero is 0.25") {
    auto x = Tensor::scalar(0.0, true);
    auto loss = ad::sigmoid(x);
    ad::backward(loss);
    CHECK(x.grad()[0] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("backward requires scalar loss") {
    auto x = Tensor::vector({1.0, 2.0}, true);
    auto y = ad::scale(x, 2.0);
    CHECK_THROWS_AS(ad::backward(y), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates on leaves") {
    auto x = Tensor::vector({1.0, 2.0}, true);
    auto loss = ad::sum(ad::mul(x, x));
    ad::backward(loss);
    ad::backward(loss);
    CHECK(x.grad()[0] == Catch::Approx(4.0));  // 2*2x with x=1, accumulated twice
    CHECK(x.grad()[1] == Catch::Approx(8.0));
    x.zero_grad();
    ad::backward(loss);
    CHECK(x.grad()[0] == Catch::Approx(2.0));
}

TEST_CASE("softmax+log gradient matches central differences") {
    Rng rng(7);
    auto x = random_vector(3, rng);
    auto w = random_vector(3, rng, false);
    auto closure = [&]() { return ad::sum(ad::mul(ad::log(ad::softmax(x)), w)); };
    Rng sample_rng(3);
    CHECK(grad_check(closure, {x}, 30, sample_rng) < 1e-6);
}

TEST_CASE("grad_check on quadratic closure is near-exact") {
    auto theta = Tensor::scalar(3.0, true);
    auto closure = [&]() { return ad::mul(theta, theta); };
    Rng rng(1);
    CHECK(grad_check(closure, {theta}, 5, rng) < 1e-9);

    // and the analytic gradient itself is 2*theta = 6
    theta.zero_grad();
    ad::backward(closure());
    CHECK(theta.grad()[0] == Catch::Approx(6.0).margin(1e-12));
}

TEST_CASE("grad_check on constant closure is zero") {
    auto theta = Tensor::scalar(1.5, true);
    auto c = Tensor::scalar(2.0);
    auto closure = [&]() { return ad::sum(c); };
    Rng rng(1);
    CHECK(grad_check(closure, {theta}, 3, rng) == 0.0);
}

TEST_CASE("every differentiable op passes grad_check in isolation") {
    Rng rng(42);
    Rng srng(43);

    auto check = [&](const std::function<Tensor()>& closure, std::vector<Tensor> params,
                     int samples = 24) {
        CHECK(grad_check(closure, std::move(params), samples, srng) < 1e-4);
    };

    auto weight = [&](const Tensor& t) {
        // random fixed projection to scalar, so gradients are not uniform
        Rng wr(99);
        std::vector<double> w(t.size());
        for (auto& x : w) x = wr.next_double(-1.0, 1.0);
        return Tensor::vector(std::move(w));
    };

    SECTION("add/sub/mul/affine") {
        auto a = random_vector(5, rng), b = random_vector(5, rng);
        check([&] { return ad::sum(ad::mul(ad::add(a, b), ad::sub(a, b))); }, {a, b});
        check([&] { return ad::sum(ad::affine(a, 1.7, -0.3)); }, {a});
        auto s = Tensor::scalar(0.8, true);
        check([&] { return ad::sum(ad::mul(a, s)); }, {a, s});
    }
    SECTION("activations") {
        auto a = random_vector(6, rng);
        check([&] { return ad::sum(ad::sigmoid(a)); }, {a});
        check([&] { return ad::sum(ad::tanh(a)); }, {a});
        check([&] { return ad::sum(ad::leaky_relu(a)); }, {a});
    }
    SECTION("softmax and log") {
        auto a = random_vector(6, rng);
        auto w = weight(a);
        check([&] { return ad::sum(ad::mul(ad::softmax(a), w)); }, {a});
        auto m = random_matrix(3, 4, rng);
        auto wm = weight(m);
        check([&] {
            auto sm = ad::softmax_rows(m);
            std::vector<double> flat = wm.value();
            return ad::sum(ad::mul(sm, Tensor::matrix(3, 4, std::move(flat))));
        }, {m});
        auto pos = Tensor::vector({0.5, 1.5, 2.5}, true);
        check([&] { return ad::sum(ad::log(pos)); }, {pos});
    }
    SECTION("matrix products") {
        auto A = random_matrix(3, 4, rng);
        auto B = random_matrix(4, 2, rng);
        auto C = random_matrix(5, 4, rng);
        auto x = random_vector(4, rng);
        auto y = random_vector(3, rng);
        check([&] { return ad::sum(ad::matmul(A, B)); }, {A, B});
        check([&] { return ad::sum(ad::matmul_nt(A, C)); }, {A, C});
        check([&] { return ad::sum(ad::matvec(A, x)); }, {A, x});
        check([&] { return ad::sum(ad::matvec_t(A, y)); }, {A, y});
        check([&] { return ad::sum(ad::add_rowvec(A, x)); }, {A, x});
    }
    SECTION("indexing and assembly") {
        auto M = random_matrix(5, 3, rng);
        auto sel = ad::index_select(M, {4, 0, 0, 2});
        REQUIRE(sel.rows() == 4);
        REQUIRE(sel.cols() == 3);
        CHECK(sel.at(0, 1) == M.at(4, 1));
        CHECK(sel.at(2, 2) == M.at(0, 2));
        auto gath = ad::gather_cols(M, {2, 0, 1, 1, 0});
        REQUIRE(gath.rows() == 5);
        CHECK(gath.at(3) == M.at(3, 1));
        check([&] { return ad::sum(ad::index_select(M, {4, 0, 0, 2})); }, {M});
        check([&] { return ad::sum(ad::row(M, 2)); }, {M});
        check([&] { return ad::sum(ad::gather_cols(M, {2, 0, 1, 1, 0})); }, {M});
        auto v = random_vector(4, rng);
        check([&] { return ad::element(v, 1); }, {v});
        auto u = random_vector(3, rng);
        check([&] { return ad::sum(ad::concat({v, u})); }, {v, u});
        auto wm = random_matrix(3, 3, rng, false);
        check([&] { return ad::sum(ad::mul(ad::stack_rows({u, u, ad::scale(u, 2.0)}), wm)); },
              {u});
    }
    SECTION("normalization") {
        auto v = random_vector(5, rng);
        auto w = weight(v);
        check([&] { return ad::sum(ad::mul(ad::l2_normalize(v), w)); }, {v});
        auto M = random_matrix(4, 3, rng);
        auto wm = weight(M);
        check([&] {
            std::vector<double> flat = wm.value();
            return ad::sum(ad::mul(ad::normalize_rows(M), Tensor::matrix(4, 3, std::move(flat))));
        }, {M});
    }
}

TEST_CASE("matmul backward shape duality") {
    Rng rng(5);
    auto A = random_matrix(3, 4, rng);
    auto B = random_matrix(4, 2, rng);
    auto loss = ad::sum(ad::matmul(A, B));
    ad::backward(loss);
    CHECK(A.grad().size() == A.size());
    CHECK(B.grad().size() == B.size());
}

TEST_CASE("l2_normalize rejects degenerate vectors") {
    auto z = Tensor::vector({0.0, 0.0, 0.0});
    CHECK_THROWS_AS(ad::l2_normalize(z), std::runtime_error);
}

TEST_CASE("no-grad mode prunes the graph") {
    auto x = Tensor::vector({1.0, 2.0}, true);
    {
        ad::NoGradGuard ng;
        auto y = ad::sum(ad::mul(x, x));
        CHECK_FALSE(y.requires_grad());
    }
    auto y = ad::sum(ad::mul(x, x));
    CHECK(y.requires_grad());
}
