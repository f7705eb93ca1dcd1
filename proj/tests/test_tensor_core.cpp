#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "saga/gradcheck.hpp"
#include "saga/graph.hpp"

using namespace saga;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape s, Prng& rng, double lo = -1.0, double hi = 1.0) {
    return Tensor<T>::uniform(std::move(s), rng, lo, hi);
}

// Reduces an arbitrary op output to a scalar with fixed random weights so the
// gradient exercises every output element.
template <typename T>
typename Graph<T>::Id weighted_sum(Graph<T>& g, typename Graph<T>::Id id, uint64_t wseed) {
    Prng wr(wseed);
    auto w = random_tensor<T>(g.value(id).shape, wr);
    return g.sum_all(g.mul(id, g.input(std::move(w))));
}

template <typename T>
double op_tolerance() {
    return std::is_same_v<T, double> ? 1e-4 : 1e-3;
}

template <typename T>
double fd_eps() {
    // f32 rounding noise in the difference quotient shrinks with a larger step
    return std::is_same_v<T, double> ? 1e-5 : 5e-3;
}

}  // namespace

// ---- operation examples ----------------------------------------------------

TEST_CASE("matmul identity and hand case") {
    Graph<double> g;
    auto eye = g.input(Tensor<double>::from({2, 2}, {1, 0, 0, 1}));
    auto a = g.input(Tensor<double>::from({2, 2}, {1, 2, 3, 4}));
    auto out = g.matmul(eye, a);
    CHECK(g.value(out).data == std::vector<double>{1, 2, 3, 4});

    auto b = g.input(Tensor<double>::from({2, 1}, {5, 6}));
    auto out2 = g.matmul(a, b);
    CHECK(g.value(out2).data == std::vector<double>{17, 39});
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Graph<double> g;
    auto a = g.input(Tensor<double>({2, 3}));
    auto b = g.input(Tensor<double>({2, 3}));
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), shape_error);
}

TEST_CASE("softmax hand cases") {
    Graph<double> g;
    auto a = g.input(Tensor<double>::from({2}, {0, 0}));
    auto sa = g.softmax(a, 0);
    CHECK(g.value(sa).data[0] == doctest::Approx(0.5));
    CHECK(g.value(sa).data[1] == doctest::Approx(0.5));

    auto b = g.input(Tensor<double>::from({2}, {1000, 0}));
    auto sb = g.softmax(b, 0);
    CHECK(g.value(sb).data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.value(sb).data[1] == doctest::Approx(0.0).epsilon(1e-12));

    auto c = g.input(Tensor<double>::from({2}, {std::log(2.0), 0}));
    auto sc = g.softmax(c, 0);
    CHECK(g.value(sc).data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(g.value(sc).data[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(g.softmax(a, 1), shape_error);
}

TEST_CASE("softmax slices sum to 1 for extreme magnitudes") {
    Prng rng(17);
    for (int trial = 0; trial < 1000; trial++) {
        Graph<float> g;
        Shape s = {1 + rng.below(4), 1 + rng.below(6)};
        auto t = random_tensor<float>(s, rng, -1e4, 1e4);
        size_t axis = rng.below(2);
        auto sm = g.softmax(g.input(std::move(t)), axis);
        const auto& v = g.value(sm);
        size_t outer = axis == 0 ? 1 : v.shape[0];
        size_t extent = v.shape[axis];
        size_t inner = axis == 0 ? v.shape[1] : 1;
        for (size_t o = 0; o < outer; o++) {
            for (size_t i = 0; i < inner; i++) {
                float sum = 0;
                for (size_t e = 0; e < extent; e++)
                    sum += v.data[o * extent * inner + e * inner + i];
                CHECK(std::abs(sum - 1.0f) < 1e-6f);
            }
        }
    }
}

TEST_CASE("layer_norm hand cases") {
    Graph<double> g;
    auto gamma1 = g.input(Tensor<double>::from({3}, {1, 1, 1}));
    auto beta0 = g.input(Tensor<double>::from({3}, {0, 0, 0}));

    auto c = g.input(Tensor<double>::from({1, 3}, {4, 4, 4}));
    auto lc = g.layer_norm(c, gamma1, beta0, 1e-12);
    for (double v : g.value(lc).data) CHECK(v == doctest::Approx(0.0));

    auto gamma2 = g.input(Tensor<double>::from({2}, {1, 1}));
    auto beta2 = g.input(Tensor<double>::from({2}, {0, 0}));
    auto x = g.input(Tensor<double>::from({1, 2}, {1, 3}));
    auto lx = g.layer_norm(x, gamma2, beta2, 1e-12);
    CHECK(g.value(lx).data[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(g.value(lx).data[1] == doctest::Approx(1.0).epsilon(1e-6));

    auto gamma0 = g.input(Tensor<double>::from({2}, {0, 0}));
    auto beta5 = g.input(Tensor<double>::from({2}, {5, 5}));
    auto l5 = g.layer_norm(x, gamma0, beta5, 1e-12);
    for (double v : g.value(l5).data) CHECK(v == doctest::Approx(5.0));

    CHECK_THROWS_AS(g.layer_norm(x, gamma2, beta2, 0.0), config_error);
    CHECK_THROWS_AS(g.layer_norm(x, gamma2, beta2, -1.0), config_error);
}

TEST_CASE("layer_norm rows have zero mean unit variance before affine") {
    Prng rng(23);
    Graph<double> g;
    auto gamma = g.input(Tensor<double>::from({8}, {1, 1, 1, 1, 1, 1, 1, 1}));
    auto beta = g.input(Tensor<double>({8}));
    auto x = g.input(random_tensor<double>({5, 8}, rng, -3, 3));
    auto ln = g.layer_norm(x, gamma, beta, 1e-10);
    const auto& v = g.value(ln);
    for (size_t r = 0; r < 5; r++) {
        double mean = 0, var = 0;
        for (size_t i = 0; i < 8; i++) mean += v.data[r * 8 + i];
        mean /= 8;
        for (size_t i = 0; i < 8; i++) {
            double d = v.data[r * 8 + i] - mean;
            var += d * d;
        }
        var /= 8;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-5);
    }
}

TEST_CASE("gelu values") {
    Graph<double> g;
    auto x = g.input(Tensor<double>::from({3}, {0.0, 5.0, 1.0}));
    auto y = g.gelu(x);
    CHECK(g.value(y).data[0] == doctest::Approx(0.0));
    CHECK(g.value(y).data[1] == doctest::Approx(5.0).epsilon(1e-3));
    CHECK(g.value(y).data[2] == doctest::Approx(0.8412).epsilon(1e-4));
}

TEST_CASE("gelu shape: single minimum near -0.75, monotone on either side") {
    Graph<double> g;
    Tensor<double> x({1001});
    for (size_t i = 0; i < 1001; i++) x.data[i] = -5.0 + 0.01 * static_cast<double>(i);
    auto y = g.gelu(g.input(std::move(x)));
    const auto& v = g.value(y).data;
    // decreasing left of the minimum, increasing right of it
    for (size_t i = 1; i <= 420; i++) CHECK(v[i] <= v[i - 1]);   // x in [-5, -0.8]
    for (size_t i = 431; i < v.size(); i++) CHECK(v[i] >= v[i - 1]);  // x in [-0.7, 5]
    for (double vi : v) CHECK(vi >= -0.2);
}

TEST_CASE("mean_pool hand cases") {
    Graph<double> g;
    auto x = g.input(Tensor<double>::from({2, 2}, {1, 3, 5, 7}));
    auto rows = g.mean_pool(x, 0);
    CHECK(g.value(rows).data == std::vector<double>{3, 5});

    auto single = g.input(Tensor<double>::from({1, 3}, {2, 4, 6}));
    auto p = g.mean_pool(single, 0);
    CHECK(g.value(p).data == std::vector<double>{2, 4, 6});

    CHECK_THROWS_AS(g.mean_pool(x, 2), shape_error);
}

// ---- backward --------------------------------------------------------------

TEST_CASE("backward: sum gives ones, dot gives 2x, unused leaf gives zeros") {
    Tensor<double> x = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    x.requires_grad = true;
    Tensor<double> unused({4});
    unused.requires_grad = true;
    {
        Graph<double> g;
        auto xi = g.leaf(x);
        g.leaf(unused);
        g.backward(g.sum_all(xi));
        CHECK(x.grad == std::vector<double>(6, 1.0));
        CHECK(unused.grad == std::vector<double>(4, 0.0));
    }
    Tensor<double> v = Tensor<double>::from({2}, {1, 2});
    v.requires_grad = true;
    {
        Graph<double> g;
        auto vi = g.leaf(v);
        g.backward(g.sum_all(g.mul(vi, vi)));
        CHECK(v.grad[0] == doctest::Approx(2.0));
        CHECK(v.grad[1] == doctest::Approx(4.0));
    }
}

TEST_CASE("backward contract errors") {
    Tensor<double> x({2, 2});
    x.requires_grad = true;
    Graph<double> g;
    auto xi = g.leaf(x);
    CHECK_THROWS_AS(g.backward(xi), config_error);
    auto loss = g.sum_all(xi);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), state_error);
}

// ---- grad_check ------------------------------------------------------------

TEST_CASE("grad_check: sum of squares and constant") {
    Prng rng(31);
    auto sumsq = [](Graph<double>& g, Graph<double>::Id x) { return g.sum_all(g.mul(x, x)); };
    for (int i = 0; i < 5; i++) {
        auto x = random_tensor<double>({4, 3}, rng);
        CHECK(grad_check(sumsq, x, 1e-5) <= 1e-6);
    }
    auto constant = [](Graph<double>& g, Graph<double>::Id x) {
        return g.scale(g.sum_all(x), 0.0);
    };
    auto x = random_tensor<double>({5}, rng);
    CHECK(grad_check(constant, x, 1e-5) == 0.0);
}

TEST_CASE("grad_check rejects bad eps and non-scalar f") {
    Prng rng(1);
    auto x = random_tensor<double>({3}, rng);
    auto identity = [](Graph<double>& g, Graph<double>::Id id) { return id; };
    auto sum = [](Graph<double>& g, Graph<double>::Id id) { return g.sum_all(id); };
    CHECK_THROWS_AS(grad_check(sum, x, 0.0), config_error);
    CHECK_THROWS_AS(grad_check(sum, x, 0.5), config_error);
    CHECK_THROWS_AS(grad_check(identity, x, 1e-5), config_error);
}

TEST_CASE_TEMPLATE("per-op gradients match finite differences on random inputs", T, float,
                   double) {
    const double tol = op_tolerance<T>();
    const double eps = fd_eps<T>();
    Prng rng(1234);
    using G = Graph<T>;
    using Id = typename G::Id;

    auto run = [&](auto f) {
        double worst = 0;
        for (int trial = 0; trial < 20; trial++) {
            uint64_t wseed = rng.next_u64();
            auto x = random_tensor<T>({4, 6}, rng);
            auto fw = [&](G& g, Id id) { return f(g, id, wseed); };
            worst = std::max(worst, grad_check(fw, x, eps));
        }
        return worst;
    };

    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto other = g.input(random_tensor<T>({4, 6}, r));
              return weighted_sum(g, g.add(x, other), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto other = g.input(random_tensor<T>({4, 6}, r));
              return weighted_sum(g, g.sub(x, other), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto other = g.input(random_tensor<T>({4, 6}, r));
              return weighted_sum(g, g.mul(x, other), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.scale(x, T(1.7)), w); }) <=
          tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto other = g.input(random_tensor<T>({6, 3}, r));
              return weighted_sum(g, g.matmul(x, other), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.transpose(x), w); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto bias = g.input(random_tensor<T>({6}, r));
              return weighted_sum(g, g.add_row_bias(x, bias), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.reshape(x, {6, 4}), w); }) <=
          tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto gamma = g.input(random_tensor<T>({6}, r, 0.5, 1.5));
              auto beta = g.input(random_tensor<T>({6}, r));
              return weighted_sum(g, g.layer_norm(x, gamma, beta, T(1e-5)), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.gelu(x), w); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.softmax(x, 1), w); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.softmax(x, 0), w); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return weighted_sum(g, g.mean_pool(x, 1), w); }) <=
          tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return g.sum_all(x); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) { return g.mean_all(x); }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              return weighted_sum(g, g.dropout(x, 0.3, r), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              return g.cross_entropy(x, std::vector<int>{1, 0, 3, 2});
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              return weighted_sum(g, g.pairwise_sq_dists(x), w);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              // anchors 0..3 with fixed selections
              return g.triplet_hinge(g.pairwise_sq_dists(x), {1, 0, 3, -1}, {2, 3, 0, -1},
                                     T(0.2), 4);
          }) <= tol);
    CHECK(run([](G& g, Id x, uint64_t w) {
              return weighted_sum(g, g.group_attention(x, x, x, 2, 2, 2), w);
          }) <= tol);
    // attention with distinct q/k/v inputs
    CHECK(run([](G& g, Id x, uint64_t w) {
              Prng r(w);
              auto k = g.input(random_tensor<T>({4, 6}, r));
              auto v = g.input(random_tensor<T>({4, 6}, r));
              return weighted_sum(g, g.group_attention(x, k, v, 1, 4, 3), w);
          }) <= tol);
}

// ---- misc contracts ----------------------------------------------------------

TEST_CASE("non-finite op output is surfaced as numeric_error") {
    Graph<double> g;
    auto x = g.input(Tensor<double>::from({2}, {1e308, 1e308}));
    CHECK_THROWS_AS(g.add(x, x), numeric_error);
}

TEST_CASE("randomized initializer is seed-deterministic") {
    Prng a(2024), b(2024);
    auto t1 = Tensor<float>::uniform({16, 16}, a, -1, 1);
    auto t2 = Tensor<float>::uniform({16, 16}, b, -1, 1);
    CHECK(t1.data == t2.data);
}

TEST_CASE("group_attention rows are stochastic and weights retrievable") {
    Prng rng(8);
    Graph<float> g;
    auto q = g.input(random_tensor<float>({6, 8}, rng));
    auto k = g.input(random_tensor<float>({6, 8}, rng));
    auto v = g.input(random_tensor<float>({6, 8}, rng));
    auto attn = g.group_attention(q, k, v, 2, 3, 2);
    const auto& info = g.attention_weights(attn);
    CHECK(info.groups == 2);
    CHECK(info.heads == 2);
    CHECK(info.glen == 3);
    for (size_t gh = 0; gh < 4; gh++) {
        for (size_t i = 0; i < 3; i++) {
            float sum = 0;
            for (size_t j = 0; j < 3; j++) sum += (*info.weights)[gh * 9 + i * 3 + j];
            CHECK(std::abs(sum - 1.0f) < 1e-5f);
        }
    }
}
