#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saga/gradcheck.hpp"
#include "saga/losses.hpp"

using namespace saga;

namespace {

// Exhaustive O(B^2) scans, written independently of the library path.
struct OracleSelection {
    std::vector<int> positive, negative;
};

template <typename T>
OracleSelection oracle_hard(const Tensor<T>& emb, const std::vector<int>& labels) {
    const size_t n = labels.size(), d = emb.shape[1];
    auto dist = [&](size_t i, size_t j) {
        T s = T(0);
        for (size_t k = 0; k < d; k++) {
            const T diff = emb.data[i * d + k] - emb.data[j * d + k];
            s += diff * diff;
        }
        return s;
    };
    OracleSelection sel;
    sel.positive.assign(n, -1);
    sel.negative.assign(n, -1);
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < n; j++) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                if (sel.positive[i] < 0 || dist(i, j) > dist(i, sel.positive[i]))
                    sel.positive[i] = static_cast<int>(j);
            } else {
                if (sel.negative[i] < 0 || dist(i, j) < dist(i, sel.negative[i]))
                    sel.negative[i] = static_cast<int>(j);
            }
        }
    }
    return sel;
}

template <typename T>
OracleSelection oracle_semi(const Tensor<T>& emb, const std::vector<int>& labels, T alpha) {
    const size_t n = labels.size(), d = emb.shape[1];
    auto dist = [&](size_t i, size_t j) {
        T s = T(0);
        for (size_t k = 0; k < d; k++) {
            const T diff = emb.data[i * d + k] - emb.data[j * d + k];
            s += diff * diff;
        }
        return s;
    };
    OracleSelection sel;
    sel.positive.assign(n, -1);
    sel.negative.assign(n, -1);
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < n; j++) {
            if (j == i || labels[j] != labels[i]) continue;
            if (sel.positive[i] < 0 || dist(i, j) > dist(i, sel.positive[i]))
                sel.positive[i] = static_cast<int>(j);
        }
        if (sel.positive[i] < 0) continue;
        const T dap = dist(i, sel.positive[i]);
        for (size_t j = 0; j < n; j++) {
            if (labels[j] == labels[i]) continue;
            const T dnj = dist(i, j);
            if (dnj > dap && dnj < dap + alpha) {
                if (sel.negative[i] < 0 || dnj < dist(i, sel.negative[i]))
                    sel.negative[i] = static_cast<int>(j);
            }
        }
    }
    return sel;
}

Tensor<double> row(std::initializer_list<double> vals) {
    Tensor<double> t({1, vals.size()});
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
}

MiningBatch<double> make_batch(const std::vector<std::vector<double>>& points,
                               std::vector<int> labels) {
    Tensor<double> emb({points.size(), points[0].size()});
    for (size_t i = 0; i < points.size(); i++) {
        std::copy(points[i].begin(), points[i].end(), emb.data.begin() + i * points[0].size());
    }
    return MiningBatch<double>::from_embeddings(std::move(emb), std::move(labels));
}

MiningBatch<double> random_batch(Prng& rng, size_t max_b = 32, size_t max_d = 8) {
    const size_t classes = 2 + rng.below(4);
    const size_t b = std::max<size_t>(classes + 1, 2 + rng.below(max_b - 1));
    const size_t d = 1 + rng.below(max_d);
    Tensor<double> emb({b, d});
    for (auto& v : emb.data) v = rng.uniform(-2, 2);
    std::vector<int> labels(b);
    // ensure at least two classes appear
    labels[0] = 0;
    labels[1] = 1;
    for (size_t i = 2; i < b; i++) labels[i] = static_cast<int>(rng.below(classes));
    return MiningBatch<double>::from_embeddings(std::move(emb), std::move(labels));
}

}  // namespace

TEST_CASE("cross entropy hand cases and oracle") {
    auto uniform = Tensor<double>::from({2}, {0.3, 0.3});
    CHECK(cross_entropy_value(uniform, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    auto sharp = Tensor<double>::from({2}, {10, -10});
    CHECK(cross_entropy_value(sharp, 0) == doctest::Approx(2.0611536e-9).epsilon(1e-3));

    // stability: huge logits do not overflow
    auto huge = Tensor<double>::from({3}, {1000, 0, -1000});
    CHECK(std::isfinite(cross_entropy_value(huge, 1)));
    CHECK(cross_entropy_value(huge, 1) == doctest::Approx(1000.0).epsilon(1e-9));

    // direct softmax-then-log oracle on random cases
    Prng rng(5);
    for (int t = 0; t < 100; t++) {
        const size_t c = 2 + rng.below(8);
        Tensor<double> logits({c});
        for (auto& v : logits.data) v = rng.uniform(-5, 5);
        const int label = static_cast<int>(rng.below(c));
        double denom = 0;
        for (double v : logits.data) denom += std::exp(v);
        const double oracle = -std::log(std::exp(logits.data[label]) / denom);
        CHECK(cross_entropy_value(logits, label) == doctest::Approx(oracle).epsilon(1e-6));
    }
    CHECK_THROWS_AS(cross_entropy_value(uniform, 2), config_error);
}

TEST_CASE("pairwise squared distances") {
    Tensor<double> same({3, 2});
    for (auto& v : same.data) v = 1.5;
    auto d0 = pairwise_sq_dists_value(same);
    for (double v : d0.data) CHECK(v == 0.0);

    auto two = make_batch({{0, 0}, {3, 4}}, {0, 1});
    CHECK(two.dists.at({0, 1}) == doctest::Approx(25.0));
    CHECK(two.dists.at({1, 0}) == doctest::Approx(25.0));
    CHECK(two.dists.at({0, 0}) == 0.0);

    // matches the naive double loop on random batches
    Prng rng(6);
    for (int t = 0; t < 100; t++) {
        const size_t b = 2 + rng.below(10), d = 1 + rng.below(6);
        Tensor<double> emb({b, d});
        for (auto& v : emb.data) v = rng.uniform(-3, 3);
        auto dists = pairwise_sq_dists_value(emb);
        for (size_t i = 0; i < b; i++) {
            for (size_t j = 0; j < b; j++) {
                double s = 0;
                for (size_t k = 0; k < d; k++) {
                    const double diff = emb.data[i * d + k] - emb.data[j * d + k];
                    s += diff * diff;
                }
                CHECK(dists.data[i * b + j] == doctest::Approx(s).epsilon(1e-5));
                CHECK(dists.data[i * b + j] >= 0.0);
            }
        }
    }
}

TEST_CASE("mining batch invariants: symmetric, zero diagonal, recomputable") {
    Prng rng(61);
    auto batch = random_batch(rng);
    const size_t b = batch.size();
    for (size_t i = 0; i < b; i++) {
        CHECK(batch.dists.data[i * b + i] == 0.0);
        for (size_t j = 0; j < b; j++) {
            CHECK(batch.dists.data[i * b + j] == batch.dists.data[j * b + i]);
        }
    }
}

TEST_CASE("triplet loss hand cases") {
    auto a = row({0, 0}), n = row({1, 0});
    CHECK(triplet_loss<double>(a, a, n, 0.2) == 0.0);

    auto p = row({1, 0});
    CHECK(triplet_loss<double>(a, p, n, 0.2) == doctest::Approx(0.2));

    CHECK(triplet_loss<double>(a, a, a, 0.2) == doctest::Approx(0.2));  // degenerate collapse

    CHECK_THROWS_AS(triplet_loss<double>(a, p, n, 0.0), config_error);
    CHECK_THROWS_AS(triplet_loss<double>(a, p, n, -1.0), config_error);
}

TEST_CASE("semi-hard mining: margin band selection") {
    // anchor 0 with positive at squared distance 1; negatives at 0.8 / 1.2 / 2.0
    auto batch = make_batch(
        {{0.0}, {1.0}, {-std::sqrt(0.8)}, {std::sqrt(1.2)}, {-std::sqrt(2.0)}},
        {0, 0, 1, 1, 1});
    auto sel = mine_semi_hard(batch, 0.5);
    CHECK(sel.positive[0] == 1);
    CHECK(sel.negative[0] == 3);  // 0.8 hard-excluded, 2.0 easy-excluded

    // all negatives closer than the positive: NONE, batch contributes zero
    auto hard_only = make_batch({{0.0}, {2.0}, {0.5}, {-0.5}}, {0, 0, 1, 1});
    auto sel2 = mine_semi_hard(hard_only, 0.5);
    CHECK(sel2.negative[0] == -1);
    CHECK(batch_semi_hnm_loss(hard_only, 0.5) == 0.0);

    // single class: every selection NONE
    auto single = make_batch({{0.0}, {1.0}, {2.0}}, {0, 0, 0});
    auto sel3 = mine_semi_hard(single, 0.5);
    for (int p : sel3.positive) CHECK(p >= 0);
    for (int n : sel3.negative) CHECK(n == -1);
    CHECK(sel3.skipped() == 3);
}

TEST_CASE("hard mining: nearest different-class item") {
    auto batch = make_batch({{0, 0}, {3, 0}, {1, 0}}, {0, 1, 2});
    auto sel = mine_hard(batch);
    CHECK(sel.negative[0] == 2);
    CHECK(sel.positive[0] == -1);  // no same-class partner

    // tie at equal distance: lowest index wins
    auto tie = make_batch({{0.0}, {1.0}, {-1.0}, {0.1}}, {0, 1, 1, 0});
    auto sel2 = mine_hard(tie);
    CHECK(sel2.negative[0] == 1);

    auto single = make_batch({{0.0}, {1.0}}, {0, 0});
    CHECK_THROWS_AS(mine_hard(single), config_error);
}

TEST_CASE("mining matches the exhaustive oracle index-exactly") {
    Prng rng(77);
    for (int t = 0; t < 200; t++) {
        auto batch = random_batch(rng);
        auto hard = mine_hard(batch);
        auto ohard = oracle_hard(batch.embeddings, batch.labels);
        CHECK(hard.positive == ohard.positive);
        CHECK(hard.negative == ohard.negative);

        const double alpha = 0.2 + rng.uniform() * 0.6;
        auto semi = mine_semi_hard(batch, alpha);
        auto osemi = oracle_semi(batch.embeddings, batch.labels, alpha);
        CHECK(semi.positive == osemi.positive);
        CHECK(semi.negative == osemi.negative);
    }
}

TEST_CASE("batch hnm loss hand cases") {
    const double alpha = 0.3;
    // perfectly separated clusters: gap exceeds alpha + intra spread
    auto separated = make_batch({{0.0}, {0.1}, {10.0}, {10.1}}, {0, 0, 1, 1});
    CHECK(batch_hnm_loss(separated, alpha) == 0.0);

    // two classes collapsed to one point each at squared distance alpha
    const double x = std::sqrt(alpha);
    auto at_alpha = make_batch({{0.0}, {0.0}, {x}, {x}}, {0, 0, 1, 1});
    CHECK(batch_hnm_loss(at_alpha, alpha) == doctest::Approx(0.0));

    const double x2 = std::sqrt(alpha / 2);
    auto at_half = make_batch({{0.0}, {0.0}, {x2}, {x2}}, {0, 0, 1, 1});
    CHECK(batch_hnm_loss(at_half, alpha) == doctest::Approx(alpha / 2).epsilon(1e-9));
}

TEST_CASE("batch losses equal their compositional oracles") {
    Prng rng(88);
    for (int t = 0; t < 100; t++) {
        auto batch = random_batch(rng);
        const double alpha = 0.2 + rng.uniform() * 0.5;
        const size_t b = batch.size(), d = batch.embeddings.shape[1];

        auto rowv = [&](int i) {
            Tensor<double> r({d});
            std::copy(batch.embeddings.data.begin() + i * d,
                      batch.embeddings.data.begin() + (i + 1) * d, r.data.begin());
            return r;
        };

        auto hard = mine_hard(batch);
        double expect = 0;
        for (size_t i = 0; i < b; i++) {
            if (hard.positive[i] < 0 || hard.negative[i] < 0) continue;
            expect += triplet_loss<double>(rowv(static_cast<int>(i)), rowv(hard.positive[i]),
                                           rowv(hard.negative[i]), alpha);
        }
        expect /= static_cast<double>(b);
        CHECK(batch_hnm_loss(batch, alpha) == doctest::Approx(expect).epsilon(1e-6));

        auto semi = mine_semi_hard(batch, alpha);
        double expect_semi = 0;
        for (size_t i = 0; i < b; i++) {
            if (semi.positive[i] < 0 || semi.negative[i] < 0) continue;
            expect_semi += triplet_loss<double>(rowv(static_cast<int>(i)), rowv(semi.positive[i]),
                                                rowv(semi.negative[i]), alpha);
        }
        expect_semi /= static_cast<double>(b);
        CHECK(batch_semi_hnm_loss(batch, alpha) == doctest::Approx(expect_semi).epsilon(1e-6));
    }
}

TEST_CASE("overlapping clusters: semi-hard goes silent while hard keeps a signal") {
    // every negative is closer than the positive
    auto batch = make_batch({{0.0}, {3.0}, {0.2}, {2.8}, {1.4}, {1.6}}, {0, 0, 1, 1, 1, 1});
    CHECK(batch_semi_hnm_loss(batch, 0.4) == 0.0);
    CHECK(batch_hnm_loss(batch, 0.4) > 0.0);
}

TEST_CASE("hinge is zero precisely when no anchor violates its constraint") {
    Prng rng(99);
    for (int t = 0; t < 100; t++) {
        auto batch = random_batch(rng);
        const double alpha = 0.2 + rng.uniform() * 0.5;
        const size_t b = batch.size();

        auto hard = mine_hard(batch);
        bool any_violation = false;
        for (size_t i = 0; i < b; i++) {
            if (hard.positive[i] < 0 || hard.negative[i] < 0) continue;
            const double dap = batch.dists.data[i * b + hard.positive[i]];
            const double dan = batch.dists.data[i * b + hard.negative[i]];
            any_violation |= (dap + alpha > dan);
        }
        CHECK((batch_hnm_loss(batch, alpha) > 0.0) == any_violation);
    }
}

TEST_CASE("moving the hard negative farther never increases the loss") {
    // class B is a single point so its position only enters as a negative
    Prng rng(111);
    for (int t = 0; t < 20; t++) {
        std::vector<std::vector<double>> pts;
        std::vector<int> labels;
        const size_t na = 3 + rng.below(4);
        for (size_t i = 0; i < na; i++) {
            pts.push_back({-rng.uniform() * 2.0, rng.uniform(-1, 1)});
            labels.push_back(0);
        }
        double bx = 0.5 + rng.uniform();
        double prev = 1e18;
        for (int step = 0; step < 8; step++) {
            auto pts2 = pts;
            pts2.push_back({bx, 0.0});
            auto labels2 = labels;
            labels2.push_back(1);
            const double loss = batch_hnm_loss(make_batch(pts2, labels2), 0.4);
            CHECK(loss <= prev + 1e-12);
            prev = loss;
            bx += 0.3;  // strictly farther from every class-A anchor (all at x <= 0)
        }
    }
}

TEST_CASE("combined loss") {
    CHECK(combined_loss(0.6, 0.2, 1.0) == doctest::Approx(0.6));
    CHECK(combined_loss(0.6, 0.2, 0.0) == doctest::Approx(0.2));
    CHECK(combined_loss(0.6, 0.2, 0.5) == doctest::Approx(0.4));
    CHECK_THROWS_AS(combined_loss(0.6, 0.2, -0.1), config_error);
    CHECK_THROWS_AS(combined_loss(0.6, 0.2, 1.1), config_error);
}

TEST_CASE("cluster stats") {
    auto two = make_batch({{0, 0}, {0, 0}, {2, 0}, {2, 0}}, {0, 0, 1, 1});
    auto st = cluster_stats(two.embeddings, two.labels);
    CHECK(st.sigma_intra_sq == doctest::Approx(0.0));
    CHECK(st.sigma_inter_sq == doctest::Approx(4.0));

    // translation invariance
    auto shifted = make_batch({{5, 7}, {5, 7}, {7, 7}, {7, 7}}, {0, 0, 1, 1});
    auto st2 = cluster_stats(shifted.embeddings, shifted.labels);
    CHECK(st2.sigma_intra_sq == doctest::Approx(st.sigma_intra_sq));
    CHECK(st2.sigma_inter_sq == doctest::Approx(st.sigma_inter_sq));

    auto degenerate = make_batch({{0, 0}, {1, 1}}, {0, 1});
    CHECK_THROWS_AS(cluster_stats(degenerate.embeddings, degenerate.labels), config_error);
}

TEST_CASE("gradient of the single active triplet matches 2(a-p) - 2(a-n)") {
    Prng rng(123);
    for (int t = 0; t < 10; t++) {
        Tensor<double> emb({3, 4});
        for (auto& v : emb.data) v = rng.uniform(-1, 1);
        // force an active hinge: put n close to a
        for (size_t k = 0; k < 4; k++) emb.data[2 * 4 + k] = emb.data[k] + 0.01 * rng.uniform();

        auto f = [](Graph<double>& g, Graph<double>::Id x) {
            return g.triplet_hinge(g.pairwise_sq_dists(x), {1, -1, -1}, {2, -1, -1}, 0.4, 1);
        };
        CHECK(grad_check(f, emb, 1e-6) <= 1e-5);

        emb.requires_grad = true;
        Graph<double> g;
        auto id = g.leaf(emb);
        g.backward(f(g, id));
        for (size_t k = 0; k < 4; k++) {
            const double a = emb.data[k], p = emb.data[4 + k], n = emb.data[8 + k];
            CHECK(emb.grad[k] == doctest::Approx(2 * (a - p) - 2 * (a - n)).epsilon(1e-9));
        }
    }
}

TEST_CASE("metric_loss_node agrees with the value-level batch losses") {
    Prng rng(321);
    for (int t = 0; t < 20; t++) {
        auto batch = random_batch(rng);
        const double alpha = 0.3;
        Graph<double> g;
        auto phi = g.input(batch.embeddings);
        TripletSelection sel;
        auto node = metric_loss_node(g, phi, batch.labels, alpha, SelectionKind::HARD, &sel);
        CHECK(g.value(node).scalar() ==
              doctest::Approx(batch_hnm_loss(batch, alpha)).epsilon(1e-9));

        Graph<double> g2;
        auto phi2 = g2.input(batch.embeddings);
        auto node2 = metric_loss_node(g2, phi2, batch.labels, alpha, SelectionKind::SEMI_HARD);
        CHECK(g2.value(node2).scalar() ==
              doctest::Approx(batch_semi_hnm_loss(batch, alpha)).epsilon(1e-9));
    }
}
