#pragma once

#include <cmath>
#include <vector>

#include "saga/graph.hpp"

namespace saga {

enum class SelectionKind { HARD, SEMI_HARD };

// Per-anchor choices; -1 encodes NONE. Ties break to the lowest index.
struct TripletSelection {
    SelectionKind kind = SelectionKind::HARD;
    std::vector<int> positive;
    std::vector<int> negative;

    size_t skipped() const {
        size_t n = 0;
        for (size_t i = 0; i < positive.size(); i++) n += (positive[i] < 0 || negative[i] < 0);
        return n;
    }
};

// Embeddings, labels, and the cached squared-distance matrix every mining op
// works from.
template <typename T>
struct MiningBatch {
    Tensor<T> embeddings;     // [B x d]
    std::vector<int> labels;  // B
    Tensor<T> dists;          // [B x B]

    size_t size() const { return labels.size(); }

    static MiningBatch from_embeddings(Tensor<T> emb, std::vector<int> labels) {
        if (emb.rank() != 2 || emb.shape[0] != labels.size() || labels.size() < 2) {
            throw shape_error("mining batch: embeddings " + shape_str(emb.shape) + " vs " +
                              std::to_string(labels.size()) + " labels");
        }
        MiningBatch b;
        b.dists = pairwise_sq_dists_value(emb);
        b.embeddings = std::move(emb);
        b.labels = std::move(labels);
        return b;
    }
};

// Gram expansion with clamp at zero and a zero diagonal.
template <typename T>
Tensor<T> pairwise_sq_dists_value(const Tensor<T>& emb) {
    Graph<T> g;
    return g.value(g.pairwise_sq_dists(g.input(emb)));
}

// -log softmax(logits)[label], computed through log-sum-exp.
template <typename T>
T cross_entropy_value(const Tensor<T>& logits, int label) {
    if (logits.rank() != 1) throw shape_error("cross_entropy: logits must be rank 1");
    const size_t c = logits.shape[0];
    if (label < 0 || static_cast<size_t>(label) >= c) {
        throw config_error("cross_entropy: label " + std::to_string(label) + " out of range [0," +
                           std::to_string(c) + ")");
    }
    T mx = logits.data[0];
    for (T v : logits.data) mx = std::max(mx, v);
    T sum = T(0);
    for (T v : logits.data) sum += std::exp(v - mx);
    return std::log(sum) + mx - logits.data[label];
}

// max(0, ||a-p||^2 - ||a-n||^2 + alpha)
template <typename T>
T triplet_loss(const Tensor<T>& a, const Tensor<T>& p, const Tensor<T>& n, T alpha) {
    if (!(alpha > T(0))) throw config_error("triplet_loss: alpha must be > 0");
    if (a.shape != p.shape || a.shape != n.shape) {
        throw shape_error("triplet_loss: mismatched shapes");
    }
    T dap = T(0), dan = T(0);
    for (size_t i = 0; i < a.data.size(); i++) {
        const T dp = a.data[i] - p.data[i];
        const T dn = a.data[i] - n.data[i];
        dap += dp * dp;
        dan += dn * dn;
    }
    return std::max(T(0), dap - dan + alpha);
}

namespace detail {

// Hardest positive: same-class item at maximum squared distance.
template <typename T>
int hardest_positive(const MiningBatch<T>& b, size_t i) {
    const size_t n = b.size();
    int best = -1;
    T best_d = T(-1);
    for (size_t j = 0; j < n; j++) {
        if (j == i || b.labels[j] != b.labels[i]) continue;
        const T d = b.dists.data[i * n + j];
        if (d > best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace detail

// Negative chosen inside the margin band (d_ap, d_ap + alpha); NONE when the
// band is empty or the anchor has no positive.
template <typename T>
TripletSelection mine_semi_hard(const MiningBatch<T>& batch, T alpha) {
    if (!(alpha > T(0))) throw config_error("mine_semi_hard: alpha must be > 0");
    const size_t n = batch.size();
    TripletSelection sel;
    sel.kind = SelectionKind::SEMI_HARD;
    sel.positive.assign(n, -1);
    sel.negative.assign(n, -1);
    for (size_t i = 0; i < n; i++) {
        const int p = detail::hardest_positive(batch, i);
        if (p < 0) continue;
        sel.positive[i] = p;
        const T dap = batch.dists.data[i * n + p];
        int best = -1;
        T best_d = T(0);
        for (size_t j = 0; j < n; j++) {
            if (batch.labels[j] == batch.labels[i]) continue;
            const T d = batch.dists.data[i * n + j];
            if (d > dap && d < dap + alpha && (best < 0 || d < best_d)) {
                best = static_cast<int>(j);
                best_d = d;
            }
        }
        sel.negative[i] = best;
    }
    return sel;
}

// Globally nearest different-class item, regardless of the positive distance.
template <typename T>
TripletSelection mine_hard(const MiningBatch<T>& batch) {
    const size_t n = batch.size();
    bool multi_class = false;
    for (size_t i = 1; i < n; i++) multi_class |= (batch.labels[i] != batch.labels[0]);
    if (!multi_class) throw config_error("mine_hard: batch contains a single class");

    TripletSelection sel;
    sel.kind = SelectionKind::HARD;
    sel.positive.assign(n, -1);
    sel.negative.assign(n, -1);
    for (size_t i = 0; i < n; i++) {
        sel.positive[i] = detail::hardest_positive(batch, i);
        int best = -1;
        T best_d = T(0);
        for (size_t j = 0; j < n; j++) {
            if (batch.labels[j] == batch.labels[i]) continue;
            const T d = batch.dists.data[i * n + j];
            if (best < 0 || d < best_d) {
                best = static_cast<int>(j);
                best_d = d;
            }
        }
        sel.negative[i] = best;
    }
    return sel;
}

namespace detail {

template <typename T>
T hinge_mean(const MiningBatch<T>& batch, const TripletSelection& sel, T alpha,
             bool valid_anchor_mean) {
    const size_t n = batch.size();
    T total = T(0);
    size_t valid = 0;
    for (size_t i = 0; i < n; i++) {
        if (sel.positive[i] < 0 || sel.negative[i] < 0) continue;
        valid++;
        const T dap = batch.dists.data[i * n + sel.positive[i]];
        const T dan = batch.dists.data[i * n + sel.negative[i]];
        total += std::max(T(0), dap - dan + alpha);
    }
    const size_t denom = valid_anchor_mean ? valid : n;
    return denom == 0 ? T(0) : total / T(denom);
}

}  // namespace detail

// Mean over anchors of the hinge at the hard selection.
template <typename T>
T batch_hnm_loss(const MiningBatch<T>& batch, T alpha, bool valid_anchor_mean = false) {
    if (!(alpha > T(0))) throw config_error("batch_hnm_loss: alpha must be > 0");
    return detail::hinge_mean(batch, mine_hard(batch), alpha, valid_anchor_mean);
}

// As above with the semi-hard selection; NONE anchors contribute zero but stay
// in the denominator unless valid_anchor_mean is set.
template <typename T>
T batch_semi_hnm_loss(const MiningBatch<T>& batch, T alpha, bool valid_anchor_mean = false) {
    if (!(alpha > T(0))) throw config_error("batch_semi_hnm_loss: alpha must be > 0");
    return detail::hinge_mean(batch, mine_semi_hard(batch, alpha), alpha, valid_anchor_mean);
}

// lambda * ce + (1 - lambda) * hnm
template <typename T>
T combined_loss(T ce, T hnm, T lambda) {
    if (!(lambda >= T(0) && lambda <= T(1))) {
        throw config_error("combined_loss: lambda must be in [0,1]");
    }
    return lambda * ce + (T(1) - lambda) * hnm;
}

struct ClusterStatsResult {
    double sigma_intra_sq = 0.0;
    double sigma_inter_sq = 0.0;
    std::vector<std::vector<double>> centroids;  // per class
};

// intra: mean squared distance to own centroid; inter: mean squared pairwise
// centroid distance.
template <typename T>
ClusterStatsResult cluster_stats(const Tensor<T>& emb, const std::vector<int>& labels) {
    if (emb.rank() != 2 || emb.shape[0] != labels.size()) {
        throw shape_error("cluster_stats: embeddings " + shape_str(emb.shape) + " vs " +
                          std::to_string(labels.size()) + " labels");
    }
    const size_t n = labels.size(), d = emb.shape[1];
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    const size_t n_classes = static_cast<size_t>(max_label + 1);
    std::vector<size_t> counts(n_classes, 0);
    for (int l : labels) {
        if (l < 0) throw config_error("cluster_stats: negative label");
        counts[l]++;
    }
    size_t present = 0;
    for (size_t c = 0; c < n_classes; c++) {
        if (counts[c] == 0) continue;
        present++;
        if (counts[c] < 2) {
            throw config_error("cluster_stats: class " + std::to_string(c) +
                               " has fewer than 2 items");
        }
    }
    if (present < 2) throw config_error("cluster_stats: need at least 2 classes");

    ClusterStatsResult r;
    r.centroids.assign(n_classes, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < d; j++) {
            r.centroids[labels[i]][j] += static_cast<double>(emb.data[i * d + j]);
        }
    }
    for (size_t c = 0; c < n_classes; c++) {
        if (counts[c] == 0) continue;
        for (auto& v : r.centroids[c]) v /= static_cast<double>(counts[c]);
    }
    double intra = 0.0;
    for (size_t i = 0; i < n; i++) {
        double sq = 0.0;
        for (size_t j = 0; j < d; j++) {
            const double diff = static_cast<double>(emb.data[i * d + j]) -
                                r.centroids[labels[i]][j];
            sq += diff * diff;
        }
        intra += sq;
    }
    r.sigma_intra_sq = intra / static_cast<double>(n);

    double inter = 0.0;
    size_t pairs = 0;
    for (size_t a = 0; a < n_classes; a++) {
        if (counts[a] == 0) continue;
        for (size_t b = a + 1; b < n_classes; b++) {
            if (counts[b] == 0) continue;
            double sq = 0.0;
            for (size_t j = 0; j < d; j++) {
                const double diff = r.centroids[a][j] - r.centroids[b][j];
                sq += diff * diff;
            }
            inter += sq;
            pairs++;
        }
    }
    r.sigma_inter_sq = inter / static_cast<double>(pairs);
    return r;
}

// Graph builder: mines on the detached distance values, then applies the
// hinge through the differentiable distance matrix. Selection indices are
// constants within the step.
template <typename T>
typename Graph<T>::Id metric_loss_node(Graph<T>& g, typename Graph<T>::Id phi,
                                       const std::vector<int>& labels, T alpha,
                                       SelectionKind kind, TripletSelection* out_sel = nullptr,
                                       bool valid_anchor_mean = false) {
    auto dists = g.pairwise_sq_dists(phi);
    MiningBatch<T> batch;
    batch.dists = g.value(dists);
    batch.labels = labels;
    TripletSelection sel = (kind == SelectionKind::HARD) ? mine_hard(batch)
                                                         : mine_semi_hard(batch, alpha);
    if (out_sel) *out_sel = sel;
    size_t denom = labels.size();
    if (valid_anchor_mean) {
        denom = labels.size() - sel.skipped();
        if (denom == 0) denom = 1;
    }
    return g.triplet_hinge(dists, sel.positive, sel.negative, alpha, denom);
}

}  // namespace saga
