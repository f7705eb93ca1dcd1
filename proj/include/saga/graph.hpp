#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "saga/kernels.hpp"
#include "saga/prng.hpp"
#include "saga/tensor.hpp"

namespace saga {

// Reverse-mode tape. Ops evaluate eagerly and append a node whose backward
// closure scatters into the input nodes' gradients, so creation order is a
// topological order and one reverse sweep suffices. A graph is confined to
// one training step on one thread; backward runs at most once per forward.
template <typename T>
class Graph {
   public:
    using Id = int32_t;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // --- node creation -----------------------------------------------------

    // Binds an external tensor; gradient lands in t.grad if requires_grad.
    Id leaf(Tensor<T>& t) {
        Id id = push(Tensor<T>(t.shape), t.requires_grad, nullptr);
        nodes_[id].val.data = t.data;
        nodes_[id].bound = &t;
        return id;
    }

    Id input(Tensor<T> t) { return push(std::move(t), false, nullptr); }

    // --- elementwise and linear ops ----------------------------------------

    Id add(Id a, Id b) {
        check_same_shape(a, b, "add");
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        const auto& y = val(b).data;
        for (size_t i = 0; i < out.data.size(); i++) out.data[i] = x[i] + y[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Id self) {
            const auto& g = nodes_[self].grad;
            if (needs(a)) acc(a, g);
            if (needs(b)) acc(b, g);
        });
    }

    Id sub(Id a, Id b) {
        check_same_shape(a, b, "sub");
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        const auto& y = val(b).data;
        for (size_t i = 0; i < out.data.size(); i++) out.data[i] = x[i] - y[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Id self) {
            const auto& g = nodes_[self].grad;
            if (needs(a)) acc(a, g);
            if (needs(b)) {
                auto& gb = nodes_[b].grad;
                for (size_t i = 0; i < g.size(); i++) gb[i] -= g[i];
            }
        });
    }

    Id mul(Id a, Id b) {
        check_same_shape(a, b, "mul");
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        const auto& y = val(b).data;
        for (size_t i = 0; i < out.data.size(); i++) out.data[i] = x[i] * y[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](Id self) {
            const auto& g = nodes_[self].grad;
            if (needs(a)) {
                auto& ga = nodes_[a].grad;
                const auto& y = val(b).data;
                for (size_t i = 0; i < g.size(); i++) ga[i] += g[i] * y[i];
            }
            if (needs(b)) {
                auto& gb = nodes_[b].grad;
                const auto& x = val(a).data;
                for (size_t i = 0; i < g.size(); i++) gb[i] += g[i] * x[i];
            }
        });
    }

    Id scale(Id a, T c) {
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        for (size_t i = 0; i < out.data.size(); i++) out.data[i] = c * x[i];
        return push(std::move(out), needs(a), [this, a, c](Id self) {
            const auto& g = nodes_[self].grad;
            auto& ga = nodes_[a].grad;
            for (size_t i = 0; i < g.size(); i++) ga[i] += c * g[i];
        });
    }

    Id matmul(Id a, Id b) {
        const auto& va = val(a);
        const auto& vb = val(b);
        if (va.rank() != 2 || vb.rank() != 2 || va.shape[1] != vb.shape[0]) {
            throw shape_error("matmul: incompatible shapes " + shape_str(va.shape) + " x " +
                              shape_str(vb.shape));
        }
        const size_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
        Tensor<T> out({m, n});
        kernels::matmul(va.data.data(), vb.data.data(), out.data.data(), m, k, n);
        return push(std::move(out), needs(a) || needs(b), [this, a, b, m, k, n](Id self) {
            const T* g = nodes_[self].grad.data();
            if (needs(a)) {
                // dA += G * B^T
                kernels::matmul_nt_acc(g, val(b).data.data(), nodes_[a].grad.data(), m, n, k);
            }
            if (needs(b)) {
                // dB += A^T * G
                kernels::matmul_tn_acc(val(a).data.data(), g, nodes_[b].grad.data(), m, k, n);
            }
        });
    }

    Id transpose(Id a) {
        const auto& va = val(a);
        if (va.rank() != 2) throw shape_error("transpose: rank-2 required, got " + shape_str(va.shape));
        const size_t m = va.shape[0], n = va.shape[1];
        Tensor<T> out({n, m});
        for (size_t i = 0; i < m; i++)
            for (size_t j = 0; j < n; j++) out.data[j * m + i] = va.data[i * n + j];
        return push(std::move(out), needs(a), [this, a, m, n](Id self) {
            const auto& g = nodes_[self].grad;
            auto& ga = nodes_[a].grad;
            for (size_t i = 0; i < m; i++)
                for (size_t j = 0; j < n; j++) ga[i * n + j] += g[j * m + i];
        });
    }

    // y[r, c] = a[r, c] + bias[c]
    Id add_row_bias(Id a, Id bias) {
        const auto& va = val(a);
        const auto& vb = val(bias);
        if (va.rank() != 2 || vb.rank() != 1 || vb.shape[0] != va.shape[1]) {
            throw shape_error("add_row_bias: " + shape_str(va.shape) + " + " + shape_str(vb.shape));
        }
        const size_t rows = va.shape[0], cols = va.shape[1];
        Tensor<T> out(va.shape);
        for (size_t r = 0; r < rows; r++)
            for (size_t c = 0; c < cols; c++)
                out.data[r * cols + c] = va.data[r * cols + c] + vb.data[c];
        return push(std::move(out), needs(a) || needs(bias), [this, a, bias, rows, cols](Id self) {
            const auto& g = nodes_[self].grad;
            if (needs(a)) acc(a, g);
            if (needs(bias)) {
                auto& gb = nodes_[bias].grad;
                for (size_t r = 0; r < rows; r++)
                    for (size_t c = 0; c < cols; c++) gb[c] += g[r * cols + c];
            }
        });
    }

    Id reshape(Id a, Shape s) {
        if (shape_numel(s) != val(a).numel()) {
            throw shape_error("reshape: " + shape_str(val(a).shape) + " -> " + shape_str(s));
        }
        Tensor<T> out(std::move(s));
        out.data = val(a).data;
        return push(std::move(out), needs(a), [this, a](Id self) { acc(a, nodes_[self].grad); });
    }

    // --- normalization and activations --------------------------------------

    // Normalizes the last axis of x; gamma/beta have that extent.
    Id layer_norm(Id x, Id gamma, Id beta, T eps) {
        if (!(eps > T(0))) throw config_error("layer_norm: eps must be > 0");
        const auto& vx = val(x);
        const size_t d = vx.shape.back();
        if (val(gamma).numel() != d || val(beta).numel() != d) {
            throw shape_error("layer_norm: gamma/beta " + shape_str(val(gamma).shape) +
                              " do not match last extent of " + shape_str(vx.shape));
        }
        const size_t rows = vx.numel() / d;
        Tensor<T> out(vx.shape);
        auto xhat = std::make_shared<std::vector<T>>(vx.numel());
        auto rstd = std::make_shared<std::vector<T>>(rows);
        const T* in = vx.data.data();
        const T* gm = val(gamma).data.data();
        const T* bt = val(beta).data.data();
        for (size_t r = 0; r < rows; r++) {
            const T* row = in + r * d;
            T mean = T(0);
            for (size_t i = 0; i < d; i++) mean += row[i];
            mean /= T(d);
            T var = T(0);
            for (size_t i = 0; i < d; i++) {
                T diff = row[i] - mean;
                var += diff * diff;
            }
            var /= T(d);
            const T rs = T(1) / std::sqrt(var + eps);
            (*rstd)[r] = rs;
            for (size_t i = 0; i < d; i++) {
                T xh = (row[i] - mean) * rs;
                (*xhat)[r * d + i] = xh;
                out.data[r * d + i] = gm[i] * xh + bt[i];
            }
        }
        return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
                    [this, x, gamma, beta, rows, d, xhat, rstd](Id self) {
            const auto& g = nodes_[self].grad;
            const T* gm = val(gamma).data.data();
            if (needs(gamma) || needs(beta)) {
                for (size_t r = 0; r < rows; r++) {
                    for (size_t i = 0; i < d; i++) {
                        const T gi = g[r * d + i];
                        if (needs(gamma)) nodes_[gamma].grad[i] += gi * (*xhat)[r * d + i];
                        if (needs(beta)) nodes_[beta].grad[i] += gi;
                    }
                }
            }
            if (needs(x)) {
                auto& gx = nodes_[x].grad;
                for (size_t r = 0; r < rows; r++) {
                    T mean_gy = T(0), mean_gyxh = T(0);
                    for (size_t i = 0; i < d; i++) {
                        const T gy = g[r * d + i] * gm[i];
                        mean_gy += gy;
                        mean_gyxh += gy * (*xhat)[r * d + i];
                    }
                    mean_gy /= T(d);
                    mean_gyxh /= T(d);
                    const T rs = (*rstd)[r];
                    for (size_t i = 0; i < d; i++) {
                        const T gy = g[r * d + i] * gm[i];
                        gx[r * d + i] += rs * (gy - mean_gy - (*xhat)[r * d + i] * mean_gyxh);
                    }
                }
            }
        });
    }

    // tanh-approximation GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
    Id gelu(Id a) {
        const T s = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
        const T c3 = static_cast<T>(0.044715);
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        kernels::map(x.data(), out.data.data(), x.size(), [s, c3](T v) {
            return T(0.5) * v * (T(1) + std::tanh(s * (v + c3 * v * v * v)));
        });
        return push(std::move(out), needs(a), [this, a, s, c3](Id self) {
            const auto& g = nodes_[self].grad;
            auto& ga = nodes_[a].grad;
            const auto& x = val(a).data;
#pragma omp parallel for schedule(static) if (g.size() > 16384)
            for (size_t i = 0; i < g.size(); i++) {
                const T v = x[i];
                const T t = std::tanh(s * (v + c3 * v * v * v));
                const T local = T(0.5) * (T(1) + t) +
                                T(0.5) * v * (T(1) - t * t) * s * (T(1) + T(3) * c3 * v * v);
                ga[i] += local * g[i];
            }
        });
    }

    // Max-subtracted softmax along `axis`; slices sum to 1.
    Id softmax(Id a, size_t axis) {
        const auto& va = val(a);
        if (axis >= va.rank()) {
            throw shape_error("softmax: axis " + std::to_string(axis) + " out of range for " +
                              shape_str(va.shape));
        }
        auto [outer, extent, inner] = axis_split(va.shape, axis);
        Tensor<T> out(va.shape);
        const T* in = va.data.data();
        for (size_t o = 0; o < outer; o++) {
            for (size_t i = 0; i < inner; i++) {
                const size_t base = o * extent * inner + i;
                T mx = in[base];
                for (size_t e = 1; e < extent; e++) mx = std::max(mx, in[base + e * inner]);
                T sum = T(0);
                for (size_t e = 0; e < extent; e++) {
                    T v = std::exp(in[base + e * inner] - mx);
                    out.data[base + e * inner] = v;
                    sum += v;
                }
                const T inv = T(1) / sum;
                for (size_t e = 0; e < extent; e++) out.data[base + e * inner] *= inv;
            }
        }
        return push(std::move(out), needs(a), [this, a, outer, extent, inner](Id self) {
            const auto& g = nodes_[self].grad;
            const auto& y = nodes_[self].val.data;
            auto& ga = nodes_[a].grad;
            for (size_t o = 0; o < outer; o++) {
                for (size_t i = 0; i < inner; i++) {
                    const size_t base = o * extent * inner + i;
                    T dot = T(0);
                    for (size_t e = 0; e < extent; e++)
                        dot += g[base + e * inner] * y[base + e * inner];
                    for (size_t e = 0; e < extent; e++) {
                        const size_t idx = base + e * inner;
                        ga[idx] += y[idx] * (g[idx] - dot);
                    }
                }
            }
        });
    }

    // Arithmetic mean along `axis`; rank drops by one.
    Id mean_pool(Id a, size_t axis) {
        const auto& va = val(a);
        if (axis >= va.rank()) {
            throw shape_error("mean_pool: axis " + std::to_string(axis) + " out of range for " +
                              shape_str(va.shape));
        }
        if (va.shape[axis] == 0) throw config_error("mean_pool: empty reduction axis");
        auto [outer, extent, inner] = axis_split(va.shape, axis);
        Shape os;
        for (size_t i = 0; i < va.rank(); i++)
            if (i != axis) os.push_back(va.shape[i]);
        if (os.empty()) os.push_back(1);
        Tensor<T> out(os);
        const T* in = va.data.data();
        const T invE = T(1) / T(extent);
        for (size_t o = 0; o < outer; o++) {
            for (size_t i = 0; i < inner; i++) {
                T sum = T(0);
                for (size_t e = 0; e < extent; e++) sum += in[o * extent * inner + e * inner + i];
                out.data[o * inner + i] = sum * invE;
            }
        }
        return push(std::move(out), needs(a), [this, a, outer, extent, inner, invE](Id self) {
            const auto& g = nodes_[self].grad;
            auto& ga = nodes_[a].grad;
            for (size_t o = 0; o < outer; o++)
                for (size_t e = 0; e < extent; e++)
                    for (size_t i = 0; i < inner; i++)
                        ga[o * extent * inner + e * inner + i] += g[o * inner + i] * invE;
        });
    }

    Id sum_all(Id a) {
        T sum = T(0);
        for (T v : val(a).data) sum += v;
        Tensor<T> out({1});
        out.data[0] = sum;
        return push(std::move(out), needs(a), [this, a](Id self) {
            const T g = nodes_[self].grad[0];
            auto& ga = nodes_[a].grad;
            for (auto& v : ga) v += g;
        });
    }

    Id mean_all(Id a) {
        const size_t n = val(a).numel();
        if (n == 0) throw config_error("mean_all: empty tensor");
        return scale(sum_all(a), T(1) / T(n));
    }

    // Inverted dropout; identity when rate == 0.
    Id dropout(Id a, double rate, Prng& rng) {
        if (rate < 0.0 || rate >= 1.0) throw config_error("dropout: rate must be in [0,1)");
        auto mask = std::make_shared<std::vector<T>>(val(a).numel());
        const T keep = static_cast<T>(1.0 / (1.0 - rate));
        for (auto& m : *mask) m = (rng.uniform() >= rate) ? keep : T(0);
        Tensor<T> out(val(a).shape);
        const auto& x = val(a).data;
        for (size_t i = 0; i < x.size(); i++) out.data[i] = x[i] * (*mask)[i];
        return push(std::move(out), needs(a), [this, a, mask](Id self) {
            const auto& g = nodes_[self].grad;
            auto& ga = nodes_[a].grad;
            for (size_t i = 0; i < g.size(); i++) ga[i] += g[i] * (*mask)[i];
        });
    }

    // --- losses --------------------------------------------------------------

    // Mean over rows of -log softmax(logits)[label]; logits [B x C] or [C].
    Id cross_entropy(Id logits, const std::vector<int>& labels) {
        const auto& vl = val(logits);
        const size_t c = vl.shape.back();
        const size_t rows = vl.numel() / c;
        if (labels.size() != rows) {
            throw config_error("cross_entropy: " + std::to_string(labels.size()) +
                               " labels for " + std::to_string(rows) + " rows");
        }
        for (int l : labels) {
            if (l < 0 || static_cast<size_t>(l) >= c) {
                throw config_error("cross_entropy: label " + std::to_string(l) +
                                   " out of range [0," + std::to_string(c) + ")");
            }
        }
        auto probs = std::make_shared<std::vector<T>>(vl.numel());
        const T* in = vl.data.data();
        T total = T(0);
        for (size_t r = 0; r < rows; r++) {
            const T* row = in + r * c;
            T mx = row[0];
            for (size_t i = 1; i < c; i++) mx = std::max(mx, row[i]);
            T sum = T(0);
            for (size_t i = 0; i < c; i++) {
                T e = std::exp(row[i] - mx);
                (*probs)[r * c + i] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (size_t i = 0; i < c; i++) (*probs)[r * c + i] *= inv;
            // -log p[label] via log-sum-exp for stability
            total += std::log(sum) + mx - row[labels[r]];
        }
        Tensor<T> out({1});
        out.data[0] = total / T(rows);
        auto lab = std::make_shared<std::vector<int>>(labels);
        return push(std::move(out), needs(logits), [this, logits, probs, lab, rows, c](Id self) {
            const T g = nodes_[self].grad[0] / T(rows);
            auto& gl = nodes_[logits].grad;
            for (size_t r = 0; r < rows; r++) {
                for (size_t i = 0; i < c; i++) gl[r * c + i] += g * (*probs)[r * c + i];
                gl[r * c + (*lab)[r]] -= g;
            }
        });
    }

    // Squared-distance matrix via Gram expansion, clamped at zero, zero diagonal.
    Id pairwise_sq_dists(Id e) {
        const auto& ve = val(e);
        if (ve.rank() != 2 || ve.shape[0] < 2) {
            throw shape_error("pairwise_sq_dists: need [B x d] with B >= 2, got " +
                              shape_str(ve.shape));
        }
        const size_t b = ve.shape[0], d = ve.shape[1];
        Tensor<T> out({b, b});
        const T* x = ve.data.data();
        std::vector<T> sq(b);
        for (size_t i = 0; i < b; i++) {
            T s = T(0);
            for (size_t j = 0; j < d; j++) s += x[i * d + j] * x[i * d + j];
            sq[i] = s;
        }
        for (size_t i = 0; i < b; i++) {
            for (size_t j = 0; j < b; j++) {
                if (i == j) {
                    out.data[i * b + j] = T(0);
                    continue;
                }
                T dot = T(0);
                for (size_t l = 0; l < d; l++) dot += x[i * d + l] * x[j * d + l];
                out.data[i * b + j] = std::max(T(0), sq[i] + sq[j] - T(2) * dot);
            }
        }
        return push(std::move(out), needs(e), [this, e, b, d](Id self) {
            const auto& g = nodes_[self].grad;
            const T* x = val(e).data.data();
            auto& ge = nodes_[e].grad;
            for (size_t i = 0; i < b; i++) {
                for (size_t j = 0; j < b; j++) {
                    if (i == j) continue;
                    const T w = T(2) * (g[i * b + j] + g[j * b + i]);
                    if (w == T(0)) continue;
                    for (size_t l = 0; l < d; l++)
                        ge[i * d + l] += w * (x[i * d + l] - x[j * d + l]);
                }
            }
        });
    }

    // (1/denom) sum over anchors with both indices of max(0, D[i,p] - D[i,n] + alpha).
    // Selection indices are constants within the step; gradient flows only
    // through the selected distances.
    Id triplet_hinge(Id dists, const std::vector<int>& pos, const std::vector<int>& neg, T alpha,
                     size_t denom) {
        const auto& vd = val(dists);
        if (vd.rank() != 2 || vd.shape[0] != vd.shape[1]) {
            throw shape_error("triplet_hinge: need square distance matrix, got " +
                              shape_str(vd.shape));
        }
        if (!(alpha > T(0))) throw config_error("triplet_hinge: alpha must be > 0");
        if (denom == 0) throw config_error("triplet_hinge: denom must be > 0");
        const size_t b = vd.shape[0];
        auto active = std::make_shared<std::vector<std::pair<int, int>>>();
        T total = T(0);
        for (size_t i = 0; i < b; i++) {
            if (pos[i] < 0 || neg[i] < 0) continue;
            const T h = vd.data[i * b + pos[i]] - vd.data[i * b + neg[i]] + alpha;
            if (h > T(0)) {
                total += h;
                active->push_back({static_cast<int>(i * b + pos[i]), static_cast<int>(i * b + neg[i])});
            }
        }
        Tensor<T> out({1});
        out.data[0] = total / T(denom);
        return push(std::move(out), needs(dists), [this, dists, active, denom](Id self) {
            const T g = nodes_[self].grad[0] / T(denom);
            auto& gd = nodes_[dists].grad;
            for (auto [p, n] : *active) {
                gd[p] += g;
                gd[n] -= g;
            }
        });
    }

    // --- attention -----------------------------------------------------------

    // Scaled dot-product attention applied independently to `groups`
    // consecutive row blocks of length glen, with column-split heads.
    // q,k,v: [groups*glen x d]. Softmaxed weights are kept for backward and
    // can be captured afterwards via attention_weights().
    Id group_attention(Id q, Id k, Id v, size_t groups, size_t glen, size_t heads) {
        const auto& vq = val(q);
        if (vq.rank() != 2 || vq.shape[0] != groups * glen) {
            throw shape_error("group_attention: q shape " + shape_str(vq.shape) +
                              " does not match groups*glen");
        }
        check_same_shape(q, k, "group_attention");
        check_same_shape(q, v, "group_attention");
        const size_t d = vq.shape[1];
        if (d % heads != 0) throw config_error("group_attention: d not divisible by heads");
        const size_t dh = d / heads;
        const T att_scale = T(1) / std::sqrt(T(dh));
        auto weights = std::make_shared<std::vector<T>>(groups * heads * glen * glen);
        Tensor<T> out({groups * glen, d});
        const T* qd = vq.data.data();
        const T* kd = val(k).data.data();
        const T* vd = val(v).data.data();
#pragma omp parallel for schedule(static) if (groups * heads > 1)
        for (size_t gh = 0; gh < groups * heads; gh++) {
            const size_t grp = gh / heads, h = gh % heads;
            const size_t row0 = grp * glen, col0 = h * dh;
            T* a = weights->data() + gh * glen * glen;
            // scores + row softmax
            for (size_t i = 0; i < glen; i++) {
                const T* qi = qd + (row0 + i) * d + col0;
                T* ai = a + i * glen;
                for (size_t j = 0; j < glen; j++) {
                    const T* kj = kd + (row0 + j) * d + col0;
                    T s = T(0);
                    for (size_t l = 0; l < dh; l++) s += qi[l] * kj[l];
                    ai[j] = s * att_scale;
                }
                T mx = ai[0];
                for (size_t j = 1; j < glen; j++) mx = std::max(mx, ai[j]);
                T sum = T(0);
                for (size_t j = 0; j < glen; j++) {
                    ai[j] = std::exp(ai[j] - mx);
                    sum += ai[j];
                }
                const T inv = T(1) / sum;
                for (size_t j = 0; j < glen; j++) ai[j] *= inv;
            }
            // out = A * V
            for (size_t i = 0; i < glen; i++) {
                T* oi = out.data.data() + (row0 + i) * d + col0;
                for (size_t l = 0; l < dh; l++) oi[l] = T(0);
                const T* ai = a + i * glen;
                for (size_t j = 0; j < glen; j++) {
                    const T* vj = vd + (row0 + j) * d + col0;
                    const T aij = ai[j];
                    for (size_t l = 0; l < dh; l++) oi[l] += aij * vj[l];
                }
            }
        }
        Id id = push(std::move(out), needs(q) || needs(k) || needs(v),
                     [this, q, k, v, groups, glen, heads, dh, d, att_scale, weights](Id self) {
            const T* g = nodes_[self].grad.data();
            const T* qd = val(q).data.data();
            const T* kd = val(k).data.data();
            const T* vd = val(v).data.data();
            T* gq = needs(q) ? nodes_[q].grad.data() : nullptr;
            T* gk = needs(k) ? nodes_[k].grad.data() : nullptr;
            T* gv = needs(v) ? nodes_[v].grad.data() : nullptr;
            // (group, head) blocks touch disjoint gradient slices.
#pragma omp parallel for schedule(static) if (groups * heads > 1)
            for (size_t gh = 0; gh < groups * heads; gh++) {
                const size_t grp = gh / heads, h = gh % heads;
                const size_t row0 = grp * glen, col0 = h * dh;
                const T* a = weights->data() + gh * glen * glen;
                std::vector<T> ds(glen * glen);
                for (size_t i = 0; i < glen; i++) {
                    const T* gi = g + (row0 + i) * d + col0;
                    // dA then dS = A (dA - sum(dA .* A)) for this row
                    T dot = T(0);
                    for (size_t j = 0; j < glen; j++) {
                        const T* vj = vd + (row0 + j) * d + col0;
                        T da = T(0);
                        for (size_t l = 0; l < dh; l++) da += gi[l] * vj[l];
                        ds[i * glen + j] = da;
                        dot += da * a[i * glen + j];
                    }
                    for (size_t j = 0; j < glen; j++)
                        ds[i * glen + j] = a[i * glen + j] * (ds[i * glen + j] - dot) * att_scale;
                }
                if (gv) {
                    for (size_t j = 0; j < glen; j++) {
                        T* gvj = gv + (row0 + j) * d + col0;
                        for (size_t i = 0; i < glen; i++) {
                            const T aij = a[i * glen + j];
                            const T* gi = g + (row0 + i) * d + col0;
                            for (size_t l = 0; l < dh; l++) gvj[l] += aij * gi[l];
                        }
                    }
                }
                if (gq) {
                    for (size_t i = 0; i < glen; i++) {
                        T* gqi = gq + (row0 + i) * d + col0;
                        for (size_t j = 0; j < glen; j++) {
                            const T s = ds[i * glen + j];
                            const T* kj = kd + (row0 + j) * d + col0;
                            for (size_t l = 0; l < dh; l++) gqi[l] += s * kj[l];
                        }
                    }
                }
                if (gk) {
                    for (size_t j = 0; j < glen; j++) {
                        T* gkj = gk + (row0 + j) * d + col0;
                        for (size_t i = 0; i < glen; i++) {
                            const T s = ds[i * glen + j];
                            const T* qi = qd + (row0 + i) * d + col0;
                            for (size_t l = 0; l < dh; l++) gkj[l] += s * qi[l];
                        }
                    }
                }
            }
        });
        attn_[id] = AttnInfo{weights, groups, heads, glen};
        return id;
    }

    struct AttnInfo {
        std::shared_ptr<std::vector<T>> weights;  // [groups x heads x glen x glen]
        size_t groups, heads, glen;
    };

    const AttnInfo& attention_weights(Id id) const {
        auto it = attn_.find(id);
        if (it == attn_.end()) throw state_error("attention_weights: not an attention node");
        return it->second;
    }

    // --- evaluation/backward --------------------------------------------------

    const Tensor<T>& value(Id id) const { return nodes_[id].val; }

    const std::vector<T>& grad(Id id) const {
        if (!backward_done_) throw state_error("grad: backward has not run");
        return nodes_[id].grad;
    }

    // Seeds d(loss)=1 and sweeps the tape once in reverse. Gradients of bound
    // leaf tensors are written to their .grad; untouched leaves get zeros.
    void backward(Id loss) {
        if (backward_done_) throw state_error("backward: already ran for this graph");
        if (!nodes_[loss].val.is_scalar()) {
            throw config_error("backward: loss must be scalar, got shape " +
                               shape_str(nodes_[loss].val.shape));
        }
        backward_done_ = true;
        for (auto& n : nodes_) {
            if (n.needs_grad) n.grad.assign(n.val.numel(), T(0));
        }
        if (nodes_[loss].needs_grad) nodes_[loss].grad[0] = T(1);
        for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; id--) {
            auto& n = nodes_[id];
            if (n.needs_grad && n.back) n.back(id);
        }
        for (auto& n : nodes_) {
            if (n.bound && n.bound->requires_grad) {
                n.bound->grad.assign(n.bound->data.size(), T(0));
            }
        }
        for (auto& n : nodes_) {
            if (n.bound && n.bound->requires_grad) {
                for (size_t i = 0; i < n.grad.size(); i++) n.bound->grad[i] += n.grad[i];
            }
        }
    }

    size_t size() const { return nodes_.size(); }

   private:
    struct Node {
        Tensor<T> val;
        std::vector<T> grad;
        bool needs_grad = false;
        std::function<void(Id)> back;
        Tensor<T>* bound = nullptr;
    };

    Id push(Tensor<T> val, bool needs_grad, std::function<void(Id)> back) {
        ensure_finite(val.data, "graph op");
        Node n;
        n.val = std::move(val);
        n.needs_grad = needs_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size()) - 1;
    }

    const Tensor<T>& val(Id id) const { return nodes_[id].val; }
    bool needs(Id id) const { return nodes_[id].needs_grad; }

    void acc(Id id, const std::vector<T>& g) {
        auto& dst = nodes_[id].grad;
        for (size_t i = 0; i < g.size(); i++) dst[i] += g[i];
    }

    void check_same_shape(Id a, Id b, const char* op) const {
        if (val(a).shape != val(b).shape) {
            throw shape_error(std::string(op) + ": shape mismatch " + shape_str(val(a).shape) +
                              " vs " + shape_str(val(b).shape));
        }
    }

    static std::tuple<size_t, size_t, size_t> axis_split(const Shape& s, size_t axis) {
        size_t outer = 1, inner = 1;
        for (size_t i = 0; i < axis; i++) outer *= s[i];
        for (size_t i = axis + 1; i < s.size(); i++) inner *= s[i];
        return {outer, s[axis], inner};
    }

    std::vector<Node> nodes_;
    std::unordered_map<Id, AttnInfo> attn_;
    bool backward_done_ = false;
};

}  // namespace saga
