#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "saga/model.hpp"

namespace saga {

// Head handling for signature extraction: average across heads (default) or
// keep one head.
struct HeadMode {
    int head = -1;  // -1 = averaged

    static HeadMode averaged() { return {}; }
    static HeadMode per_head(size_t h) { return {static_cast<int>(h)}; }
    bool is_averaged() const { return head < 0; }
};

// Class-level frame-to-frame attention fingerprint: the penultimate temporal
// block's softmaxed attention, averaged over videos and min-max normalized.
struct TSig {
    std::vector<double> matrix;  // L x L, entries in [0,1]
    size_t L = 0;
    std::string class_id;
    size_t n_videos = 0;
    size_t source_block = 0;
    int head = -1;            // -1 = averaged
    bool degenerate = false;  // zero-range normalization input

    double at(size_t i, size_t j) const { return matrix[i * L + j]; }
};

struct SignatureDistance {
    double cosine = 0.0;
    double frobenius = 0.0;
};

inline SignatureDistance signature_distance(const TSig& a, const TSig& b) {
    if (a.L != b.L) {
        throw shape_error("signature_distance: L " + std::to_string(a.L) + " vs " +
                          std::to_string(b.L));
    }
    double dot = 0, na = 0, nb = 0, fro = 0;
    for (size_t i = 0; i < a.matrix.size(); i++) {
        dot += a.matrix[i] * b.matrix[i];
        na += a.matrix[i] * a.matrix[i];
        nb += b.matrix[i] * b.matrix[i];
        const double diff = a.matrix[i] - b.matrix[i];
        fro += diff * diff;
    }
    SignatureDistance d;
    d.frobenius = std::sqrt(fro);
    if (na == 0.0 && nb == 0.0) {
        d.cosine = 1.0;
    } else if (na == 0.0 || nb == 0.0) {
        d.cosine = 0.0;
    } else {
        d.cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    }
    return d;
}

// Softmaxed attention of the penultimate temporal block, per head.
template <typename T>
Tensor<T> extract_attention(Model<T>& model, const VideoEmbedding& video) {
    if (model.config.depth < 2) {
        throw config_error("extract_attention: depth must be >= 2");
    }
    model.mode = Mode::EVAL;
    auto out = forward(model, video, /*capture=*/true);
    return out.attention[model.temporal.size() - 2];
}

inline size_t tsig_source_block(const ModelConfig& cfg) { return cfg.temporal_blocks() - 2; }

// Mean attention over the given videos (heads averaged first when requested),
// min-max normalized to [0,1]. A zero-range mean yields the all-zeros matrix
// with the degenerate flag set.
template <typename T>
TSig compute_signature(Model<T>& model, const Dataset& ds, const IndexList& videos,
                       HeadMode mode, const std::string& class_id) {
    if (videos.empty()) throw config_error("compute_signature: need at least one video");
    if (!mode.is_averaged() && static_cast<size_t>(mode.head) >= model.config.n_heads) {
        throw config_error("compute_signature: head index out of range");
    }
    model.mode = Mode::EVAL;
    const size_t L = ds.L;
    const size_t block = tsig_source_block(model.config);
    const size_t heads = model.config.n_heads;
    std::vector<double> sum(L * L, 0.0);

    const size_t eval_batch = 64;
    for (size_t at = 0; at < videos.size(); at += eval_batch) {
        const size_t n = std::min(eval_batch, videos.size() - at);
        IndexList chunk(videos.begin() + at, videos.begin() + at + n);
        Graph<T> g;
        auto fwd = forward_batch(model, g, assemble_tokens<T>(model.config, ds, chunk), n, L,
                                 /*capture=*/true);
        const auto& info = g.attention_weights(fwd.attn_nodes.at(block));
        for (size_t b = 0; b < n; b++) {
            for (size_t i = 0; i < L * L; i++) {
                double acc = 0;
                if (mode.is_averaged()) {
                    for (size_t h = 0; h < heads; h++) {
                        acc += static_cast<double>(
                            (*info.weights)[(b * heads + h) * L * L + i]);
                    }
                    acc /= static_cast<double>(heads);
                } else {
                    acc = static_cast<double>(
                        (*info.weights)[(b * heads + mode.head) * L * L + i]);
                }
                sum[i] += acc;
            }
        }
    }

    TSig sig;
    sig.L = L;
    sig.class_id = class_id;
    sig.n_videos = videos.size();
    sig.source_block = block;
    sig.head = mode.head;
    sig.matrix.resize(L * L);
    double lo = sum[0], hi = sum[0];
    for (double v : sum) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    const double nv = static_cast<double>(videos.size());
    if (range / nv < 1e-12) {
        sig.degenerate = true;
        std::fill(sig.matrix.begin(), sig.matrix.end(), 0.0);
    } else {
        for (size_t i = 0; i < sum.size(); i++) sig.matrix[i] = (sum[i] - lo) / range;
    }
    return sig;
}

// Raw per-video stand-in when there is no Dataset (probe files): wraps the
// videos in a throwaway dataset sharing the model dims.
template <typename T>
TSig compute_signature(Model<T>& model, const std::vector<VideoEmbedding>& videos, HeadMode mode,
                       const std::string& class_id) {
    if (videos.empty()) throw config_error("compute_signature: need at least one video");
    Dataset tmp;
    tmp.manifest = synthetic_manifest(2);
    tmp.L = videos[0].frames.shape[0];
    tmp.l_t = videos[0].frames.shape[1];
    tmp.d_t = videos[0].frames.shape[2];
    for (const auto& v : videos) {
        if (v.frames.shape != videos[0].frames.shape) {
            throw shape_error("compute_signature: mixed video shapes");
        }
        tmp.videos.push_back(v);
    }
    tmp.splits.assign(tmp.videos.size(), Split::TEST);
    return compute_signature(model, tmp, all_indices(tmp), mode, class_id);
}

// PGM (P5, 8-bit) plus CSV with 9 significant digits.
inline void export_heatmap(const TSig& sig, const std::string& path_base) {
    {
        std::ofstream pgm(path_base + ".pgm", std::ios::binary);
        if (!pgm) throw io_error("export_heatmap: cannot write " + path_base + ".pgm");
        pgm << "P5\n" << sig.L << " " << sig.L << "\n255\n";
        for (double v : sig.matrix) {
            const int byte = static_cast<int>(std::lround(255.0 * v));
            pgm.put(static_cast<char>(std::clamp(byte, 0, 255)));
        }
    }
    std::ofstream csv(path_base + ".csv", std::ios::binary);
    if (!csv) throw io_error("export_heatmap: cannot write " + path_base + ".csv");
    char buf[48];
    for (size_t i = 0; i < sig.L; i++) {
        for (size_t j = 0; j < sig.L; j++) {
            std::snprintf(buf, sizeof(buf), "%.9g", sig.at(i, j));
            csv << (j ? "," : "") << buf;
        }
        csv << "\n";
    }
}

// Per-class signatures over one split plus the stability/separation numbers:
// split-half cosine per class, pairwise cosine between class signatures.
struct SignatureSetReport {
    std::vector<TSig> signatures;
    std::vector<double> split_half;               // per class
    std::vector<std::vector<double>> pair_cosine;  // [class][class]
    double min_intra = 1.0;
    double max_inter = -1.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["classes"] = nlohmann::json::array();
        for (size_t c = 0; c < signatures.size(); c++) {
            j["classes"].push_back({{"id", signatures[c].class_id},
                                    {"n_videos", signatures[c].n_videos},
                                    {"source_block", signatures[c].source_block},
                                    {"degenerate", signatures[c].degenerate},
                                    {"split_half_cosine", split_half[c]}});
        }
        j["pair_cosine"] = pair_cosine;
        j["min_intra_cosine"] = min_intra;
        j["max_inter_cosine"] = max_inter;
        j["separated"] = min_intra > max_inter;
        return j;
    }
};

template <typename T>
SignatureSetReport signature_set_report(Model<T>& model, const Dataset& ds, Split split,
                                        HeadMode mode) {
    const auto& gen = ds.manifest.classes_at(Level::GEN);
    SignatureSetReport rep;
    for (size_t c = 0; c < gen.names.size(); c++) {
        IndexList videos;
        for (uint32_t i : split_indices(ds, split)) {
            if (ds.videos[i].label.at(Level::GEN) == c) videos.push_back(i);
        }
        if (videos.empty()) {
            throw config_error("signature_set_report: class " + gen.names[c] + " has no videos");
        }
        rep.signatures.push_back(compute_signature(model, ds, videos, mode, gen.names[c]));
        IndexList first(videos.begin(), videos.begin() + videos.size() / 2);
        IndexList second(videos.begin() + videos.size() / 2, videos.end());
        if (first.empty() || second.empty()) {
            rep.split_half.push_back(1.0);
        } else {
            auto a = compute_signature(model, ds, first, mode, gen.names[c]);
            auto b = compute_signature(model, ds, second, mode, gen.names[c]);
            rep.split_half.push_back(signature_distance(a, b).cosine);
        }
        rep.min_intra = std::min(rep.min_intra, rep.split_half.back());
    }
    const size_t n = rep.signatures.size();
    rep.pair_cosine.assign(n, std::vector<double>(n, 1.0));
    for (size_t a = 0; a < n; a++) {
        for (size_t b = 0; b < n; b++) {
            rep.pair_cosine[a][b] = signature_distance(rep.signatures[a], rep.signatures[b]).cosine;
            if (a != b) rep.max_inter = std::max(rep.max_inter, rep.pair_cosine[a][b]);
        }
    }
    return rep;
}

// Signature for a class the model never saw, with its similarity to every
// trained-class signature.
struct ProbeReport {
    TSig signature;
    std::vector<std::pair<std::string, double>> similarity;  // per trained class
    double max_similarity = -1.0;
    std::string nearest;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["class"] = signature.class_id;
        j["n_videos"] = signature.n_videos;
        j["similarity"] = nlohmann::json::object();
        for (auto& [name, cos] : similarity) j["similarity"][name] = cos;
        j["max_similarity"] = max_similarity;
        j["nearest"] = nearest;
        return j;
    }
};

template <typename T>
ProbeReport unseen_signature_probe(Model<T>& model, const std::vector<VideoEmbedding>& videos,
                                   const std::vector<TSig>& trained, HeadMode mode,
                                   const std::string& class_id) {
    ProbeReport rep;
    rep.signature = compute_signature(model, videos, mode, class_id);
    for (const auto& t : trained) {
        const double cos = signature_distance(rep.signature, t).cosine;
        rep.similarity.push_back({t.class_id, cos});
        if (cos > rep.max_similarity) {
            rep.max_similarity = cos;
            rep.nearest = t.class_id;
        }
    }
    return rep;
}

}  // namespace saga
