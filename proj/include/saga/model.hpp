#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "saga/embeddings.hpp"
#include "saga/graph.hpp"

namespace saga {

inline constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
    size_t d_t = 64;
    size_t l_t = 16;
    size_t L_max = 8;
    size_t n_heads = 4;
    size_t depth = 5;  // temporal encoder has depth + 1 blocks
    size_t mlp_hidden = 128;
    float dropout_rate = 0.1f;
    size_t n_classes = 2;
    bool use_positional = true;

    size_t temporal_blocks() const { return depth + 1; }

    void validate() const {
        if (n_heads == 0 || d_t % n_heads != 0) {
            throw config_error("model config: d_t (" + std::to_string(d_t) +
                               ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
        }
        if (depth < 2) throw config_error("model config: depth must be >= 2");
        if (mlp_hidden < d_t) throw config_error("model config: mlp_hidden must be >= d_t");
        if (n_classes < 2) throw config_error("model config: n_classes must be >= 2");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw config_error("model config: dropout_rate must be in [0,1)");
        }
        validate_video_dims(L_max, l_t, d_t);
    }

    bool operator==(const ModelConfig&) const = default;
};

enum class Mode { TRAIN, EVAL };

// One pre-norm transformer encoder block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <typename T>
struct BlockParams {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor<T> w1, b1, w2, b2;
};

template <typename T>
class Model {
   public:
    Model(ModelConfig cfg, Prng& rng) : config(cfg) {
        config.validate();
        init_block(spatial, rng);
        temporal.resize(config.temporal_blocks());
        for (auto& blk : temporal) init_block(blk, rng);
        init_head(rng);
    }

    ModelConfig config;
    Mode mode = Mode::EVAL;
    BlockParams<T> spatial;
    std::vector<BlockParams<T>> temporal;
    Tensor<T> head_w, head_b;

    // Fixed order; drives optimizer state, checkpoints, and counting.
    std::vector<std::pair<std::string, Tensor<T>*>> parameters() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        auto block = [&](const std::string& prefix, BlockParams<T>& b) {
            out.push_back({prefix + ".attn.wq", &b.wq});
            out.push_back({prefix + ".attn.bq", &b.bq});
            out.push_back({prefix + ".attn.wk", &b.wk});
            out.push_back({prefix + ".attn.bk", &b.bk});
            out.push_back({prefix + ".attn.wv", &b.wv});
            out.push_back({prefix + ".attn.bv", &b.bv});
            out.push_back({prefix + ".attn.wo", &b.wo});
            out.push_back({prefix + ".attn.bo", &b.bo});
            out.push_back({prefix + ".ln1.g", &b.ln1_g});
            out.push_back({prefix + ".ln1.b", &b.ln1_b});
            out.push_back({prefix + ".ln2.g", &b.ln2_g});
            out.push_back({prefix + ".ln2.b", &b.ln2_b});
            out.push_back({prefix + ".mlp.w1", &b.w1});
            out.push_back({prefix + ".mlp.b1", &b.b1});
            out.push_back({prefix + ".mlp.w2", &b.w2});
            out.push_back({prefix + ".mlp.b2", &b.b2});
        };
        block("spatial", spatial);
        for (size_t i = 0; i < temporal.size(); i++) block("temporal." + std::to_string(i),
                                                           temporal[i]);
        out.push_back({"head.w", &head_w});
        out.push_back({"head.b", &head_b});
        return out;
    }

    size_t parameter_count() {
        size_t n = 0;
        for (auto& [name, t] : parameters()) n += t->numel();
        return n;
    }

    // blocks * (4 d (d+1) + 4 d + 2 d h + h + d) + head
    static size_t parameter_count_for(const ModelConfig& c) {
        const size_t d = c.d_t, h = c.mlp_hidden;
        const size_t block = 4 * d * d + 2 * d * h + 9 * d + h;
        return (c.depth + 2) * block + d * c.n_classes + c.n_classes;
    }

    // Keeps every non-head parameter bit-exact; the head is freshly drawn
    // even when the class count is unchanged.
    void replace_head(size_t new_n_classes, Prng& rng) {
        if (new_n_classes < 2) throw config_error("replace_head: n_classes must be >= 2");
        config.n_classes = new_n_classes;
        init_head(rng);
    }

    void set_trainable(bool backbone, bool head) {
        for (auto& [name, t] : parameters()) {
            const bool is_head = name.rfind("head.", 0) == 0;
            t->requires_grad = is_head ? head : backbone;
        }
    }

   private:
    Tensor<T> affine_init(Shape s, size_t fan_in, Prng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        auto t = Tensor<T>::uniform(std::move(s), rng, -bound, bound);
        t.requires_grad = true;
        return t;
    }

    Tensor<T> const_init(Shape s, T value) {
        Tensor<T> t(std::move(s), value);
        t.requires_grad = true;
        return t;
    }

    void init_block(BlockParams<T>& b, Prng& rng) {
        const size_t d = config.d_t, h = config.mlp_hidden;
        b.wq = affine_init({d, d}, d, rng);
        b.bq = const_init({d}, T(0));
        b.wk = affine_init({d, d}, d, rng);
        b.bk = const_init({d}, T(0));
        b.wv = affine_init({d, d}, d, rng);
        b.bv = const_init({d}, T(0));
        b.wo = affine_init({d, d}, d, rng);
        b.bo = const_init({d}, T(0));
        b.ln1_g = const_init({d}, T(1));
        b.ln1_b = const_init({d}, T(0));
        b.ln2_g = const_init({d}, T(1));
        b.ln2_b = const_init({d}, T(0));
        b.w1 = affine_init({d, h}, d, rng);
        b.b1 = const_init({h}, T(0));
        b.w2 = affine_init({h, d}, h, rng);
        b.b2 = const_init({d}, T(0));
    }

    void init_head(Prng& rng) {
        head_w = affine_init({config.d_t, config.n_classes}, config.d_t, rng);
        head_b = const_init({config.n_classes}, T(0));
    }
};

// Sinusoidal table: PE(m, 2i) = sin(m / 10000^(2i/d)), PE(m, 2i+1) = cos(same).
template <typename T>
Tensor<T> positional_table(size_t L, size_t d) {
    Tensor<T> pe({L, d});
    for (size_t m = 0; m < L; m++) {
        for (size_t i = 0; i < d; i += 2) {
            const double rate =
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            const double angle = static_cast<double>(m) / rate;
            pe.data[m * d + i] = static_cast<T>(std::sin(angle));
            if (i + 1 < d) pe.data[m * d + i + 1] = static_cast<T>(std::cos(angle));
        }
    }
    return pe;
}

// Adds the sinusoidal table to a [L x d_t] frame sequence.
template <typename T>
Tensor<T> positional_encode(const Tensor<T>& frames, size_t L_max) {
    if (frames.rank() != 2) throw shape_error("positional_encode: need [L x d]");
    const size_t L = frames.shape[0], d = frames.shape[1];
    if (L > L_max) {
        throw config_error("positional_encode: L " + std::to_string(L) + " exceeds L_max " +
                           std::to_string(L_max));
    }
    auto pe = positional_table<T>(L, d);
    Tensor<T> out = frames;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] += pe.data[i];
    return out;
}

namespace detail {

template <typename T>
struct BlockLeaves {
    using Id = typename Graph<T>::Id;
    Id wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, ln2_g, ln2_b, w1, b1, w2, b2;
};

template <typename T>
BlockLeaves<T> bind_block(Graph<T>& g, BlockParams<T>& b, bool trainable) {
    auto reg = [&](Tensor<T>& t) {
        return trainable ? g.leaf(t) : g.input(t);
    };
    BlockLeaves<T> ids;
    ids.wq = reg(b.wq);
    ids.bq = reg(b.bq);
    ids.wk = reg(b.wk);
    ids.bk = reg(b.bk);
    ids.wv = reg(b.wv);
    ids.bv = reg(b.bv);
    ids.wo = reg(b.wo);
    ids.bo = reg(b.bo);
    ids.ln1_g = reg(b.ln1_g);
    ids.ln1_b = reg(b.ln1_b);
    ids.ln2_g = reg(b.ln2_g);
    ids.ln2_b = reg(b.ln2_b);
    ids.w1 = reg(b.w1);
    ids.b1 = reg(b.b1);
    ids.w2 = reg(b.w2);
    ids.b2 = reg(b.b2);
    return ids;
}

template <typename T>
typename Graph<T>::Id encoder_block(Graph<T>& g, typename Graph<T>::Id x,
                                    const BlockLeaves<T>& p, size_t groups, size_t glen,
                                    size_t heads, double dropout_rate, Prng* dropout_rng,
                                    typename Graph<T>::Id* attn_node) {
    auto a = g.layer_norm(x, p.ln1_g, p.ln1_b, T(kLayerNormEps));
    auto q = g.add_row_bias(g.matmul(a, p.wq), p.bq);
    auto k = g.add_row_bias(g.matmul(a, p.wk), p.bk);
    auto v = g.add_row_bias(g.matmul(a, p.wv), p.bv);
    auto att = g.group_attention(q, k, v, groups, glen, heads);
    if (attn_node) *attn_node = att;
    auto o = g.add_row_bias(g.matmul(att, p.wo), p.bo);
    if (dropout_rng && dropout_rate > 0.0) o = g.dropout(o, dropout_rate, *dropout_rng);
    auto x1 = g.add(x, o);
    auto m = g.layer_norm(x1, p.ln2_g, p.ln2_b, T(kLayerNormEps));
    auto hdn = g.gelu(g.add_row_bias(g.matmul(m, p.w1), p.b1));
    auto mo = g.add_row_bias(g.matmul(hdn, p.w2), p.b2);
    if (dropout_rng && dropout_rate > 0.0) mo = g.dropout(mo, dropout_rate, *dropout_rng);
    return g.add(x1, mo);
}

}  // namespace detail

// Flattens B videos into the token matrix [B*L*l_t x d_t] the batched forward
// consumes. All videos must share the model's dims.
template <typename T>
Tensor<T> assemble_tokens(const ModelConfig& cfg, const Dataset& ds, const IndexList& items) {
    const size_t L = ds.L, l_t = ds.l_t, d = ds.d_t;
    if (l_t != cfg.l_t || d != cfg.d_t || L > cfg.L_max || L < 2) {
        throw config_error("dataset dims [" + std::to_string(L) + "x" + std::to_string(l_t) +
                           "x" + std::to_string(d) + "] do not match model config [L<=" +
                           std::to_string(cfg.L_max) + ", l_t=" + std::to_string(cfg.l_t) +
                           ", d_t=" + std::to_string(cfg.d_t) + "]");
    }
    if (d % cfg.n_heads != 0) throw config_error("dataset d_t not divisible by model heads");
    Tensor<T> out({items.size() * L * l_t, d});
    const size_t per = L * l_t * d;
    for (size_t b = 0; b < items.size(); b++) {
        const auto& frames = ds.videos[items[b]].frames;
        if (frames.shape[0] != L) throw shape_error("assemble_tokens: ragged frame counts");
        for (size_t s = 0; s < per; s++) out.data[b * per + s] = static_cast<T>(frames.data[s]);
    }
    return out;
}

template <typename T>
struct BatchForward {
    using Id = typename Graph<T>::Id;
    Id logits = -1;   // [B x n_classes]
    Id phi = -1;      // [B x d_t]
    std::vector<Id> attn_nodes;  // one per temporal block when captured
    size_t batch = 0;
    size_t L = 0;
};

// Full pipeline on a batch: shared spatial block per frame, token mean-pool,
// sinusoidal positions, D temporal blocks, frame mean-pool, classifier head.
template <typename T>
BatchForward<T> forward_batch(Model<T>& model, Graph<T>& g, Tensor<T> tokens, size_t batch,
                              size_t L, bool capture = false, Prng* dropout_rng = nullptr) {
    const auto& cfg = model.config;
    const size_t l_t = cfg.l_t, d = cfg.d_t;
    if (tokens.shape != Shape{batch * L * l_t, d}) {
        throw shape_error("forward_batch: token matrix " + shape_str(tokens.shape) +
                          " does not match batch " + std::to_string(batch));
    }
    const bool train = model.mode == Mode::TRAIN;
    Prng* drop = train ? dropout_rng : nullptr;

    auto x = g.input(std::move(tokens));
    auto sp = detail::bind_block(g, model.spatial, train);
    auto h = detail::encoder_block(g, x, sp, batch * L, l_t, cfg.n_heads, cfg.dropout_rate, drop,
                                   nullptr);
    // per-frame token pool
    auto frames = g.mean_pool(g.reshape(h, {batch * L, l_t, d}), 1);

    if (cfg.use_positional) {
        auto pe = positional_table<T>(L, d);
        Tensor<T> tiled({batch * L, d});
        for (size_t b = 0; b < batch; b++) {
            std::copy(pe.data.begin(), pe.data.end(), tiled.data.begin() + b * L * d);
        }
        frames = g.add(frames, g.input(std::move(tiled)));
    }

    BatchForward<T> out;
    out.batch = batch;
    out.L = L;
    auto f = frames;
    for (auto& blk : model.temporal) {
        auto leaves = detail::bind_block(g, blk, train);
        typename Graph<T>::Id attn = -1;
        f = detail::encoder_block(g, f, leaves, batch, L, cfg.n_heads, cfg.dropout_rate, drop,
                                  capture ? &attn : nullptr);
        if (capture) out.attn_nodes.push_back(attn);
    }
    out.phi = g.mean_pool(g.reshape(f, {batch, L, d}), 1);

    auto reg = [&](Tensor<T>& t) { return train ? g.leaf(t) : g.input(t); };
    out.logits = g.add_row_bias(g.matmul(out.phi, reg(model.head_w)), reg(model.head_b));
    return out;
}

// Per-video attention matrices [n_heads x L x L] for one temporal block of a
// captured batch forward.
template <typename T>
Tensor<T> attention_for_video(const Graph<T>& g, const BatchForward<T>& fwd, size_t block,
                              size_t video_in_batch) {
    const auto& info = g.attention_weights(fwd.attn_nodes.at(block));
    const size_t L = info.glen, heads = info.heads;
    Tensor<T> out({heads, L, L});
    const size_t stride = L * L;
    for (size_t h = 0; h < heads; h++) {
        const T* src = info.weights->data() + (video_in_batch * heads + h) * stride;
        std::copy(src, src + stride, out.data.begin() + h * stride);
    }
    return out;
}

// Spec-level single-video surface.
template <typename T>
struct ForwardOutput {
    Tensor<T> logits;
    Tensor<T> phi;
    std::vector<Tensor<T>> attention;  // per temporal block, [n_heads x L x L]
};

template <typename T>
ForwardOutput<T> forward(Model<T>& model, const VideoEmbedding& video, bool capture = false,
                         Prng* dropout_rng = nullptr) {
    const size_t L = video.frames.shape[0];
    Graph<T> g;
    Tensor<T> tokens({L * model.config.l_t, model.config.d_t});
    if (video.frames.shape[1] != model.config.l_t || video.frames.shape[2] != model.config.d_t ||
        L > model.config.L_max) {
        throw shape_error("forward: video " + shape_str(video.frames.shape) +
                          " does not match model config");
    }
    for (size_t i = 0; i < tokens.data.size(); i++)
        tokens.data[i] = static_cast<T>(video.frames.data[i]);
    auto fwd = forward_batch(model, g, std::move(tokens), 1, L, capture, dropout_rng);
    ForwardOutput<T> out;
    out.logits = g.value(fwd.logits);
    out.logits.shape = {model.config.n_classes};
    out.phi = g.value(fwd.phi);
    out.phi.shape = {model.config.d_t};
    if (capture) {
        for (size_t blk = 0; blk < model.temporal.size(); blk++) {
            out.attention.push_back(attention_for_video(g, fwd, blk, 0));
        }
    }
    return out;
}

// Spatial encoder only: shared block applied to each frame's tokens, then
// token-axis mean pool. [L x l_t x d_t] -> [L x d_t].
template <typename T>
Tensor<T> spatial_encode(Model<T>& model, const Tensor<T>& frames) {
    if (frames.rank() != 3 || frames.shape[1] != model.config.l_t ||
        frames.shape[2] != model.config.d_t) {
        throw shape_error("spatial_encode: frames " + shape_str(frames.shape) +
                          " do not match config");
    }
    const size_t L = frames.shape[0];
    Graph<T> g;
    Tensor<T> tokens = frames;
    tokens.shape = {L * model.config.l_t, model.config.d_t};
    auto x = g.input(std::move(tokens));
    auto sp = detail::bind_block(g, model.spatial, false);
    auto h = detail::encoder_block(g, x, sp, L, model.config.l_t, model.config.n_heads, 0.0,
                                   nullptr, nullptr);
    auto pooled = g.mean_pool(g.reshape(h, {L, model.config.l_t, model.config.d_t}), 1);
    return g.value(pooled);
}

// Temporal encoder only: D blocks over a [L x d_t] sequence, mean-pooled phi,
// optional per-block attention capture. Positional encoding is the caller's
// business (it happens between spatial and temporal in the full pipeline).
template <typename T>
std::pair<Tensor<T>, std::vector<Tensor<T>>> temporal_encode(Model<T>& model,
                                                             const Tensor<T>& frames,
                                                             bool capture = false) {
    if (frames.rank() != 2 || frames.shape[1] != model.config.d_t) {
        throw shape_error("temporal_encode: frames " + shape_str(frames.shape) +
                          " do not match config");
    }
    const size_t L = frames.shape[0];
    Graph<T> g;
    auto f = g.input(frames);
    std::vector<typename Graph<T>::Id> attn_nodes;
    for (auto& blk : model.temporal) {
        auto leaves = detail::bind_block(g, blk, false);
        typename Graph<T>::Id attn = -1;
        f = detail::encoder_block(g, f, leaves, 1, L, model.config.n_heads, 0.0, nullptr,
                                  capture ? &attn : nullptr);
        if (capture) attn_nodes.push_back(attn);
    }
    auto phi = g.mean_pool(f, 0);
    std::vector<Tensor<T>> stack;
    if (capture) {
        for (size_t blk = 0; blk < attn_nodes.size(); blk++) {
            const auto& info = g.attention_weights(attn_nodes[blk]);
            Tensor<T> a({info.heads, L, L});
            std::copy(info.weights->begin(), info.weights->end(), a.data.begin());
            stack.push_back(std::move(a));
        }
    }
    return {g.value(phi), std::move(stack)};
}

// ---- checkpoints -----------------------------------------------------------------

// "SAGA" header, config block, named tensors; optimizer state (if any) follows
// under an "OPT1" section with the same tensor framing.
template <typename T>
struct AdamState {
    uint64_t step = 0;
    std::vector<Tensor<T>> m, v;  // parallel to Model::parameters()
};

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
void put_scalar(std::string& out, T v) {
    if constexpr (sizeof(T) == 4) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    } else {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
}

struct CkptReader {
    std::string buf;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw format_error(std::string("checkpoint: truncated while reading ") + what +
                               " at byte " + std::to_string(pos));
        }
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    template <typename T>
    T scalar(const char* what) {
        T v;
        if constexpr (sizeof(T) == 4) {
            uint32_t bits = u32(what);
            std::memcpy(&v, &bits, 4);
        } else {
            uint64_t bits = u64(what);
            std::memcpy(&v, &bits, 8);
        }
        return v;
    }
};

template <typename T>
void put_tensor(std::string& out, const std::string& name, const Tensor<T>& t) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (size_t e : t.shape) put_u32(out, static_cast<uint32_t>(e));
    for (T v : t.data) put_scalar(out, v);
}

template <typename T>
std::pair<std::string, Tensor<T>> read_tensor(CkptReader& r) {
    std::string name = r.str(r.u16("tensor name length"), "tensor name");
    r.need(1, "tensor rank");
    const uint8_t rank = static_cast<uint8_t>(r.buf[r.pos++]);
    Shape s(rank);
    for (auto& e : s) e = r.u32("tensor extent");
    Tensor<T> t(s);
    for (auto& v : t.data) v = r.template scalar<T>("tensor payload");
    return {std::move(name), std::move(t)};
}

}  // namespace detail

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path,
                     const AdamState<T>* opt = nullptr) {
    using namespace detail;
    std::string out;
    out += "SAGA";
    put_u16(out, 1);
    const auto& c = model.config;
    put_u32(out, static_cast<uint32_t>(c.d_t));
    put_u32(out, static_cast<uint32_t>(c.l_t));
    put_u32(out, static_cast<uint32_t>(c.L_max));
    put_u32(out, static_cast<uint32_t>(c.n_heads));
    put_u32(out, static_cast<uint32_t>(c.depth));
    put_u32(out, static_cast<uint32_t>(c.mlp_hidden));
    float drop = static_cast<float>(c.dropout_rate);
    put_scalar(out, drop);
    put_u32(out, static_cast<uint32_t>(c.n_classes));
    put_u32(out, c.use_positional ? 1u : 0u);
    put_u32(out, static_cast<uint32_t>(sizeof(T)));

    auto params = model.parameters();
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (auto& [name, t] : params) put_tensor(out, name, *t);

    if (opt) {
        out += "OPT1";
        put_u64(out, opt->step);
        put_u32(out, static_cast<uint32_t>(opt->m.size()));
        for (size_t i = 0; i < opt->m.size(); i++) {
            put_tensor(out, params[i].first + ".m", opt->m[i]);
            put_tensor(out, params[i].first + ".v", opt->v[i]);
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("checkpoint: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("checkpoint: short write to " + path);
}

// Reads the config header only; used to pick the scalar width before loading.
ModelConfig peek_checkpoint_config(const std::string& path, size_t* scalar_width);

template <typename T>
Model<T> load_checkpoint(const std::string& path, AdamState<T>* opt = nullptr) {
    using namespace detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("checkpoint: cannot open " + path);
    CkptReader r;
    r.buf.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (r.str(4, "magic") != "SAGA") throw format_error("checkpoint: bad magic");
    const uint16_t version = r.u16("version");
    if (version != 1) throw format_error("checkpoint: unsupported version " +
                                         std::to_string(version));
    ModelConfig c;
    c.d_t = r.u32("d_t");
    c.l_t = r.u32("l_t");
    c.L_max = r.u32("L_max");
    c.n_heads = r.u32("n_heads");
    c.depth = r.u32("depth");
    c.mlp_hidden = r.u32("mlp_hidden");
    c.dropout_rate = r.scalar<float>("dropout");
    c.n_classes = r.u32("n_classes");
    c.use_positional = r.u32("use_positional") != 0;
    const uint32_t width = r.u32("scalar width");
    if (width != sizeof(T)) {
        throw config_error("checkpoint: scalar width " + std::to_string(width) +
                           " does not match requested precision f" +
                           std::to_string(sizeof(T) * 8));
    }

    Prng throwaway(0);
    Model<T> model(c, throwaway);
    auto params = model.parameters();
    const uint32_t count = r.u32("tensor count");
    if (count != params.size()) {
        throw format_error("checkpoint: tensor count " + std::to_string(count) + ", expected " +
                           std::to_string(params.size()));
    }
    for (auto& [name, dst] : params) {
        auto [got_name, t] = read_tensor<T>(r);
        if (got_name != name) {
            throw format_error("checkpoint: tensor \"" + got_name + "\", expected \"" + name +
                               "\"");
        }
        if (t.shape != dst->shape) {
            throw format_error("checkpoint: tensor " + name + " has shape " + shape_str(t.shape) +
                               ", model expects " + shape_str(dst->shape));
        }
        dst->data = std::move(t.data);
    }
    if (opt && r.pos + 4 <= r.buf.size()) {
        if (r.str(4, "section tag") != "OPT1") throw format_error("checkpoint: bad section tag");
        opt->step = r.u64("optimizer step");
        const uint32_t n = r.u32("optimizer tensor count");
        if (n != params.size()) {
            throw format_error("checkpoint: optimizer tensor count mismatch");
        }
        opt->m.clear();
        opt->v.clear();
        for (uint32_t i = 0; i < n; i++) {
            opt->m.push_back(read_tensor<T>(r).second);
            opt->v.push_back(read_tensor<T>(r).second);
        }
    }
    return model;
}

}  // namespace saga
