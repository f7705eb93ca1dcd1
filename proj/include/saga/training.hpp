#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "saga/losses.hpp"
#include "saga/model.hpp"

namespace saga {

enum class LossKind { CE_ONLY, CE_SEMI, CE_HNM };

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::CE_ONLY: return "ce";
        case LossKind::CE_SEMI: return "ce+semi";
        case LossKind::CE_HNM: return "ce+hnm";
    }
    return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "ce") return LossKind::CE_ONLY;
    if (s == "ce+semi") return LossKind::CE_SEMI;
    if (s == "ce+hnm") return LossKind::CE_HNM;
    throw config_error("unknown loss kind: " + s + " (expected ce|ce+semi|ce+hnm)");
}

struct TrainConfig {
    size_t stage1_epochs = 5;
    size_t stage2_epochs = 30;
    double lr_stage1 = 1e-3;
    double lr_stage2 = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    size_t batch_size = 32;  // stage 1
    size_t pk_p = 4;         // stage 2
    size_t pk_k = 4;
    double alpha = 0.2;
    double lambda = 0.5;
    uint64_t seed = 42;
    bool freeze_backbone = false;

    void validate() const {
        if (lr_stage1 <= 0 || lr_stage2 <= 0) throw config_error("train config: lr must be > 0");
        if (pk_p * pk_k < 4) throw config_error("train config: P*K must be >= 4");
        if (lambda < 0 || lambda > 1) throw config_error("train config: lambda must be in [0,1]");
        if (!(alpha > 0)) throw config_error("train config: alpha must be > 0");
        if (batch_size < 2) throw config_error("train config: batch_size must be >= 2");
    }
};

// ---- Adam ------------------------------------------------------------------------

// Bias-corrected update for one tensor. Moments are carried in the same
// precision as the parameters so runs are bit-reproducible per precision.
template <typename T>
void adam_step(Tensor<T>& param, const std::vector<T>& grad, Tensor<T>& m, Tensor<T>& v,
               uint64_t t, double lr, double beta1, double beta2, double eps) {
    if (grad.size() != param.data.size() || m.data.size() != param.data.size() ||
        v.data.size() != param.data.size()) {
        throw shape_error("adam_step: size mismatch");
    }
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T corr1 = T(1) - static_cast<T>(std::pow(beta1, static_cast<double>(t)));
    const T corr2 = T(1) - static_cast<T>(std::pow(beta2, static_cast<double>(t)));
    const T step_lr = static_cast<T>(lr);
    const T e = static_cast<T>(eps);
    for (size_t i = 0; i < param.data.size(); i++) {
        const T g = grad[i];
        m.data[i] = b1 * m.data[i] + (T(1) - b1) * g;
        v.data[i] = b2 * v.data[i] + (T(1) - b2) * g * g;
        const T mhat = m.data[i] / corr1;
        const T vhat = v.data[i] / corr2;
        param.data[i] -= step_lr * mhat / (std::sqrt(vhat) + e);
    }
}

template <typename T>
class Adam {
   public:
    Adam(Model<T>& model, double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& [name, t] : model.parameters()) {
            state_.m.push_back(Tensor<T>(t->shape));
            state_.v.push_back(Tensor<T>(t->shape));
        }
    }

    // Applies one update from the gradients stored on the model parameters.
    void step(Model<T>& model) {
        state_.step++;
        size_t i = 0;
        for (auto& [name, t] : model.parameters()) {
            if (t->requires_grad && t->grad.size() == t->data.size()) {
                adam_step(*t, t->grad, state_.m[i], state_.v[i], state_.step, lr_, beta1_, beta2_,
                          eps_);
            }
            i++;
        }
    }

    AdamState<T>& state() { return state_; }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

   private:
    double lr_, beta1_, beta2_, eps_;
    AdamState<T> state_;
};

// ---- metrics ---------------------------------------------------------------------

struct Metrics {
    std::vector<std::string> class_names;
    std::vector<std::vector<uint64_t>> confusion;  // [truth][pred]
    uint64_t total = 0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // recall, a.k.a. per-class accuracy
    std::vector<double> precision;
    std::vector<double> recall;
    double macro_precision = 0.0;
    double macro_recall = 0.0;

    // Items whose true class is not evaluable (the other-backbone SD class)
    // are dropped before counting.
    static Metrics from_predictions(const std::vector<uint32_t>& truth,
                                    const std::vector<uint32_t>& pred,
                                    const LevelClasses& classes) {
        if (truth.size() != pred.size()) throw config_error("metrics: size mismatch");
        const size_t n = classes.names.size();
        Metrics m;
        m.class_names = classes.names;
        m.confusion.assign(n, std::vector<uint64_t>(n, 0));
        for (size_t i = 0; i < truth.size(); i++) {
            if (truth[i] >= n || pred[i] >= n) throw config_error("metrics: class out of range");
            if (!classes.evaluable[truth[i]]) continue;
            m.confusion[truth[i]][pred[i]]++;
            m.total++;
        }
        uint64_t diag = 0;
        std::vector<uint64_t> rowsum(n, 0), colsum(n, 0);
        for (size_t r = 0; r < n; r++) {
            for (size_t c = 0; c < n; c++) {
                rowsum[r] += m.confusion[r][c];
                colsum[c] += m.confusion[r][c];
            }
            diag += m.confusion[r][r];
        }
        m.accuracy = m.total ? static_cast<double>(diag) / static_cast<double>(m.total) : 0.0;
        m.per_class_accuracy.assign(n, 0.0);
        m.precision.assign(n, 0.0);
        m.recall.assign(n, 0.0);
        size_t supported = 0;
        for (size_t c = 0; c < n; c++) {
            if (rowsum[c] > 0) {
                m.recall[c] = static_cast<double>(m.confusion[c][c]) /
                              static_cast<double>(rowsum[c]);
                m.per_class_accuracy[c] = m.recall[c];
            }
            if (colsum[c] > 0) {
                m.precision[c] = static_cast<double>(m.confusion[c][c]) /
                                 static_cast<double>(colsum[c]);
            }
            if (rowsum[c] > 0) {
                supported++;
                m.macro_precision += m.precision[c];
                m.macro_recall += m.recall[c];
            }
        }
        if (supported > 0) {
            m.macro_precision /= static_cast<double>(supported);
            m.macro_recall /= static_cast<double>(supported);
        }
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["accuracy"] = accuracy;
        j["total"] = total;
        j["macro_precision"] = macro_precision;
        j["macro_recall"] = macro_recall;
        j["classes"] = nlohmann::json::array();
        for (size_t c = 0; c < class_names.size(); c++) {
            j["classes"].push_back({{"name", class_names[c]},
                                    {"accuracy", per_class_accuracy[c]},
                                    {"precision", precision[c]},
                                    {"recall", recall[c]}});
        }
        return j;
    }

    std::string confusion_csv() const {
        std::string out = "truth\\pred";
        for (const auto& n : class_names) out += "," + n;
        out += "\n";
        for (size_t r = 0; r < class_names.size(); r++) {
            out += class_names[r];
            for (size_t c = 0; c < class_names.size(); c++) {
                out += "," + std::to_string(confusion[r][c]);
            }
            out += "\n";
        }
        return out;
    }
};

// ---- run reports -------------------------------------------------------------------

// Everything needed to reproduce a run. Wall clock is kept out of the JSON so
// reports are byte-identical across reruns; the CLI logs timing separately.
struct RunReport {
    std::string stage;
    nlohmann::json config_echo;
    std::vector<double> epoch_losses;
    std::map<std::string, size_t> subset_per_class;
    nlohmann::json final_metrics;
    double wall_clock_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["stage"] = stage;
        j["config"] = config_echo;
        j["epoch_losses"] = epoch_losses;
        if (!subset_per_class.empty()) j["subset_per_class"] = subset_per_class;
        if (!final_metrics.is_null()) j["metrics"] = final_metrics;
        return j;
    }
};

template <typename T>
nlohmann::json echo_config(const ModelConfig& mc, const TrainConfig& tc) {
    nlohmann::json j;
    j["model"] = {{"d_t", mc.d_t},           {"l_t", mc.l_t},
                  {"L_max", mc.L_max},       {"n_heads", mc.n_heads},
                  {"depth", mc.depth},       {"mlp_hidden", mc.mlp_hidden},
                  {"dropout", mc.dropout_rate}, {"n_classes", mc.n_classes},
                  {"use_positional", mc.use_positional}};
    j["train"] = {{"stage1_epochs", tc.stage1_epochs},
                  {"stage2_epochs", tc.stage2_epochs},
                  {"lr_stage1", tc.lr_stage1},
                  {"lr_stage2", tc.lr_stage2},
                  {"beta1", tc.beta1},
                  {"beta2", tc.beta2},
                  {"adam_eps", tc.adam_eps},
                  {"batch_size", tc.batch_size},
                  {"pk_p", tc.pk_p},
                  {"pk_k", tc.pk_k},
                  {"alpha", tc.alpha},
                  {"lambda", tc.lambda},
                  {"seed", tc.seed},
                  {"freeze_backbone", tc.freeze_backbone}};
    j["precision"] = sizeof(T) == 4 ? "f32" : "f64";
    return j;
}

// ---- training loops ------------------------------------------------------------------

namespace detail {

// Half real, half fake per batch; the smaller side wraps with a reshuffle.
class BinaryBatcher {
   public:
    BinaryBatcher(const Dataset& ds, const IndexList& items, size_t batch, uint64_t seed)
        : batch_(batch), seed_(seed) {
        for (uint32_t idx : items) {
            (ds.videos[idx].label.at(Level::BIN) == 0 ? real_ : fake_).push_back(idx);
        }
        if (real_.empty() || fake_.empty()) {
            throw config_error("stage 1 needs both real and fake items in the train split");
        }
        steps_per_epoch_ = (items.size() + batch - 1) / batch;
        refill(real_q_, real_);
        refill(fake_q_, fake_);
    }

    size_t steps_per_epoch() const { return steps_per_epoch_; }

    IndexList next_batch() {
        IndexList out;
        const size_t n_real = batch_ / 2;
        for (size_t i = 0; i < batch_; i++) {
            auto& q = (i < n_real) ? real_q_ : fake_q_;
            auto& pool = (i < n_real) ? real_ : fake_;
            if (q.empty()) refill(q, pool);
            out.push_back(q.back());
            q.pop_back();
        }
        return out;
    }

   private:
    void refill(IndexList& q, const IndexList& pool) {
        q = pool;
        Prng rng = Prng::child(seed_, 0xb1a5e00000000ULL + refill_count_++);
        for (size_t i = q.size() - 1; i > 0; i--) std::swap(q[i], q[rng.below(i + 1)]);
    }

    size_t batch_;
    uint64_t seed_;
    IndexList real_, fake_;
    IndexList real_q_, fake_q_;
    size_t steps_per_epoch_ = 0;
    uint64_t refill_count_ = 0;
};

template <typename T>
std::vector<int> labels_at(const Dataset& ds, const IndexList& items, Level level) {
    std::vector<int> out;
    out.reserve(items.size());
    for (uint32_t idx : items) out.push_back(static_cast<int>(ds.videos[idx].label.at(level)));
    return out;
}

template <typename T>
double train_step(Model<T>& model, Adam<T>& opt, const Dataset& ds, const IndexList& batch,
                  const std::vector<int>& labels, const TrainConfig& cfg, LossKind kind,
                  Prng& dropout_rng) {
    Graph<T> g;
    auto tokens = assemble_tokens<T>(model.config, ds, batch);
    auto fwd = forward_batch(model, g, std::move(tokens), batch.size(), ds.L, false,
                             &dropout_rng);
    auto ce = g.cross_entropy(fwd.logits, labels);
    typename Graph<T>::Id total = ce;
    if (kind != LossKind::CE_ONLY) {
        auto metric = metric_loss_node(g, fwd.phi, labels, static_cast<T>(cfg.alpha),
                                       kind == LossKind::CE_HNM ? SelectionKind::HARD
                                                                : SelectionKind::SEMI_HARD);
        total = g.add(g.scale(ce, static_cast<T>(cfg.lambda)),
                      g.scale(metric, static_cast<T>(1.0 - cfg.lambda)));
    }
    const double loss = static_cast<double>(g.value(total).scalar());
    g.backward(total);
    opt.step(model);
    return loss;
}

}  // namespace detail

// Stage 1: binary real/fake pretraining with cross-entropy, the real class
// oversampled to half of each batch.
template <typename T>
RunReport pretrain_stage1(Model<T>& model, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (model.config.n_classes != 2) {
        throw config_error("stage 1 expects a binary head, model has " +
                           std::to_string(model.config.n_classes) + " classes");
    }
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.stage = "stage1";
    report.config_echo = echo_config<T>(model.config, cfg);

    auto train_items = split_indices(ds, Split::TRAIN);
    detail::BinaryBatcher batcher(ds, train_items, cfg.batch_size, cfg.seed);
    Adam<T> opt(model, cfg.lr_stage1, cfg.beta1, cfg.beta2, cfg.adam_eps);
    Prng dropout_rng = Prng::child(cfg.seed, 0xd409);

    model.mode = Mode::TRAIN;
    model.set_trainable(true, true);
    for (size_t epoch = 0; epoch < cfg.stage1_epochs; epoch++) {
        double sum = 0;
        for (size_t s = 0; s < batcher.steps_per_epoch(); s++) {
            auto batch = batcher.next_batch();
            auto labels = detail::labels_at<T>(ds, batch, Level::BIN);
            sum += detail::train_step(model, opt, ds, batch, labels, cfg, LossKind::CE_ONLY,
                                      dropout_rng);
        }
        report.epoch_losses.push_back(sum / static_cast<double>(batcher.steps_per_epoch()));
    }
    model.mode = Mode::EVAL;
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// Stage 2: swap the head to the target level's class count and adapt on a
// stratified fraction of the train split with PK batches.
template <typename T>
RunReport adapt_stage2(Model<T>& model, const Dataset& ds, Level level, double fraction,
                       const TrainConfig& cfg, LossKind kind) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto& classes = ds.manifest.classes_at(level);

    Prng head_rng = Prng::child(cfg.seed, 0x4ead);
    model.replace_head(classes.names.size(), head_rng);
    model.set_trainable(!cfg.freeze_backbone, true);

    RunReport report;
    report.stage = "stage2";
    report.config_echo = echo_config<T>(model.config, cfg);
    report.config_echo["level"] = level_name(level);
    report.config_echo["fraction"] = fraction;
    report.config_echo["loss"] = loss_kind_name(kind);

    auto train_items = split_indices(ds, Split::TRAIN);
    auto subset = stratified_subsample(ds, train_items, fraction, 1, cfg.seed);
    const auto& gen_names = ds.manifest.classes_at(Level::GEN).names;
    for (uint32_t idx : subset) {
        report.subset_per_class[gen_names[ds.videos[idx].label.at(Level::GEN)]]++;
    }

    PkBatcher batcher(ds, subset, cfg.pk_p, cfg.pk_k, cfg.seed);
    Adam<T> opt(model, cfg.lr_stage2, cfg.beta1, cfg.beta2, cfg.adam_eps);
    Prng dropout_rng = Prng::child(cfg.seed, 0xd41);

    model.mode = Mode::TRAIN;
    for (size_t epoch = 0; epoch < cfg.stage2_epochs; epoch++) {
        double sum = 0;
        for (size_t s = 0; s < batcher.batches_per_epoch(); s++) {
            auto batch = batcher.next_batch();
            auto labels = detail::labels_at<T>(ds, batch, level);
            sum += detail::train_step(model, opt, ds, batch, labels, cfg, kind, dropout_rng);
        }
        report.epoch_losses.push_back(sum / static_cast<double>(batcher.batches_per_epoch()));
    }
    model.mode = Mode::EVAL;
    model.set_trainable(true, true);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---- evaluation -----------------------------------------------------------------------

template <typename T>
std::vector<uint32_t> predict(Model<T>& model, const Dataset& ds, const IndexList& items,
                              size_t eval_batch = 64) {
    model.mode = Mode::EVAL;
    std::vector<uint32_t> preds(items.size());
    const size_t n_classes = model.config.n_classes;
    for (size_t at = 0; at < items.size(); at += eval_batch) {
        const size_t n = std::min(eval_batch, items.size() - at);
        IndexList chunk(items.begin() + at, items.begin() + at + n);
        Graph<T> g;
        auto fwd = forward_batch(model, g, assemble_tokens<T>(model.config, ds, chunk), n, ds.L);
        const auto& logits = g.value(fwd.logits);
        for (size_t r = 0; r < n; r++) {
            uint32_t best = 0;
            for (size_t c = 1; c < n_classes; c++) {
                if (logits.data[r * n_classes + c] > logits.data[r * n_classes + best]) {
                    best = static_cast<uint32_t>(c);
                }
            }
            preds[at + r] = best;
        }
    }
    return preds;
}

template <typename T>
Metrics evaluate(Model<T>& model, const Dataset& ds, Level level, Split split = Split::TEST) {
    const auto& classes = ds.manifest.classes_at(level);
    if (model.config.n_classes != classes.names.size()) {
        throw config_error("evaluate: model has " + std::to_string(model.config.n_classes) +
                           " classes but " + level_name(level) + " has " +
                           std::to_string(classes.names.size()));
    }
    auto items = split_indices(ds, split);
    auto preds = predict(model, ds, items);
    std::vector<uint32_t> truth(items.size());
    for (size_t i = 0; i < items.size(); i++) truth[i] = ds.videos[items[i]].label.at(level);
    return Metrics::from_predictions(truth, preds, classes);
}

// Scores a GEN-level model at a coarser level by projecting its predictions.
template <typename T>
Metrics evaluate_projected(Model<T>& gen_model, const Dataset& ds, Level coarse,
                           Split split = Split::TEST) {
    const auto& gen_classes = ds.manifest.classes_at(Level::GEN);
    if (gen_model.config.n_classes != gen_classes.names.size()) {
        throw config_error("evaluate_projected: model was not trained at GEN level");
    }
    auto items = split_indices(ds, split);
    auto gen_preds = predict(gen_model, ds, items);
    auto preds = ds.manifest.project_predictions(gen_preds, coarse);
    std::vector<uint32_t> truth(items.size());
    for (size_t i = 0; i < items.size(); i++) truth[i] = ds.videos[items[i]].label.at(coarse);
    return Metrics::from_predictions(truth, preds, ds.manifest.classes_at(coarse));
}

// CSV of phi embeddings: video_id, generator_id, e0..e{d-1}.
template <typename T>
void export_embeddings(Model<T>& model, const Dataset& ds, const IndexList& items,
                       const std::string& path) {
    model.mode = Mode::EVAL;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("export_embeddings: cannot write " + path);
    const size_t d = model.config.d_t;
    f << "video_id,generator_id";
    for (size_t i = 0; i < d; i++) f << ",e" << i;
    f << "\n";
    const size_t eval_batch = 64;
    char buf[64];
    for (size_t at = 0; at < items.size(); at += eval_batch) {
        const size_t n = std::min(eval_batch, items.size() - at);
        IndexList chunk(items.begin() + at, items.begin() + at + n);
        Graph<T> g;
        auto fwd = forward_batch(model, g, assemble_tokens<T>(model.config, ds, chunk), n, ds.L);
        const auto& phi = g.value(fwd.phi);
        for (size_t r = 0; r < n; r++) {
            const auto& v = ds.videos[chunk[r]];
            f << v.video_id << "," << v.label.generator_id;
            for (size_t i = 0; i < d; i++) {
                std::snprintf(buf, sizeof(buf), sizeof(T) == 4 ? "%.9g" : "%.17g",
                              static_cast<double>(phi.data[r * d + i]));
                f << "," << buf;
            }
            f << "\n";
        }
    }
}

}  // namespace saga
