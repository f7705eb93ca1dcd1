// saga: synthetic-video source attribution pipeline.
//
// Subcommands: gen-data, pretrain, adapt, eval, tsig. Every run writes its
// flag echo to <out>/config.json before any compute; timestamps go only to
// <out>/run.log so reruns with identical inputs are byte-identical.
// Exit codes: 0 ok, 2 usage/config, 3 io/format, 4 numeric failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "saga/embeddings.hpp"
#include "saga/labels.hpp"
#include "saga/model.hpp"
#include "saga/training.hpp"
#include "saga/tsig.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saga;

namespace {

uint64_t default_seed() {
    if (const char* env = std::getenv("SAGA_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 42;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path.string());
    f << text;
}

void write_config_echo(const fs::path& out_dir, const json& cfg) {
    write_text(out_dir / "config.json", cfg.dump(2) + "\n");
}

void append_log(const fs::path& out_dir, const std::string& line) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
    f << "[" << secs.count() << "] " << line << "\n";
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

Dataset load_data_dir(const std::string& dir) {
    const fs::path p(dir);
    auto manifest = GeneratorManifest::load((p / "manifest.json").string());
    auto ds = read_embedding_file((p / "data.semb").string(), std::move(manifest));

    std::ifstream f(p / "splits.json");
    if (!f) throw io_error("cannot open " + (p / "splits.json").string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw format_error("splits.json: " + std::string(e.what()));
    }
    const auto& splits = j.at("splits");
    if (splits.size() != ds.size()) {
        throw format_error("splits.json lists " + std::to_string(splits.size()) + " items, data has " +
                           std::to_string(ds.size()));
    }
    for (size_t i = 0; i < ds.size(); i++) {
        const std::string s = splits[i].get<std::string>();
        if (s == "TRAIN") ds.splits[i] = Split::TRAIN;
        else if (s == "VAL") ds.splits[i] = Split::VAL;
        else if (s == "TEST") ds.splits[i] = Split::TEST;
        else throw format_error("splits.json: bad tag \"" + s + "\" at index " + std::to_string(i));
    }
    return ds;
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                                   ? c : '_';
    return out;
}

// ---- gen-data ---------------------------------------------------------------------

struct GenFlags {
    std::string out;
    size_t classes = 6;
    size_t videos_per_class = 2000;
    size_t L = 8, l_t = 16, d_t = 64;
    std::string overlap_pair = "4,5";
    size_t probe_videos = 0;
    double train_frac = 0.8, val_frac = 0.1, test_frac = 0.1;
    uint64_t seed = default_seed();
};

int cmd_gen_data(const GenFlags& f) {
    const fs::path out(f.out);
    json echo = {{"command", "gen-data"},
                 {"classes", f.classes},
                 {"videos_per_class", f.videos_per_class},
                 {"L", f.L},
                 {"l_t", f.l_t},
                 {"d_t", f.d_t},
                 {"overlap_pair", f.overlap_pair},
                 {"probe_videos", f.probe_videos},
                 {"fractions", {f.train_frac, f.val_frac, f.test_frac}},
                 {"seed", f.seed}};
    write_config_echo(out, echo);
    append_log(out, "gen-data start");
    Timer timer;

    auto spec = default_synthetic_spec(f.classes, f.videos_per_class);
    spec.L = f.L;
    spec.l_t = f.l_t;
    spec.d_t = f.d_t;
    spec.seed = f.seed;
    for (auto& a : spec.classes) a.overlap_group = -1;
    if (f.overlap_pair != "none") {
        const auto comma = f.overlap_pair.find(',');
        if (comma == std::string::npos) {
            throw config_error("--overlap-pair: expected \"a,b\" or \"none\", got \"" +
                               f.overlap_pair + "\"");
        }
        const size_t a = std::stoul(f.overlap_pair.substr(0, comma));
        const size_t b = std::stoul(f.overlap_pair.substr(comma + 1));
        if (a >= spec.classes.size() || b >= spec.classes.size() || a == b) {
            throw config_error("--overlap-pair: indices out of range");
        }
        spec.classes[b] = spec.classes[a];
        spec.classes[b].noise_scale = spec.classes[a].noise_scale * 1.10;
        spec.classes[a].overlap_group = 0;
        spec.classes[b].overlap_group = 0;
    }

    auto ds = synth_generate(spec);
    assign_splits(ds, f.train_frac, f.val_frac, f.test_frac, f.seed);

    write_embedding_file((out / "data.semb").string(), ds);
    ds.manifest.save((out / "manifest.json").string());
    write_labels_csv((out / "labels.csv").string(), ds);
    json sj;
    sj["count"] = ds.size();
    sj["seed"] = f.seed;
    sj["fractions"] = {{"train", f.train_frac}, {"val", f.val_frac}, {"test", f.test_frac}};
    sj["splits"] = json::array();
    for (auto s : ds.splits) sj["splits"].push_back(split_name(s));
    write_text(out / "splits.json", sj.dump() + "\n");

    if (f.probe_videos > 0) {
        auto probe_spec = spec;
        probe_spec.classes.push_back(probe_class_artifact());
        probe_spec.videos_per_class = f.probe_videos;
        auto probe_manifest = synthetic_manifest(f.classes + 1);
        auto probe = synth_generate_class(probe_spec, f.classes, probe_manifest, ds.size());
        Dataset pds;
        pds.manifest = probe_manifest;
        pds.L = f.L;
        pds.l_t = f.l_t;
        pds.d_t = f.d_t;
        pds.videos = std::move(probe);
        pds.splits.assign(pds.videos.size(), Split::TEST);
        write_embedding_file((out / "probe.semb").string(), pds);
        probe_manifest.save((out / "probe_manifest.json").string());
    }

    const auto& names = ds.manifest.classes_at(Level::GEN).names;
    std::vector<size_t> counts(names.size(), 0);
    for (const auto& v : ds.videos) counts[v.label.at(Level::GEN)]++;
    for (size_t c = 0; c < names.size(); c++) {
        std::cout << names[c] << ": " << counts[c] << "\n";
    }
    append_log(out, "gen-data done in " + std::to_string(timer.seconds()) + "s");
    return 0;
}

// ---- pretrain -----------------------------------------------------------------------

struct PretrainFlags {
    std::string data, out;
    size_t epochs = 5;
    size_t batch = 32;
    double lr = 1e-3;
    size_t depth = 5, heads = 4, mlp_hidden = 128;
    double dropout = 0.1;
    double alpha = 0.2, lambda = 0.5;
    uint64_t seed = default_seed();
    std::string precision = "f32";
};

template <typename T>
int run_pretrain(const PretrainFlags& f) {
    const fs::path out(f.out);
    Timer timer;
    auto ds = load_data_dir(f.data);

    ModelConfig mc;
    mc.d_t = ds.d_t;
    mc.l_t = ds.l_t;
    mc.L_max = ds.L;
    mc.n_heads = f.heads;
    mc.depth = f.depth;
    mc.mlp_hidden = f.mlp_hidden;
    mc.dropout_rate = static_cast<float>(f.dropout);
    mc.n_classes = 2;

    TrainConfig tc;
    tc.stage1_epochs = f.epochs;
    tc.lr_stage1 = f.lr;
    tc.batch_size = f.batch;
    tc.alpha = f.alpha;
    tc.lambda = f.lambda;
    tc.seed = f.seed;

    Prng init = Prng::child(f.seed, 0x1217);
    Model<T> model(mc, init);
    auto report = pretrain_stage1(model, ds, tc);

    fs::create_directories(out / "checkpoints");
    save_checkpoint(model, (out / "checkpoints" / "stage1.ckpt").string());
    write_text(out / "report.json", report.to_json().dump(2) + "\n");
    append_log(out, "pretrain done in " + std::to_string(timer.seconds()) + "s (train " +
                        std::to_string(report.wall_clock_seconds) + "s)");
    std::cout << "stage1 complete; final epoch loss "
              << (report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back()) << "\n";
    return 0;
}

int cmd_pretrain(const PretrainFlags& f) {
    json echo = {{"command", "pretrain"}, {"data", f.data},       {"epochs", f.epochs},
                 {"batch", f.batch},      {"lr", f.lr},           {"depth", f.depth},
                 {"heads", f.heads},      {"mlp_hidden", f.mlp_hidden}, {"dropout", f.dropout},
                 {"alpha", f.alpha},      {"lambda", f.lambda},   {"seed", f.seed},
                 {"precision", f.precision}};
    write_config_echo(fs::path(f.out), echo);
    append_log(fs::path(f.out), "pretrain start");
    if (f.precision == "f32") return run_pretrain<float>(f);
    if (f.precision == "f64") return run_pretrain<double>(f);
    throw config_error("--precision must be f32 or f64, got " + f.precision);
}

// ---- adapt --------------------------------------------------------------------------

struct AdaptFlags {
    std::string data, out;
    std::string level = "GEN";
    double fraction = 0.005;
    std::string loss = "ce+hnm";
    std::string from_checkpoint;
    bool scratch = false;
    size_t epochs = 30;
    double lr = 1e-4;
    size_t pk_p = 4, pk_k = 4;
    double alpha = 0.2, lambda = 0.5;
    bool freeze = false;
    size_t depth = 5, heads = 4, mlp_hidden = 128;
    double dropout = 0.1;
    uint64_t seed = default_seed();
    std::string precision = "auto";
};

template <typename T>
int run_adapt(const AdaptFlags& f) {
    const fs::path out(f.out);
    Timer timer;
    auto ds = load_data_dir(f.data);
    const Level level = level_from_string(f.level);
    const LossKind kind = loss_kind_from_string(f.loss);

    TrainConfig tc;
    tc.stage2_epochs = f.epochs;
    tc.lr_stage2 = f.lr;
    tc.pk_p = f.pk_p;
    tc.pk_k = f.pk_k;
    tc.alpha = f.alpha;
    tc.lambda = f.lambda;
    tc.seed = f.seed;
    tc.freeze_backbone = f.freeze;

    std::optional<Model<T>> model;
    if (f.scratch) {
        ModelConfig mc;
        mc.d_t = ds.d_t;
        mc.l_t = ds.l_t;
        mc.L_max = ds.L;
        mc.n_heads = f.heads;
        mc.depth = f.depth;
        mc.mlp_hidden = f.mlp_hidden;
        mc.dropout_rate = static_cast<float>(f.dropout);
        mc.n_classes = 2;
        Prng init = Prng::child(f.seed, 0x1217);
        model.emplace(mc, init);
    } else {
        model.emplace(load_checkpoint<T>(f.from_checkpoint));
    }

    auto report = adapt_stage2(*model, ds, level, f.fraction, tc, kind);
    report.config_echo["strategy"] = f.scratch ? "1-stage" : "2-stage";

    fs::create_directories(out / "checkpoints");
    save_checkpoint(*model, (out / "checkpoints" / "adapted.ckpt").string());
    write_text(out / "report.json", report.to_json().dump(2) + "\n");
    append_log(out, "adapt done in " + std::to_string(timer.seconds()) + "s");
    std::cout << "adapt complete at " << f.level << "; final epoch loss "
              << (report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back()) << "\n";
    return 0;
}

int cmd_adapt(const AdaptFlags& f) {
    if (!f.scratch && f.from_checkpoint.empty()) {
        throw config_error("adapt: need --from-checkpoint or --scratch");
    }
    json echo = {{"command", "adapt"},   {"data", f.data},
                 {"level", f.level},     {"fraction", f.fraction},
                 {"loss", f.loss},       {"from_checkpoint", f.from_checkpoint},
                 {"scratch", f.scratch}, {"epochs", f.epochs},
                 {"lr", f.lr},           {"pk_p", f.pk_p},
                 {"pk_k", f.pk_k},       {"alpha", f.alpha},
                 {"lambda", f.lambda},   {"freeze", f.freeze},
                 {"seed", f.seed},       {"precision", f.precision}};
    write_config_echo(fs::path(f.out), echo);
    append_log(fs::path(f.out), "adapt start");

    std::string precision = f.precision;
    if (precision == "auto") {
        if (f.scratch) {
            precision = "f32";
        } else {
            size_t width = 0;
            peek_checkpoint_config(f.from_checkpoint, &width);
            precision = width == 8 ? "f64" : "f32";
        }
    }
    if (precision == "f32") return run_adapt<float>(f);
    if (precision == "f64") return run_adapt<double>(f);
    throw config_error("--precision must be f32, f64 or auto, got " + f.precision);
}

// ---- eval ---------------------------------------------------------------------------

struct EvalFlags {
    std::string data, out, checkpoint;
    std::string level = "BIN";
    std::string project_from;
    std::string split = "test";
    std::string precision = "auto";
};

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::TRAIN;
    if (s == "val") return Split::VAL;
    if (s == "test") return Split::TEST;
    throw config_error("--split must be train|val|test, got " + s);
}

template <typename T>
int run_eval(const EvalFlags& f) {
    const fs::path out(f.out);
    Timer timer;
    auto ds = load_data_dir(f.data);
    const Level level = level_from_string(f.level);
    auto model = load_checkpoint<T>(f.checkpoint);

    Metrics metrics;
    if (!f.project_from.empty()) {
        if (level_from_string(f.project_from) != Level::GEN) {
            throw config_error("--project-from currently supports GEN only");
        }
        metrics = evaluate_projected(model, ds, level, split_from_string(f.split));
    } else {
        metrics = evaluate(model, ds, level, split_from_string(f.split));
    }
    write_text(out / "metrics.json", metrics.to_json().dump(2) + "\n");
    write_text(out / "confusion.csv", metrics.confusion_csv());
    append_log(out, "eval done in " + std::to_string(timer.seconds()) + "s");
    std::cout << f.level << " accuracy " << metrics.accuracy << " over " << metrics.total
              << " items\n";
    return 0;
}

int cmd_eval(const EvalFlags& f) {
    json echo = {{"command", "eval"},           {"data", f.data},   {"checkpoint", f.checkpoint},
                 {"level", f.level},            {"split", f.split}, {"project_from", f.project_from},
                 {"precision", f.precision}};
    write_config_echo(fs::path(f.out), echo);
    append_log(fs::path(f.out), "eval start");
    std::string precision = f.precision;
    if (precision == "auto") {
        size_t width = 0;
        peek_checkpoint_config(f.checkpoint, &width);
        precision = width == 8 ? "f64" : "f32";
    }
    if (precision == "f32") return run_eval<float>(f);
    if (precision == "f64") return run_eval<double>(f);
    throw config_error("--precision must be f32, f64 or auto, got " + f.precision);
}

// ---- tsig ---------------------------------------------------------------------------

struct TsigFlags {
    std::string data, out, checkpoint;
    std::string classes = "all";
    bool per_head = false;
    std::string probe_unseen;
    std::string probe_data;
    std::string split = "val";
    std::string precision = "auto";
};

template <typename T>
int run_tsig(const TsigFlags& f) {
    const fs::path out(f.out);
    Timer timer;
    auto ds = load_data_dir(f.data);
    auto model = load_checkpoint<T>(f.checkpoint);
    const Split split = split_from_string(f.split);
    fs::create_directories(out / "tsig");

    auto rep = signature_set_report(model, ds, split, HeadMode::averaged());
    json report = rep.to_json();

    std::vector<std::string> wanted;
    if (f.classes == "all") {
        for (const auto& s : rep.signatures) wanted.push_back(s.class_id);
    } else {
        std::stringstream ss(f.classes);
        std::string item;
        while (std::getline(ss, item, ',')) wanted.push_back(item);
    }
    for (const auto& id : wanted) {
        bool found = false;
        for (const auto& s : rep.signatures) {
            if (s.class_id != id) continue;
            found = true;
            export_heatmap(s, (out / "tsig" / sanitize(id)).string());
            if (f.per_head) {
                IndexList videos;
                for (uint32_t i : split_indices(ds, split)) {
                    if (ds.videos[i].label.generator_id == id) videos.push_back(i);
                }
                for (size_t h = 0; h < model.config.n_heads; h++) {
                    auto hs = compute_signature(model, ds, videos, HeadMode::per_head(h), id);
                    export_heatmap(hs, (out / "tsig" / (sanitize(id) + ".h" + std::to_string(h)))
                                           .string());
                }
            }
        }
        if (!found) throw config_error("tsig: class \"" + id + "\" not in the dataset");
    }

    if (!f.probe_unseen.empty()) {
        const std::string probe_dir = f.probe_data.empty() ? f.data : f.probe_data;
        const fs::path pd(probe_dir);
        auto probe_manifest = GeneratorManifest::load((pd / "probe_manifest.json").string());
        auto probe_ds = read_embedding_file((pd / "probe.semb").string(), probe_manifest);
        std::vector<VideoEmbedding> probe_videos;
        for (auto& v : probe_ds.videos) {
            if (v.label.generator_id == f.probe_unseen) probe_videos.push_back(v);
        }
        if (probe_videos.empty()) {
            throw config_error("tsig: probe class \"" + f.probe_unseen + "\" not in probe data");
        }
        auto probe = unseen_signature_probe(model, probe_videos, rep.signatures,
                                            HeadMode::averaged(), f.probe_unseen);
        export_heatmap(probe.signature, (out / "tsig" / sanitize(f.probe_unseen)).string());
        report["probe"] = probe.to_json();
    }

    write_text(out / "tsig" / "report.json", report.dump(2) + "\n");
    append_log(out, "tsig done in " + std::to_string(timer.seconds()) + "s");
    std::cout << "tsig: " << wanted.size() << " class signatures, min intra "
              << rep.min_intra << ", max inter " << rep.max_inter << "\n";
    return 0;
}

int cmd_tsig(const TsigFlags& f) {
    json echo = {{"command", "tsig"},       {"data", f.data},
                 {"checkpoint", f.checkpoint}, {"classes", f.classes},
                 {"per_head", f.per_head},  {"probe_unseen", f.probe_unseen},
                 {"probe_data", f.probe_data}, {"split", f.split},
                 {"precision", f.precision}};
    write_config_echo(fs::path(f.out), echo);
    append_log(fs::path(f.out), "tsig start");
    std::string precision = f.precision;
    if (precision == "auto") {
        size_t width = 0;
        peek_checkpoint_config(f.checkpoint, &width);
        precision = width == 8 ? "f64" : "f32";
    }
    if (precision == "f32") return run_tsig<float>(f);
    if (precision == "f64") return run_tsig<double>(f);
    throw config_error("--precision must be f32, f64 or auto, got " + f.precision);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAGA: source attribution for generated videos over frame-embedding sequences"};
    app.require_subcommand(1);

    GenFlags gen;
    auto* g = app.add_subcommand("gen-data", "Generate a synthetic class-stamped dataset");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--classes", gen.classes, "Number of classes (class 0 is Real)");
    g->add_option("--videos-per-class", gen.videos_per_class, "Videos per class");
    g->add_option("--frames", gen.L, "Frames per video (L)");
    g->add_option("--tokens", gen.l_t, "Tokens per frame (l_t)");
    g->add_option("--dim", gen.d_t, "Feature width (d_t)");
    g->add_option("--overlap-pair", gen.overlap_pair, "\"a,b\" overlap pair or \"none\"");
    g->add_option("--probe-videos", gen.probe_videos,
                  "Also write probe.semb with this many videos of a held-out class");
    g->add_option("--train-frac", gen.train_frac, "Train fraction");
    g->add_option("--val-frac", gen.val_frac, "Validation fraction");
    g->add_option("--test-frac", gen.test_frac, "Test fraction");
    g->add_option("--seed", gen.seed, "RNG seed (default: SAGA_SEED env or 42)");

    PretrainFlags pre;
    auto* p = app.add_subcommand("pretrain", "Stage 1: binary real/fake pretraining");
    p->add_option("--data", pre.data, "gen-data output directory")->required();
    p->add_option("--out", pre.out, "Output directory")->required();
    p->add_option("--epochs", pre.epochs, "Training epochs");
    p->add_option("--batch", pre.batch, "Batch size");
    p->add_option("--lr", pre.lr, "Learning rate");
    p->add_option("--depth", pre.depth, "Temporal blocks minus one");
    p->add_option("--heads", pre.heads, "Attention heads");
    p->add_option("--mlp-hidden", pre.mlp_hidden, "MLP hidden width");
    p->add_option("--dropout", pre.dropout, "Dropout rate");
    p->add_option("--alpha", pre.alpha, "Triplet margin (echoed into reports)");
    p->add_option("--lambda", pre.lambda, "CE weight (echoed into reports)");
    p->add_option("--seed", pre.seed, "RNG seed");
    p->add_option("--precision", pre.precision, "f32 or f64");

    AdaptFlags ad;
    auto* a = app.add_subcommand("adapt", "Stage 2: multi-class adaptation");
    a->add_option("--data", ad.data, "gen-data output directory")->required();
    a->add_option("--out", ad.out, "Output directory")->required();
    a->add_option("--level", ad.level, "BIN|TASK|SD|TEAM|GEN");
    a->add_option("--fraction", ad.fraction, "Labeled fraction per class");
    a->add_option("--loss", ad.loss, "ce|ce+semi|ce+hnm");
    a->add_option("--from-checkpoint", ad.from_checkpoint, "Stage-1 checkpoint");
    a->add_flag("--scratch", ad.scratch, "Train from scratch (1-stage baseline)");
    a->add_option("--epochs", ad.epochs, "Adaptation epochs");
    a->add_option("--lr", ad.lr, "Learning rate");
    a->add_option("--pk-p", ad.pk_p, "Classes per batch");
    a->add_option("--pk-k", ad.pk_k, "Items per class per batch");
    a->add_option("--alpha", ad.alpha, "Triplet margin");
    a->add_option("--lambda", ad.lambda, "CE weight in the combined loss");
    a->add_flag("--freeze", ad.freeze, "Freeze the backbone, train only the head");
    a->add_option("--depth", ad.depth, "(scratch) temporal blocks minus one");
    a->add_option("--heads", ad.heads, "(scratch) attention heads");
    a->add_option("--mlp-hidden", ad.mlp_hidden, "(scratch) MLP hidden width");
    a->add_option("--dropout", ad.dropout, "(scratch) dropout rate");
    a->add_option("--seed", ad.seed, "RNG seed");
    a->add_option("--precision", ad.precision, "f32, f64 or auto");

    EvalFlags ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint at an attribution level");
    e->add_option("--data", ev.data, "gen-data output directory")->required();
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
    e->add_option("--level", ev.level, "BIN|TASK|SD|TEAM|GEN");
    e->add_option("--project-from", ev.project_from,
                  "Project GEN predictions to --level instead of direct evaluation");
    e->add_option("--split", ev.split, "train|val|test");
    e->add_option("--precision", ev.precision, "f32, f64 or auto");

    TsigFlags ts;
    auto* t = app.add_subcommand("tsig", "Temporal attention signatures and heatmaps");
    t->add_option("--data", ts.data, "gen-data output directory")->required();
    t->add_option("--out", ts.out, "Output directory")->required();
    t->add_option("--checkpoint", ts.checkpoint, "Model checkpoint")->required();
    t->add_option("--classes", ts.classes, "\"all\" or comma-separated class ids");
    t->add_flag("--per-head", ts.per_head, "Also write per-head signatures (.h<i> suffix)");
    t->add_option("--probe-unseen", ts.probe_unseen, "Probe a held-out class id");
    t->add_option("--probe-data", ts.probe_data,
                  "Directory containing probe.semb (default: --data)");
    t->add_option("--split", ts.split, "train|val|test");
    t->add_option("--precision", ts.precision, "f32, f64 or auto");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g->parsed()) return cmd_gen_data(gen);
        if (p->parsed()) return cmd_pretrain(pre);
        if (a->parsed()) return cmd_adapt(ad);
        if (e->parsed()) return cmd_eval(ev);
        if (t->parsed()) return cmd_tsig(ts);
    } catch (const numeric_error& err) {
        std::cerr << "numeric failure: " << err.what() << "\n";
        return 4;
    } catch (const io_error& err) {
        std::cerr << "io error: " << err.what() << "\n";
        return 3;
    } catch (const format_error& err) {
        std::cerr << "format error: " << err.what() << "\n";
        return 3;
    } catch (const config_error& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const shape_error& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
