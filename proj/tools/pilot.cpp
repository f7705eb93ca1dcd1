// Temporary pilot driver for tuning acceptance run configs. Not built by
// CMake; compile by hand when needed.

#include <cstdio>
#include <string>

#include "saga/embeddings.hpp"
#include "saga/training.hpp"
#include "saga/tsig.hpp"

using namespace saga;

namespace {

struct Args {
    size_t videos = 2000;
    size_t stage1_epochs = 2;
    size_t stage2_epochs = 30;
    double lr2 = 1e-4;
    size_t pk_p = 4, pk_k = 4;
    uint64_t seed = 1;
    bool run_tsig = true;
    bool run_ablation = true;
    bool run_fullsup = true;
    size_t fullsup_epochs = 2;
    size_t mlp = 128;
    size_t heads = 4;
    bool fullsup_hnm = false;
};

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void print_confusion(const Metrics& m) {
    std::printf("    per-class acc:");
    for (double a : m.per_class_accuracy) std::printf(" %.3f", a);
    std::printf("\n");
    for (size_t r = 0; r < m.confusion.size(); r++) {
        std::printf("     ");
        for (size_t c = 0; c < m.confusion.size(); c++)
            std::printf(" %4llu", static_cast<unsigned long long>(m.confusion[r][c]));
        std::printf("\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    Args a;
    for (int i = 1; i < argc; i++) {
        std::string s = argv[i];
        auto next = [&] { return std::stod(argv[++i]); };
        if (s == "--videos") a.videos = static_cast<size_t>(next());
        else if (s == "--e1") a.stage1_epochs = static_cast<size_t>(next());
        else if (s == "--e2") a.stage2_epochs = static_cast<size_t>(next());
        else if (s == "--lr2") a.lr2 = next();
        else if (s == "--p") a.pk_p = static_cast<size_t>(next());
        else if (s == "--k") a.pk_k = static_cast<size_t>(next());
        else if (s == "--seed") a.seed = static_cast<uint64_t>(next());
        else if (s == "--no-tsig") a.run_tsig = false;
        else if (s == "--no-ablation") a.run_ablation = false;
        else if (s == "--no-fullsup") a.run_fullsup = false;
        else if (s == "--fe") a.fullsup_epochs = static_cast<size_t>(next());
        else if (s == "--mlp") a.mlp = static_cast<size_t>(next());
        else if (s == "--heads") a.heads = static_cast<size_t>(next());
        else if (s == "--fhnm") a.fullsup_hnm = true;
    }

    double t0 = now();
    auto spec = default_synthetic_spec(6, a.videos);
    spec.seed = 42;
    auto ds = synth_generate(spec);
    assign_splits(ds, 0.8, 0.1, 0.1, 42);
    std::printf("[%6.1fs] dataset: %zu videos\n", now() - t0, ds.size());

    ModelConfig mc;  // defaults d64/l16/L8, 4 heads, depth5, mlp128
    mc.mlp_hidden = a.mlp;
    mc.n_heads = a.heads;
    TrainConfig tc;
    tc.stage1_epochs = a.stage1_epochs;
    tc.stage2_epochs = a.stage2_epochs;
    tc.lr_stage2 = a.lr2;
    tc.pk_p = a.pk_p;
    tc.pk_k = a.pk_k;
    tc.seed = a.seed;

    Prng init = Prng::child(a.seed, 0x1217);
    Model<float> model(mc, init);
    auto rep = pretrain_stage1(model, ds, tc);
    std::printf("[%6.1fs] stage1 %zu epochs, losses:", now() - t0, tc.stage1_epochs);
    for (double l : rep.epoch_losses) std::printf(" %.4f", l);
    auto bin = evaluate(model, ds, Level::BIN);
    std::printf("  | BIN test acc %.4f (%.1fs train)\n", bin.accuracy, rep.wall_clock_seconds);

    // fraction hitting 10 items/class on the train split
    const double frac = 10.0 / (0.8 * static_cast<double>(a.videos));

    if (a.run_ablation) {
        auto two_stage = model;
        auto r2 = adapt_stage2(two_stage, ds, Level::GEN, frac, tc, LossKind::CE_HNM);
        auto m2 = evaluate(two_stage, ds, Level::GEN);
        std::printf("[%6.1fs] 2-stage ce+hnm GEN acc %.4f (last loss %.4f)\n", now() - t0,
                    m2.accuracy, r2.epoch_losses.back());
        print_confusion(m2);

        Prng init1 = Prng::child(a.seed, 0x1217);
        Model<float> one_hnm(mc, init1);
        adapt_stage2(one_hnm, ds, Level::GEN, frac, tc, LossKind::CE_HNM);
        auto m1h = evaluate(one_hnm, ds, Level::GEN);
        std::printf("[%6.1fs] 1-stage ce+hnm GEN acc %.4f\n", now() - t0, m1h.accuracy);

        Prng init2 = Prng::child(a.seed, 0x1217);
        Model<float> one_ce(mc, init2);
        adapt_stage2(one_ce, ds, Level::GEN, frac, tc, LossKind::CE_ONLY);
        auto m1c = evaluate(one_ce, ds, Level::GEN);
        std::printf("[%6.1fs] 1-stage ce      GEN acc %.4f\n", now() - t0, m1c.accuracy);
        print_confusion(m1c);

        // hierarchy check on the flagship model
        auto bin_proj = evaluate_projected(two_stage, ds, Level::BIN);
        auto task_proj = evaluate_projected(two_stage, ds, Level::TASK);
        std::printf("[%6.1fs] projected BIN %.4f TASK %.4f (GEN %.4f)\n", now() - t0,
                    bin_proj.accuracy, task_proj.accuracy, m2.accuracy);

        if (a.run_tsig) {
            auto sig_rep = signature_set_report(two_stage, ds, Split::VAL, HeadMode::averaged());
            std::printf("[%6.1fs] tsig: min intra %.6f max inter %.6f | split-half:", now() - t0,
                        sig_rep.min_intra, sig_rep.max_inter);
            for (double s : sig_rep.split_half) std::printf(" %.6f", s);
            std::printf("\n  pair cosines:\n");
            for (size_t i = 0; i < sig_rep.pair_cosine.size(); i++) {
                std::printf("   ");
                for (size_t j = 0; j < sig_rep.pair_cosine.size(); j++)
                    std::printf(" %.4f", sig_rep.pair_cosine[i][j]);
                std::printf("\n");
            }
            auto probe_spec = spec;
            probe_spec.classes.push_back(probe_class_artifact());
            probe_spec.videos_per_class = 200;
            auto probe_videos = synth_generate_class(probe_spec, 6, synthetic_manifest(7),
                                                     ds.size());
            auto probe = unseen_signature_probe(two_stage, probe_videos, sig_rep.signatures,
                                                HeadMode::averaged(), "synth6");
            std::printf("[%6.1fs] probe max sim %.6f (nearest %s) vs min intra %.6f\n",
                        now() - t0, probe.max_similarity, probe.nearest.c_str(),
                        sig_rep.min_intra);
        }
    }

    if (a.run_fullsup) {
        TrainConfig fc = tc;
        fc.stage2_epochs = a.fullsup_epochs;
        fc.pk_k = 16;
        Model<float> full = model;  // from the stage-1 checkpoint
        adapt_stage2(full, ds, Level::GEN, 1.0, fc,
                     a.fullsup_hnm ? LossKind::CE_HNM : LossKind::CE_ONLY);
        auto mf = evaluate(full, ds, Level::GEN);
        std::printf("[%6.1fs] fullsup ce (%zu ep) GEN acc %.4f\n", now() - t0, a.fullsup_epochs,
                    mf.accuracy);
        print_confusion(mf);
    }
    return 0;
}
