// Compares the serial reference kernels against the OpenMP versions on the
// shapes the model actually runs, and times a full batched forward pass.
// Run with OMP_NUM_THREADS=N to vary the thread count.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "saga/kernels.hpp"
#include "saga/model.hpp"
#include "saga/prng.hpp"

using namespace saga;

namespace {

constexpr int kRuns = 5;

double min_seconds(const std::function<void()>& fn) {
    double best = 1e18;
    for (int r = 0; r < kRuns; r++) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        best = std::min(best, s);
    }
    return best;
}

void bench_matmul(size_t m, size_t k, size_t n) {
    Prng rng(1);
    std::vector<float> a(m * k), b(k * n), c(m * n), cref(m * n);
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));

    const double serial = min_seconds([&] { kernels::matmul_ref(a.data(), b.data(), cref.data(), m, k, n); });
    const double parallel = min_seconds([&] { kernels::matmul(a.data(), b.data(), c.data(), m, k, n); });
    const double gflops = 2.0 * static_cast<double>(m * k * n) / parallel / 1e9;
    const bool exact = c == cref;
    std::printf("matmul %4zux%3zux%3zu  serial %8.3f ms  omp %8.3f ms  speedup %5.2fx  %6.2f GFLOP/s  bit-exact: %s\n",
                m, k, n, serial * 1e3, parallel * 1e3, serial / parallel, gflops,
                exact ? "yes" : "NO");
}

void bench_forward() {
    ModelConfig cfg;  // the shipped defaults: d_t 64, l_t 16, L 8, 4 heads, 6 temporal blocks
    Prng rng(7);
    Model<float> model(cfg, rng);

    Dataset ds;
    ds.manifest = synthetic_manifest(2);
    ds.L = cfg.L_max;
    ds.l_t = cfg.l_t;
    ds.d_t = cfg.d_t;
    const size_t batch = 32;
    Prng vr(9);
    for (size_t i = 0; i < batch; i++) {
        VideoEmbedding v;
        v.frames = Tensor<float>({ds.L, ds.l_t, ds.d_t});
        for (auto& x : v.frames.data) x = static_cast<float>(vr.uniform(-1, 1));
        v.video_id = "bench";
        v.label = make_label(ds.manifest, "Real");
        ds.videos.push_back(std::move(v));
    }
    ds.splits.assign(batch, Split::TRAIN);
    auto items = all_indices(ds);

    const double fwd = min_seconds([&] {
        Graph<float> g;
        forward_batch(model, g, assemble_tokens<float>(cfg, ds, items), batch, ds.L);
    });
    model.mode = Mode::TRAIN;
    model.set_trainable(true, true);
    const double fwdbwd = min_seconds([&] {
        Graph<float> g;
        auto out = forward_batch(model, g, assemble_tokens<float>(cfg, ds, items), batch, ds.L);
        g.backward(g.mean_all(out.logits));
    });
    std::printf("forward      batch %zu: %8.3f ms  (%.2f ms/video)\n", batch, fwd * 1e3,
                fwd * 1e3 / static_cast<double>(batch));
    std::printf("forward+back batch %zu: %8.3f ms  (%.2f ms/video)\n", batch, fwdbwd * 1e3,
                fwdbwd * 1e3 / static_cast<double>(batch));
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    bench_matmul(4096, 64, 64);    // spatial projections at batch 32
    bench_matmul(4096, 64, 128);   // spatial MLP in
    bench_matmul(4096, 128, 64);   // spatial MLP out
    bench_matmul(256, 64, 64);     // temporal projections
    bench_matmul(64, 64, 64);      // small case below the parallel threshold
    bench_forward();
    return 0;
}
