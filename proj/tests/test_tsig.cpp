#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "saga/tsig.hpp"

using namespace saga;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.d_t = 16;
    c.l_t = 4;
    c.L_max = 6;
    c.n_heads = 2;
    c.depth = 3;  // 4 temporal blocks, source block index 2
    c.mlp_hidden = 16;
    c.n_classes = 2;
    return c;
}

Dataset tiny_dataset(size_t classes = 3, size_t per = 20, uint64_t seed = 5) {
    auto spec = default_synthetic_spec(classes, per);
    spec.L = 6;
    spec.l_t = 4;
    spec.d_t = 16;
    spec.seed = seed;
    auto ds = synth_generate(spec);
    assign_splits(ds, 0.5, 0.25, 0.25, seed + 1);
    return ds;
}

std::filesystem::path tmp_dir() {
    auto p = std::filesystem::temp_directory_path() / "saga_tsig_test";
    std::filesystem::create_directories(p);
    return p;
}

TSig make_sig(std::vector<double> m, size_t L) {
    TSig s;
    s.matrix = std::move(m);
    s.L = L;
    s.n_videos = 1;
    return s;
}

}  // namespace

TEST_CASE("extract_attention: penultimate block, row-stochastic, deterministic") {
    auto ds = tiny_dataset();
    Prng rng(3);
    Model<float> model(tiny_config(), rng);
    CHECK(tsig_source_block(model.config) == 2);

    auto a = extract_attention(model, ds.videos[0]);
    REQUIRE(a.shape == Shape{2, 6, 6});
    for (size_t h = 0; h < 2; h++) {
        for (size_t i = 0; i < 6; i++) {
            float sum = 0;
            for (size_t j = 0; j < 6; j++) sum += a.data[(h * 6 + i) * 6 + j];
            CHECK(std::abs(sum - 1.0f) < 1e-5f);
        }
    }
    auto b = extract_attention(model, ds.videos[0]);
    CHECK(a.data == b.data);

    // the default configuration: depth 5 -> six blocks -> source index 4
    ModelConfig def;
    CHECK(tsig_source_block(def) == 4);
}

TEST_CASE("averaged attention rows are row-stochastic before normalization") {
    auto ds = tiny_dataset();
    Prng rng(4);
    Model<float> model(tiny_config(), rng);
    // mean over heads and videos of row-stochastic matrices stays row-stochastic;
    // verify through per-video captures
    IndexList vids = {0, 1, 2};
    std::vector<double> mean(36, 0.0);
    for (auto i : vids) {
        auto a = extract_attention(model, ds.videos[i]);
        for (size_t e = 0; e < 36; e++) {
            mean[e] += 0.5 * (a.data[e] + a.data[36 + e]) / 3.0;
        }
    }
    for (size_t r = 0; r < 6; r++) {
        double sum = 0;
        for (size_t c = 0; c < 6; c++) sum += mean[r * 6 + c];
        CHECK(std::abs(sum - 1.0) < 1e-5);
    }
}

TEST_CASE("compute_signature: identical videos give minmax of one matrix") {
    auto ds = tiny_dataset();
    Prng rng(5);
    Model<float> model(tiny_config(), rng);

    Dataset dup;
    dup.manifest = synthetic_manifest(2);
    dup.L = ds.L;
    dup.l_t = ds.l_t;
    dup.d_t = ds.d_t;
    for (int i = 0; i < 4; i++) dup.videos.push_back(ds.videos[0]);
    dup.splits.assign(4, Split::TEST);

    auto one = compute_signature(model, dup, {0}, HeadMode::averaged(), "x");
    auto four = compute_signature(model, dup, {0, 1, 2, 3}, HeadMode::averaged(), "x");
    for (size_t i = 0; i < one.matrix.size(); i++) {
        CHECK(four.matrix[i] == doctest::Approx(one.matrix[i]).epsilon(1e-9));
    }
    CHECK(four.n_videos == 4);
    // normalized range is exactly [0,1] for non-degenerate input
    double lo = 1e9, hi = -1e9;
    for (double v : one.matrix) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("degenerate constant matrix yields zeros with the flag set") {
    // constructed directly: normalization of a constant matrix has zero range
    TSig sig;
    sig.L = 4;
    sig.matrix.assign(16, 0.0);
    sig.degenerate = true;
    CHECK(sig.degenerate);

    // distance conventions for degenerate signatures
    auto zero = make_sig(std::vector<double>(16, 0.0), 4);
    auto other = make_sig(std::vector<double>(16, 0.5), 4);
    CHECK(signature_distance(zero, zero).cosine == 1.0);
    CHECK(signature_distance(zero, other).cosine == 0.0);
}

TEST_CASE("normalization idempotence on non-degenerate signatures") {
    auto ds = tiny_dataset();
    Prng rng(6);
    Model<float> model(tiny_config(), rng);
    auto sig = compute_signature(model, ds, {0, 1, 2, 3}, HeadMode::averaged(), "c0");
    // re-normalizing the already-normalized matrix changes nothing
    double lo = 1e9, hi = -1e9;
    for (double v : sig.matrix) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(1.0));
    for (double v : sig.matrix) {
        CHECK((v - lo) / (hi - lo) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("signature distances: self, orthogonal, shape errors") {
    auto s = make_sig({1, 0, 0, 1}, 2);
    auto self = signature_distance(s, s);
    CHECK(self.cosine == doctest::Approx(1.0));
    CHECK(self.frobenius == doctest::Approx(0.0));

    auto a = make_sig({1, 0, 0, 0}, 2);
    auto b = make_sig({0, 1, 0, 0}, 2);
    CHECK(signature_distance(a, b).cosine == doctest::Approx(0.0));

    auto wide = make_sig(std::vector<double>(9, 0.1), 3);
    CHECK_THROWS_AS(signature_distance(a, wide), shape_error);
}

TEST_CASE("per-head mode differs from averaged and respects bounds") {
    auto ds = tiny_dataset();
    Prng rng(7);
    Model<float> model(tiny_config(), rng);
    IndexList vids = {0, 1, 2, 3, 4};
    auto avg = compute_signature(model, ds, vids, HeadMode::averaged(), "c");
    auto h0 = compute_signature(model, ds, vids, HeadMode::per_head(0), "c");
    auto h1 = compute_signature(model, ds, vids, HeadMode::per_head(1), "c");
    CHECK(h0.matrix != h1.matrix);
    CHECK(avg.head == -1);
    CHECK(h0.head == 0);
    CHECK_THROWS_AS(compute_signature(model, ds, vids, HeadMode::per_head(2), "c"),
                    config_error);
}

TEST_CASE("export_heatmap writes the exact PGM header and a re-readable CSV") {
    auto dir = tmp_dir();
    TSig sig = make_sig({0.0, 0.25, 0.5, 1.0}, 2);
    auto base = (dir / "sig").string();
    export_heatmap(sig, base);

    std::ifstream pgm(base + ".pgm", std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(pgm)), {});
    const std::string header = "P5\n2 2\n255\n";
    REQUIRE(content.rfind(header, 0) == 0);
    REQUIRE(content.size() == header.size() + 4);
    CHECK(static_cast<uint8_t>(content[header.size() + 0]) == 0);
    CHECK(static_cast<uint8_t>(content[header.size() + 1]) == 64);
    CHECK(static_cast<uint8_t>(content[header.size() + 2]) == 128);
    CHECK(static_cast<uint8_t>(content[header.size() + 3]) == 255);

    std::ifstream csv(base + ".csv");
    std::vector<double> back;
    std::string line;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) back.push_back(std::stod(cell));
    }
    REQUIRE(back.size() == 4);
    for (size_t i = 0; i < 4; i++) CHECK(back[i] == doctest::Approx(sig.matrix[i]).epsilon(1e-6));

    // all-zero signature: zero payload bytes, zero CSV
    TSig zero = make_sig(std::vector<double>(4, 0.0), 2);
    export_heatmap(zero, (dir / "zero").string());
    std::ifstream zpgm((dir / "zero.pgm").string(), std::ios::binary);
    std::string zc((std::istreambuf_iterator<char>(zpgm)), {});
    for (size_t i = header.size(); i < zc.size(); i++) CHECK(zc[i] == 0);
}

TEST_CASE("signature_set_report: stability and probe plumbing") {
    auto ds = tiny_dataset(3, 20);
    Prng rng(8);
    Model<float> model(tiny_config(), rng);
    auto rep = signature_set_report(model, ds, Split::TRAIN, HeadMode::averaged());
    REQUIRE(rep.signatures.size() == 3);
    for (size_t c = 0; c < 3; c++) {
        CHECK(rep.pair_cosine[c][c] == doctest::Approx(1.0));
        CHECK(rep.split_half[c] >= -1.0);
        CHECK(rep.split_half[c] <= 1.0 + 1e-12);
    }
    auto j = rep.to_json();
    CHECK(j["classes"].size() == 3);
    CHECK(j.contains("min_intra_cosine"));

    // probe: single video gives a valid signature with n_videos = 1
    std::vector<VideoEmbedding> probe = {ds.videos[0]};
    auto pr = unseen_signature_probe(model, probe, rep.signatures, HeadMode::averaged(), "probe");
    CHECK(pr.signature.n_videos == 1);
    CHECK(pr.similarity.size() == 3);
    CHECK(pr.max_similarity <= 1.0 + 1e-12);
    CHECK(!pr.nearest.empty());

    // sanity: probing with a trained class lands nearest to itself
    IndexList c0;
    for (uint32_t i : split_indices(ds, Split::TRAIN)) {
        if (ds.videos[i].label.at(Level::GEN) == 0) c0.push_back(i);
    }
    std::vector<VideoEmbedding> c0_videos;
    for (auto i : c0) c0_videos.push_back(ds.videos[i]);
    auto sanity = unseen_signature_probe(model, c0_videos, rep.signatures, HeadMode::averaged(),
                                         "sanity");
    CHECK(sanity.nearest == rep.signatures[0].class_id);
}

TEST_CASE("mixed frame counts are rejected") {
    auto ds = tiny_dataset();
    Prng rng(9);
    Model<float> model(tiny_config(), rng);
    std::vector<VideoEmbedding> mixed;
    mixed.push_back(ds.videos[0]);
    VideoEmbedding shorter;
    shorter.frames = Tensor<float>({4, 4, 16});
    mixed.push_back(shorter);
    CHECK_THROWS_AS(compute_signature(model, mixed, HeadMode::averaged(), "m"), shape_error);
}
