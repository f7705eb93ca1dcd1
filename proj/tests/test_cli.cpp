#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kBin = SAGA_CLI_BIN;

int run(const std::string& args) {
    const std::string cmd = std::string(kBin) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / "saga_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), {});
}

std::string data_args(const fs::path& dir) {
    return "gen-data --out " + dir.string() +
           " --classes 4 --videos-per-class 24 --frames 6 --tokens 4 --dim 16 "
           "--overlap-pair none --probe-videos 6 --seed 3 "
           "--train-frac 0.5 --val-frac 0.25 --test-frac 0.25";
}

}  // namespace

TEST_CASE("gen-data writes the contracted files and is idempotent") {
    auto dir = fresh_dir("gen");
    REQUIRE(run(data_args(dir)) == 0);
    for (const char* f : {"config.json", "data.semb", "manifest.json", "splits.json",
                          "labels.csv", "probe.semb", "probe_manifest.json", "run.log"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    auto first = slurp(dir / "data.semb");
    auto first_cfg = slurp(dir / "config.json");

    auto dir2 = fresh_dir("gen2");
    REQUIRE(run(data_args(dir2)) == 0);
    CHECK(slurp(dir2 / "data.semb") == first);
    CHECK(slurp(dir2 / "manifest.json") == slurp(dir / "manifest.json"));
    CHECK(slurp(dir2 / "splits.json") == slurp(dir / "splits.json"));
}

TEST_CASE("flag errors exit 2, io errors exit 3") {
    auto dir = fresh_dir("err");
    CHECK(run("gen-data --out " + dir.string() + " --dim 4") == 2);  // dims violate invariants
    CHECK(run("gen-data") == 2);                                     // missing required --out
    CHECK(run("nosuchcommand") == 2);
    CHECK(run("pretrain --data /nonexistent --out " + dir.string() + " --epochs 0") == 3);
    CHECK(run("eval --data /nonexistent --out " + dir.string() +
              " --checkpoint /nonexistent.ckpt") == 3);
}

TEST_CASE("full pipeline: pretrain, adapt, eval, tsig") {
    auto data = fresh_dir("pipe_data");
    REQUIRE(run(data_args(data)) == 0);

    auto s1 = fresh_dir("pipe_s1");
    REQUIRE(run("pretrain --data " + data.string() + " --out " + s1.string() +
                " --epochs 1 --batch 12 --depth 2 --heads 2 --mlp-hidden 16 --seed 3") == 0);
    CHECK(fs::exists(s1 / "checkpoints" / "stage1.ckpt"));
    CHECK(fs::exists(s1 / "report.json"));
    CHECK(slurp(s1 / "report.json").find("wall") == std::string::npos);

    auto s2 = fresh_dir("pipe_s2");
    REQUIRE(run("adapt --data " + data.string() + " --out " + s2.string() +
                " --level GEN --fraction 0.5 --loss ce+hnm --from-checkpoint " +
                (s1 / "checkpoints" / "stage1.ckpt").string() +
                " --epochs 1 --pk-p 2 --pk-k 3 --seed 3") == 0);
    CHECK(fs::exists(s2 / "checkpoints" / "adapted.ckpt"));
    auto report = slurp(s2 / "report.json");
    CHECK(report.find("subset_per_class") != std::string::npos);

    auto ev = fresh_dir("pipe_eval");
    REQUIRE(run("eval --data " + data.string() + " --out " + ev.string() + " --checkpoint " +
                (s2 / "checkpoints" / "adapted.ckpt").string() + " --level GEN") == 0);
    CHECK(fs::exists(ev / "metrics.json"));
    CHECK(fs::exists(ev / "confusion.csv"));

    // projected evaluation
    auto evp = fresh_dir("pipe_evalp");
    REQUIRE(run("eval --data " + data.string() + " --out " + evp.string() + " --checkpoint " +
                (s2 / "checkpoints" / "adapted.ckpt").string() +
                " --level TASK --project-from GEN") == 0);

    // mismatched head/level exits 2
    auto evbad = fresh_dir("pipe_evalbad");
    CHECK(run("eval --data " + data.string() + " --out " + evbad.string() + " --checkpoint " +
              (s2 / "checkpoints" / "adapted.ckpt").string() + " --level BIN") == 2);

    auto tg = fresh_dir("pipe_tsig");
    REQUIRE(run("tsig --data " + data.string() + " --out " + tg.string() + " --checkpoint " +
                (s2 / "checkpoints" / "adapted.ckpt").string() +
                " --probe-unseen synth4 --probe-data " + data.string() + " --split val") == 0);
    CHECK(fs::exists(tg / "tsig" / "report.json"));
    for (const char* cls : {"Real", "synth1", "synth2", "synth3"}) {
        CHECK(fs::exists(tg / "tsig" / (std::string(cls) + ".pgm")));
        CHECK(fs::exists(tg / "tsig" / (std::string(cls) + ".csv")));
    }
    CHECK(slurp(tg / "tsig" / "report.json").find("probe") != std::string::npos);

    // per-head naming contract
    auto tg2 = fresh_dir("pipe_tsig2");
    REQUIRE(run("tsig --data " + data.string() + " --out " + tg2.string() + " --checkpoint " +
                (s2 / "checkpoints" / "adapted.ckpt").string() +
                " --classes synth1 --per-head --split val") == 0);
    CHECK(fs::exists(tg2 / "tsig" / "synth1.h0.pgm"));
    CHECK(fs::exists(tg2 / "tsig" / "synth1.h1.pgm"));
}

TEST_CASE("adapt without checkpoint or scratch exits 2; scratch works") {
    auto data = fresh_dir("sc_data");
    REQUIRE(run(data_args(data)) == 0);
    auto out = fresh_dir("sc_out");
    CHECK(run("adapt --data " + data.string() + " --out " + out.string() + " --level GEN") == 2);

    auto out2 = fresh_dir("sc_out2");
    CHECK(run("adapt --data " + data.string() + " --out " + out2.string() +
              " --level GEN --fraction 1.0 --loss ce --scratch --epochs 1 --pk-p 2 --pk-k 3 "
              "--depth 2 --heads 2 --mlp-hidden 16 --seed 3") == 0);
    CHECK(fs::exists(out2 / "checkpoints" / "adapted.ckpt"));
}

TEST_CASE("reruns with identical flags are byte-identical except run.log") {
    auto data = fresh_dir("idem_data");
    REQUIRE(run(data_args(data)) == 0);

    auto a = fresh_dir("idem_a");
    auto b = fresh_dir("idem_b");
    const std::string train_flags =
        " --epochs 1 --batch 12 --depth 2 --heads 2 --mlp-hidden 16 --seed 9";
    REQUIRE(run("pretrain --data " + data.string() + " --out " + a.string() + train_flags) == 0);
    REQUIRE(run("pretrain --data " + data.string() + " --out " + b.string() + train_flags) == 0);
    CHECK(slurp(a / "checkpoints" / "stage1.ckpt") == slurp(b / "checkpoints" / "stage1.ckpt"));
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "config.json") == slurp(b / "config.json"));
}

TEST_CASE("SAGA_SEED environment fallback is honored") {
    auto a = fresh_dir("env_a");
    auto b = fresh_dir("env_b");
    const std::string flags =
        " --classes 2 --videos-per-class 6 --frames 4 --tokens 2 --dim 8 --overlap-pair none";
    const std::string base = std::string(kBin) + " gen-data ";
    REQUIRE(std::system(("SAGA_SEED=123 " + base + "--out " + a.string() + flags +
                         " >/dev/null 2>&1").c_str()) == 0);
    REQUIRE(std::system((base + "--out " + b.string() + flags + " --seed 123 >/dev/null 2>&1")
                            .c_str()) == 0);
    CHECK(slurp(a / "data.semb") == slurp(b / "data.semb"));
}
