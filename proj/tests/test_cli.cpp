#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "wadapt/keyvalue.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run(const std::string& args) {
    const std::string cmd = std::string(WADAPT_CLI) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return o;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) o.out += buf.data();
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

const std::string kSmallData =
    "--set source_count=300 --set target_count=150 --set target_test_count=120";
const std::string kQuick = "--set pretrain_epochs=2 --set adapt_epochs=1 --set eval_repeats=2";

class Cli : public ::testing::Test {
   protected:
    static void SetUpTestSuite() {
        root_ = fs::temp_directory_path() / "wadapt_cli_test";
        fs::remove_all(root_);
        fs::create_directories(root_);
        const Outcome g = run("gen-data --out " + (root_ / "data").string() + " --seed 5 " + kSmallData);
        ASSERT_EQ(g.code, 0) << g.out;
        const Outcome p = run("pretrain --data " + (root_ / "data").string() + " --out " +
                              (root_ / "pre").string() + " " + kQuick);
        ASSERT_EQ(p.code, 0) << p.out;
    }
    static fs::path path(const std::string& name) { return root_ / name; }
    static std::string data() { return " --data " + path("data").string() + " "; }
    static std::string ckpt() { return " --resume " + path("pre/checkpoint.ckpt").string() + " "; }

    static fs::path root_;
};

fs::path Cli::root_;

const std::regex kSummary(R"(medr=[0-9.]+ r1=[0-9.]+ r5=[0-9.]+ r10=[0-9.]+\n)");

}  // namespace

TEST_F(Cli, GenDataWritesDeclaredFiles) {
    for (const char* f : {"manifest.txt", "source_pairs.tsv", "target_recipes.tsv", "target_test.tsv",
                          "run_manifest.txt"}) {
        EXPECT_TRUE(fs::exists(path("data") / f)) << f;
    }
}

TEST_F(Cli, GenDataIsReproducible) {
    ASSERT_EQ(run("gen-data --out " + path("data2").string() + " --seed 5 " + kSmallData).code, 0);
    for (const char* f : {"manifest.txt", "source_pairs.tsv", "target_recipes.tsv", "target_test.tsv"}) {
        EXPECT_EQ(slurp(path("data") / f), slurp(path("data2") / f)) << f;
    }
}

TEST_F(Cli, AngleOutOfRangeIsConfigError) {
    const Outcome o = run("gen-data --out " + path("bad").string() + " --set shift_angle=2");
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.out.find("shift_angle"), std::string::npos) << o.out;
}

TEST_F(Cli, UnknownKeyAndBadOverride) {
    EXPECT_EQ(run("gen-data --out " + path("bad").string() + " --set no_such_key=1").code, 2);
    EXPECT_EQ(run("gen-data --out " + path("bad").string() + " --set novalue").code, 2);
    std::ofstream(path("bad.cfg")) << "batch_size = many\n";
    EXPECT_EQ(run("pretrain" + data() + "--out " + path("bad2").string() + " --config " +
                  path("bad.cfg").string()).code, 2);
}

TEST_F(Cli, RefusesToClobberWithoutForce) {
    const std::string args = "gen-data --out " + path("data").string() + " --seed 5 " + kSmallData;
    EXPECT_EQ(run(args).code, 2);
    EXPECT_EQ(run(args + " --force").code, 0);
}

TEST_F(Cli, MissingInputs) {
    EXPECT_EQ(run("pretrain --data " + path("nowhere").string() + " --out " + path("m1").string()).code, 3);
    EXPECT_EQ(run("adapt" + data() + "--out " + path("m2").string() + " --resume " +
                  path("missing.ckpt").string()).code, 3);
    EXPECT_EQ(run("adapt" + data() + "--out " + path("m3").string()).code, 3);
    EXPECT_EQ(run("eval" + data() + "--out " + path("m4").string()).code, 3);
}

TEST_F(Cli, PretrainOutputs) {
    const fs::path pre = path("pre");
    for (const char* f : {"checkpoint.ckpt", "training_log.tsv", "metrics.csv", "run_manifest.txt"}) {
        EXPECT_TRUE(fs::exists(pre / f)) << f;
    }
    const wadapt::KeyValues m = wadapt::KeyValues::load(pre / "run_manifest.txt");
    for (const char* k : {"command", "argv", "version", "seed", "started_at", "finished_at",
                          "dataset_hash", "config.batch_size", "config.shift_angle"}) {
        EXPECT_TRUE(m.has(k)) << k;
    }
    EXPECT_EQ(m.get_string("status"), "ok");
    EXPECT_EQ(m.get_string("config.pretrain_epochs"), "2");
}

TEST_F(Cli, EvalSummaryLineFormat) {
    const Outcome src = run("eval" + data() + ckpt() + "--split source --out " + path("ev").string());
    ASSERT_EQ(src.code, 0) << src.out;
    EXPECT_TRUE(std::regex_match(src.out, kSummary)) << src.out;
    EXPECT_EQ(line_count(path("ev/metrics.csv")), 2u);
    const Outcome tgt = run("eval" + data() + ckpt() + "--out " + path("ev2").string());
    EXPECT_TRUE(std::regex_match(tgt.out, kSummary)) << tgt.out;
    EXPECT_EQ(run("eval" + data() + ckpt() + "--split sideways --out " + path("ev3").string()).code, 2);
}

TEST_F(Cli, AdaptWithTrace) {
    const Outcome o = run("adapt" + data() + ckpt() + kQuick + " --trace --variant no_sbs --out " +
                          path("ad").string());
    ASSERT_EQ(o.code, 0) << o.out;
    EXPECT_TRUE(std::regex_match(o.out, kSummary)) << o.out;
    EXPECT_TRUE(fs::exists(path("ad/selection_trace.tsv")));
    EXPECT_NE(slurp(path("ad/metrics.csv")).find(",no_sbs,"), std::string::npos);
    EXPECT_EQ(run("adapt" + data() + ckpt() + "--variant bogus --out " + path("ad2").string()).code, 2);
}

TEST_F(Cli, EvalAcceptsAdaptedCheckpoint) {
    ASSERT_EQ(run("adapt" + data() + ckpt() + kQuick + " --out " + path("ad3").string()).code, 0);
    EXPECT_EQ(run("eval" + data() + " --resume " + path("ad3/checkpoint.ckpt").string() + " --out " +
                  path("ev4").string()).code, 0);
}

TEST_F(Cli, AblateSixVariants) {
    const Outcome o = run("ablate" + data() + kQuick + " --out " + path("abl").string());
    ASSERT_EQ(o.code, 0) << o.out;
    EXPECT_EQ(line_count(path("abl/metrics.csv")), 7u);
    EXPECT_EQ(line_count(path("abl/ablation_table.tsv")), 7u);
}

TEST_F(Cli, PoolSweepTable) {
    const Outcome o = run("ablate" + data() + kQuick + " --pool-sweep --variants proposed --out " +
                          path("sweep").string());
    ASSERT_EQ(o.code, 0) << o.out;
    EXPECT_EQ(line_count(path("sweep/pool_sweep.tsv")), 6u);
    EXPECT_EQ(line_count(path("sweep/metrics.csv")), 6u);
}

TEST_F(Cli, NumericalFailureExitCode) {
    const Outcome o = run("pretrain" + data() + kQuick + " --set learning_rate=1e300 --out " +
                          path("nan").string());
    EXPECT_EQ(o.code, 4) << o.out;
    EXPECT_TRUE(fs::exists(path("nan/last_good.ckpt")));
    EXPECT_NE(o.out.find("last_good.ckpt"), std::string::npos);
}

TEST_F(Cli, SameSeedSameMetrics) {
    ASSERT_EQ(run("adapt" + data() + ckpt() + kQuick + " --out " + path("d1").string()).code, 0);
    ASSERT_EQ(run("adapt" + data() + ckpt() + kQuick + " --out " + path("d2").string()).code, 0);
    EXPECT_EQ(slurp(path("d1/metrics.csv")), slurp(path("d2/metrics.csv")));
}
