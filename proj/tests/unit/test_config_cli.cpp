#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hotguard/config.hpp"

namespace fs = std::filesystem;
using namespace hotguard;

namespace {

int run(const std::string& args, const fs::path& log = "/dev/null") {
    const std::string cmd = std::string(HOTGUARD_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("hotguard_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Small, uncalibrated pipeline so CLI tests finish in seconds.
const char* kSmallConfig = R"({
  "seed": 3,
  "corpus": {"train_clips": 300, "test_clips": 300, "site_probability": 0.15},
  "litho": {"calibrate": false, "sigma_nm": 30, "threshold": 0.23},
  "train": {"max_epochs": 2},
  "levels": [0, 2]
})";

}  // namespace

TEST(Config, DefaultsValidateAndDigestIsStable) {
    const auto a = config_from_json_text("");
    const auto b = config_from_json_text("{}");
    EXPECT_EQ(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
    EXPECT_EQ(a.levels, (std::vector<std::size_t>{0, 3, 12, 50}));
    EXPECT_EQ(a.max_level(), 50u);
}

TEST(Config, OutputDirDoesNotAffectDigest) {
    const auto a = config_from_json_text(R"({"output_dir": "x"})");
    const auto b = config_from_json_text(R"({"output_dir": "y"})");
    EXPECT_EQ(config_digest(a), config_digest(b));
    const auto c = config_from_json_text(R"({"seed": 99})");
    EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(config_from_json_text(R"({"sed": 1})"), ConfigError);
    EXPECT_THROW(config_from_json_text(R"({"corpus": {"clips": 1}})"), ConfigError);
    EXPECT_THROW(config_from_json_text("", {"train.epochs=3"}), ConfigError);
    EXPECT_THROW(config_from_json_text("[1]"), ConfigError);
    EXPECT_THROW(config_from_json_text("{"), ConfigError);
}

TEST(Config, OverridesAreParsedAsJson) {
    const auto c = config_from_json_text("", {"seed=11", "levels=[0,5]", "train.class_weight=4", "output_dir=out"});
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.levels, (std::vector<std::size_t>{0, 5}));
    EXPECT_EQ(*c.train.class_weight, 4.0);
    EXPECT_EQ(c.output_dir, "out");
    EXPECT_THROW(config_from_json_text("", {"seed"}), ConfigError);
}

TEST(Config, LevelsMustIncludeZeroAndAreSorted) {
    EXPECT_THROW(config_from_json_text(R"({"levels": [3, 12]})"), ConfigError);
    EXPECT_EQ(config_from_json_text(R"({"levels": [12, 0, 3, 3]})").levels, (std::vector<std::size_t>{0, 3, 12}));
    EXPECT_THROW(config_from_json_text(R"({"archs": ["C"]})"), ConfigError);
    EXPECT_THROW(config_from_json_text(R"({"litho": {"pixel_nm": 7}})"), ConfigError);
}

TEST(Config, RoundTripsThroughJsonText) {
    const auto a = config_from_json_text(kSmallConfig);
    const auto b = config_from_json_text(config_to_json_text(a));
    EXPECT_EQ(canonical_config(a), canonical_config(b));
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run("--no-such-flag"), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("gen-corpus --set nope=1 -o /tmp"), 1);
    EXPECT_EQ(run("gen-corpus --config /nonexistent.json"), 1);
}

TEST(Cli, MissingPrerequisiteExitsTwo) {
    const auto d = scratch("dep");
    EXPECT_EQ(run("simulate -o " + d.string()), 2);
    EXPECT_EQ(run("train --arch A --level 0 -o " + d.string()), 2);
}

TEST(Cli, TamperedManifestExitsThree) {
    const auto d = scratch("tamper");
    fs::path cfg = d / "small.json";
    std::ofstream(cfg) << kSmallConfig;
    const std::string common = " -c " + cfg.string() + " -o " + d.string();
    ASSERT_EQ(run("gen-corpus" + common), 0);
    ASSERT_EQ(run("calibrate" + common), 0);
    ASSERT_EQ(run("simulate" + common), 0);
    fs::path labels;
    for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.path().filename() == "manifest.jsonl" && e.path().parent_path().filename() == "labels") labels = e.path();
    ASSERT_FALSE(labels.empty());
    auto text = slurp(labels);
    text.erase(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n'));  // drop first record
    std::ofstream(labels, std::ios::trunc) << text;
    EXPECT_EQ(run("poison" + common), 3);
}

TEST(Cli, GenCorpusIsDeterministic) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ASSERT_EQ(run("gen-corpus --seed 7 --count 2000 --test-count 50 -o " + a.string()), 0);
    ASSERT_EQ(run("gen-corpus --seed 7 --count 2000 --test-count 50 -j 2 -o " + b.string()), 0);
    const auto da = *fs::directory_iterator(a), db = *fs::directory_iterator(b);
    EXPECT_EQ(da.path().filename(), db.path().filename());
    const auto ma = slurp(da.path() / "corpus" / "manifest.jsonl");
    EXPECT_FALSE(ma.empty());
    EXPECT_EQ(ma, slurp(db.path() / "corpus" / "manifest.jsonl"));
    EXPECT_EQ(slurp(da.path() / "corpus" / "gds" / "tr001999.gds"), slurp(db.path() / "corpus" / "gds" / "tr001999.gds"));
    EXPECT_EQ(slurp(da.path() / "config.json"), slurp(db.path() / "config.json"));
}

TEST(Cli, DigestMatchesLibrary) {
    const auto d = scratch("digest");
    fs::path cfg = d / "small.json";
    std::ofstream(cfg) << kSmallConfig;
    ASSERT_EQ(run("digest -c " + cfg.string(), d / "out.txt"), 0);
    EXPECT_EQ(slurp(d / "out.txt"), config_digest(config_from_json_text(kSmallConfig)) + "\n");
}

TEST(Cli, SmallSweepWritesDigestedArtifacts) {
    const auto d = scratch("sweep");
    fs::path cfg = d / "small.json";
    std::ofstream(cfg) << kSmallConfig;
    ASSERT_EQ(run("sweep --activations -c " + cfg.string() + " -o " + d.string(), d / "log.txt"), 0) << slurp(d / "log.txt");
    const std::string digest = config_digest(config_from_json_text(kSmallConfig));
    const auto root = d / digest;
    for (const char* f : {"config.json", "corpus/manifest.jsonl", "labels/manifest.jsonl", "poison/manifest.jsonl",
                          "poison/stats.csv", "augment/manifest.jsonl", "augment/yield.csv", "models/A_L0.log.csv",
                          "models/A_L2.selection.json", "reports/sweep.csv", "reports/sweep.txt", "reports/eval_A_L0.csv",
                          "reports/activations_A_L2.csv"}) {
        ASSERT_TRUE(fs::exists(root / f)) << f;
        EXPECT_NE(slurp(root / f).find(digest), std::string::npos) << f;
    }
    for (const char* f : {"features/corpus.hgft", "models/A_L0.hsdm", "models/A_clean.hsdm"}) EXPECT_TRUE(fs::exists(root / f)) << f;
    const auto csv = slurp(root / "reports" / "sweep.csv");
    EXPECT_NE(csv.find("\n0,"), std::string::npos);
    EXPECT_NE(csv.find("\n2,"), std::string::npos);
    EXPECT_NE(slurp(d / "log.txt").find("R-ASR"), std::string::npos);
}
