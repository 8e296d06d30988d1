#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mqe/error.hpp"
#include "mqe/pipeline.hpp"

using namespace mqe;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mqe_pipeline_test";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with stdout/stderr captured to `log`; returns the exit code.
int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MQE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
    static void TearDownTestSuite() { fs::remove_all(kWork); }
};

const char* kSmallRun =
    "source = sbm\n"
    "sbm-n = 90\n"
    "sbm-dim = 12\n"
    "noise-kind = normal\n"
    "epochs = 20\n"
    "dim-f = 4\n"
    "dim-h = 8\n"
    "hops = 3\n"
    "probe-runs = 2\n"
    "probe-epochs = 50\n";

}  // namespace

TEST(Config, ParsesAndRejects) {
    const auto v = parse_config_text("# c\nsource = sbm\n\nout= x \n");
    EXPECT_EQ(v.at("source"), "sbm");
    EXPECT_EQ(v.at("out"), "x");
    EXPECT_THROW(parse_config_text("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("seed 1\n"), ConfigError);
}

TEST(Config, MissingRequiredKeyNamed) {
    try {
        ExperimentConfig::from_values({{"source", "sbm"}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("out"), std::string::npos) << e.what();
    }
}

TEST(Config, MalformedValuesRejected) {
    EXPECT_THROW(ExperimentConfig::from_values({{"source", "sbm"}, {"out", "x"}, {"epochs", "ten"}}), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_values({{"source", "sbm"}, {"out", "x"}, {"ablation", "no-foo"}}),
                 ConfigError);
    EXPECT_THROW(ExperimentConfig::from_values({{"source", "web"}, {"out", "x"}}), ConfigError);
}

TEST(Config, ValuesRoundTrip) {
    const auto cfg = ExperimentConfig::from_values(
        {{"source", "sbm"}, {"out", "o"}, {"lr", "0.003"}, {"ablation", "no-mh"}, {"noise-kind", "uniform"}});
    const auto values = cfg.to_values();
    EXPECT_EQ(ExperimentConfig::from_values(values).to_values(), values);
    EXPECT_EQ(values.at("ablation"), "no-mh");
    EXPECT_EQ(values.at("lr"), "0.003");
    for (const auto& key : config_keys()) EXPECT_TRUE(values.contains(key.name)) << key.name;
}

TEST(Config, AblationLossOptions) {
    EXPECT_EQ(loss_options(Ablation::no_mh, LogSigmaTerm::per_dimension, 8).hops, (std::vector<std::size_t>{8}));
    EXPECT_EQ(loss_options(Ablation::no_reg, LogSigmaTerm::per_dimension, 8).log_sigma, LogSigmaTerm::none);
    EXPECT_TRUE(loss_options(Ablation::none, LogSigmaTerm::single, 8).hops.empty());
}

TEST(Seeds, SubstreamsDistinctAndStable) {
    const auto a = seed_plan(0);
    const auto b = seed_plan(0);
    EXPECT_EQ(a.noise, b.noise);
    EXPECT_NE(a.noise, a.init);
    EXPECT_NE(a.init, a.probe);
    EXPECT_NE(seed_plan(1).init, a.init);
}

TEST(Prepare, NoAugUsesNormalizedGraph) {
    const std::vector<EdgePair> pairs{{0, 1}, {1, 2}, {2, 3}};
    const auto raw = from_edge_list(4, pairs);
    FeatureSet x(4, 2);
    x(0, 0) = x(1, 0) = 1.0;
    x(2, 1) = x(3, 1) = 1.0;
    const auto plain = prepare_targets(raw, x, 2, KnnConfig{1}, false);
    EXPECT_FALSE(plain.augmented);
    EXPECT_EQ(plain.propagation, plain.normalized);
    const auto aug = prepare_targets(raw, x, 2, KnnConfig{1}, true);
    EXPECT_TRUE(aug.augmented);
    EXPECT_NE(aug.propagation, aug.normalized);
    EXPECT_EQ(aug.targets.layer_count(), 3u);
    EXPECT_EQ(aug.targets.layer(0), x);
}

TEST_F(Cli, RunNoAugManifestAndDeterminism) {
    const auto cfg = kWork / "small.cfg";
    std::ofstream(cfg) << kSmallRun;
    const auto a = kWork / "run_a";
    const auto b = kWork / "run_b";
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + a.string() + " --ablation no-aug", kWork / "a.log"), 0)
        << slurp(kWork / "a.log");
    const std::string manifest = slurp(a / "manifest.cfg");
    EXPECT_NE(manifest.find("ablation = no-aug"), std::string::npos);
    EXPECT_NE(manifest.find("augmentation = skipped"), std::string::npos);

    // Re-run from the manifest alone into a different directory.
    ASSERT_EQ(cli("run --config " + (a / "manifest.cfg").string() + " --out " + b.string(), kWork / "b.log"), 0)
        << slurp(kWork / "b.log");
    for (const char* f : {"embeddings.bin", "model.bin", "report.txt", "loss.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / "embeddings.bin").empty());
}

TEST_F(Cli, RunAugmentedByDefault) {
    const auto cfg = kWork / "aug.cfg";
    std::ofstream(cfg) << kSmallRun;
    const auto out = kWork / "run_aug";
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + out.string(), kWork / "aug.log"), 0);
    EXPECT_NE(slurp(out / "manifest.cfg").find("augmentation = applied"), std::string::npos);
    const std::string report = slurp(out / "report.txt");
    EXPECT_NE(report.find("noise.spearman:"), std::string::npos) << report;
    EXPECT_EQ(slurp(out / "loss.csv").rfind("epoch,loss\n", 0), 0u);
}

TEST_F(Cli, ExitCodes) {
    const auto missing = kWork / "missing.cfg";
    std::ofstream(missing) << "source = sbm\n";
    EXPECT_EQ(cli("run --config " + missing.string(), kWork / "m.log"), 2);
    EXPECT_NE(slurp(kWork / "m.log").find("'out'"), std::string::npos);

    const auto bad_key = kWork / "badkey.cfg";
    std::ofstream(bad_key) << "source = sbm\nout = x\nwidth = 3\n";
    EXPECT_EQ(cli("run --config " + bad_key.string(), kWork / "k.log"), 2);

    EXPECT_EQ(cli("probe --data " + (kWork / "nope").string() + " --embeddings x.bin", kWork / "p.log"), 3);
    EXPECT_NE(slurp(kWork / "p.log").find("error [data]"), std::string::npos) << slurp(kWork / "p.log");
}

TEST_F(Cli, SubcommandsCompose) {
    const auto clean = kWork / "clean";
    const auto noisy = kWork / "noisy";
    const auto trained = kWork / "trained";
    ASSERT_EQ(cli("gen-sbm --out " + clean.string() + " --sbm-n 90 --sbm-dim 12 --seed 3", kWork / "g.log"), 0)
        << slurp(kWork / "g.log");
    ASSERT_EQ(cli("inject-noise --kind normal --alpha 0.5 --beta 1 --seed 4 --in " + clean.string() + " --out " +
                      noisy.string(),
                  kWork / "n.log"),
              0)
        << slurp(kWork / "n.log");
    for (const char* f : {"features.txt", "clean_features.txt", "noise_mask.txt", "intensity.txt"})
        EXPECT_TRUE(fs::exists(noisy / f)) << f;

    ASSERT_EQ(cli("hop-sweep --data " + noisy.string() + " --hops 8 --runs 2 --out " + (kWork / "sweep.csv").string(),
                  kWork / "h.log"),
              0)
        << slurp(kWork / "h.log");
    const std::string sweep = slurp(kWork / "sweep.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 10);  // header + hops 0..8

    ASSERT_EQ(cli("train --data " + noisy.string() + " --out " + trained.string() +
                      " --epochs 20 --dim-f 4 --dim-h 8 --hops 2",
                  kWork / "t.log"),
              0)
        << slurp(kWork / "t.log");
    ASSERT_EQ(cli("probe --data " + noisy.string() + " --embeddings " + (trained / "embeddings.bin").string() +
                      " --runs 5",
                  kWork / "pr.log"),
              0);
    EXPECT_NE(slurp(kWork / "pr.log").find("runs: 5"), std::string::npos) << slurp(kWork / "pr.log");

    ASSERT_EQ(cli("estimate --model " + (trained / "model.bin").string() + " --data " + noisy.string(),
                  kWork / "e.log"),
              0);
    EXPECT_NE(slurp(kWork / "e.log").find("noise.spearman:"), std::string::npos) << slurp(kWork / "e.log");
}
