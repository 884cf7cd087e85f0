#include "support/oracles.hpp"

#include "cli.hpp"
#include "run_config.hpp"

#include <jenn/checkpoint.hpp>
#include <jenn/container.hpp>
#include <jenn/dataset.hpp>
#include <jenn/error.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using jenn::cli::RunConfig;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"jenn"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) {
        argv.push_back(s.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = jenn::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

// Small dataset shared by several tests: n = 8, 800 pairs.
const fs::path& small_data_dir() {
    static const fs::path dir = [] {
        const auto d = oracle::scratch_dir("cli_data");
        const auto r = run_cli({"gen-data", "--n", "8", "--spinup-time", "20", "--sample-time", "10",
                                "--sensitivity-count", "64", "--out", d.string()});
        if (r.code != 0) {
            throw std::runtime_error("gen-data failed: " + r.err);
        }
        return d;
    }();
    return dir;
}

std::string small_traj() { return (small_data_dir() / "trajectory.jenn").string(); }

TEST(RunConfig, TextRoundTrip) {
    RunConfig cfg;
    cfg.experiment.physics = {12, 10.0, 0.01};
    cfg.experiment.hidden_dims = {32, 16, 8};
    cfg.experiment.weights = {1.0, 0.25, 0.125};
    cfg.experiment.mode = jenn::PerturbationMode::sparse_site;
    cfg.experiment.rel_scale = 0.03;
    cfg.experiment.phase1.max_iters = 17;
    cfg.experiment.seed = 12345678901234ULL;
    cfg.data = "a/b.jenn";
    cfg.out = "out dir";
    const RunConfig back = jenn::cli::run_config_from_text(jenn::cli::to_text(cfg));
    EXPECT_EQ(jenn::cli::to_text(back), jenn::cli::to_text(cfg));
    EXPECT_EQ(back.experiment.physics, cfg.experiment.physics);
    EXPECT_EQ(back.experiment.hidden_dims, cfg.experiment.hidden_dims);
    EXPECT_EQ(back.experiment.weights, cfg.experiment.weights);
    EXPECT_EQ(back.experiment.seed, cfg.experiment.seed);
    EXPECT_EQ(back.out, "out dir");
}

TEST(RunConfig, RejectsBadInput) {
    RunConfig cfg;
    EXPECT_THROW(jenn::cli::apply_setting(cfg, "nope", "1"), jenn::ConfigError);
    EXPECT_THROW(jenn::cli::apply_setting(cfg, "n", "eight"), jenn::ConfigError);
    EXPECT_THROW(jenn::cli::apply_setting(cfg, "dt", "0.1x"), jenn::ConfigError);
    EXPECT_THROW(jenn::cli::apply_setting(cfg, "hidden_dims", "32,,8"), jenn::ConfigError);
    EXPECT_THROW(jenn::cli::apply_setting(cfg, "perturbation_mode", "everywhere"), jenn::ConfigError);
    EXPECT_THROW(jenn::cli::run_config_from_text("n = 8\nn = 9\n"), jenn::ConfigError);
    cfg.data = "x/../same";
    cfg.out = "same";
    EXPECT_THROW(cfg.validate(), jenn::ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(run_cli({"gen-data", "--bogus"}).code, 2);
    EXPECT_EQ(run_cli({"eval", "--data", small_traj()}).code, 2); // --nn missing
    EXPECT_EQ(run_cli({"--help"}).code, 0);
    const auto r = run_cli({"gen-data", "--n", "2", "--out", oracle::scratch_dir("cli_bad_n").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("configuration error"), std::string::npos);
}

TEST(Cli, MissingOutputDirectoryIsUsageError) {
    const char* saved = std::getenv(jenn::cli::kOutputDirEnv);
    const std::string saved_value = saved != nullptr ? saved : "";
    unsetenv(jenn::cli::kOutputDirEnv);
    EXPECT_EQ(run_cli({"gen-data", "--n", "8", "--sample-time", "1"}).code, 2);

    const auto env_dir = oracle::scratch_dir("cli_env_out");
    setenv(jenn::cli::kOutputDirEnv, env_dir.string().c_str(), 1);
    EXPECT_EQ(run_cli({"gen-data", "--n", "8", "--spinup-time", "1", "--sample-time", "1",
                       "--sensitivity-count", "4"})
                  .code,
              0);
    EXPECT_TRUE(fs::exists(env_dir / "trajectory.jenn"));
    if (saved != nullptr) {
        setenv(jenn::cli::kOutputDirEnv, saved_value.c_str(), 1);
    } else {
        unsetenv(jenn::cli::kOutputDirEnv);
    }
}

TEST(Cli, GenDataWritesExpectedPairCount) {
    const auto traj = jenn::load_trajectory(small_traj());
    EXPECT_EQ(traj.size(), 800);
    EXPECT_EQ(traj.config, (jenn::Lorenz96Config{8, 8.0, 0.0125}));
    const auto sens = jenn::load_sensitivity(small_data_dir() / "sensitivity.jenn");
    EXPECT_EQ(sens.size(), 64);
}

TEST(Cli, GenDataIsByteDeterministic) {
    const auto dir = oracle::scratch_dir("cli_det");
    ASSERT_EQ(run_cli({"gen-data", "--n", "8", "--spinup-time", "20", "--sample-time", "10", "--sensitivity-count",
                       "64", "--out", dir.string()})
                  .code,
              0);
    EXPECT_EQ(slurp(dir / "trajectory.jenn"), slurp(small_data_dir() / "trajectory.jenn"));
    EXPECT_EQ(slurp(dir / "sensitivity.jenn"), slurp(small_data_dir() / "sensitivity.jenn"));
}

TEST(Cli, FlagsOverrideConfigFile) {
    const auto dir = oracle::scratch_dir("cli_precedence");
    spit(dir / "run.cfg", "n = 6\nsample_time = 2\nspinup_time = 1\nsensitivity_count = 4\nout = " +
                              (dir / "from_file").string() + "\n");
    ASSERT_EQ(run_cli({"gen-data", "--config", (dir / "run.cfg").string(), "--n", "9"}).code, 0);
    const auto traj = jenn::load_trajectory(dir / "from_file" / "trajectory.jenn");
    EXPECT_EQ(traj.config.n, 9);
    EXPECT_EQ(traj.size(), 160);
    EXPECT_EQ(run_cli({"gen-data", "--config", (dir / "missing.cfg").string()}).code, 2);
    spit(dir / "bad.cfg", "unknown_key = 1\n");
    EXPECT_EQ(run_cli({"gen-data", "--config", (dir / "bad.cfg").string()}).code, 2);
}

TEST(Cli, VerifyTladPasses) {
    const auto r = run_cli({"verify-tlad", "--n", "8", "--probes", "20"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("physics adjoint identity"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, StubEvaluatesToZero) {
    const auto dir = oracle::scratch_dir("cli_stub");
    ASSERT_EQ(run_cli({"make-stub", "--n", "8", "--out", (dir / "stub.ckpt").string()}).code, 0);
    const auto r = run_cli({"eval", "--data", small_traj(), "--nn", (dir / "stub.ckpt").string(), "--report",
                            (dir / "report.txt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("nn.forecast_rmse = 0\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("nn.tlm_rmse = 0\n"), std::string::npos);
    EXPECT_NE(r.out.find("nn.adj_rmse = 0\n"), std::string::npos);
    EXPECT_NE(r.out.find("nn.jacobian_frob_rmse = 0\n"), std::string::npos);
    EXPECT_EQ(slurp(dir / "report.txt"), r.out);
}

class TrainedCli : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = oracle::scratch_dir("cli_train");
        const auto r = run_cli({"train", "--data", small_traj(), "--out", dir_.string(), "--hidden", "12",
                                "--subset-size", "300", "--sensitivity-count", "64", "--phase1-iters", "15",
                                "--phase2-iters", "8", "--seed", "3"});
        ASSERT_EQ(r.code, 0) << r.err;
        first_report_ = slurp(dir_ / "report.txt");
    }
    static fs::path dir_;
    static std::string first_report_;
};

fs::path TrainedCli::dir_;
std::string TrainedCli::first_report_;

TEST_F(TrainedCli, WritesArtifacts) {
    for (const char* name : {"phase1.ckpt", "phase2.ckpt", "report.txt", "run_config.txt"}) {
        EXPECT_TRUE(fs::exists(dir_ / name)) << name;
    }
    EXPECT_NE(first_report_.find("[metrics]"), std::string::npos);
    const auto ckpt = jenn::load_checkpoint(dir_ / "phase2.ckpt");
    EXPECT_EQ(ckpt.meta.phase, "phase2");
    EXPECT_EQ(ckpt.params().architecture().hidden_dims, std::vector<int>{12});
}

TEST_F(TrainedCli, RerunIsBitIdentical) {
    const auto dir2 = oracle::scratch_dir("cli_train_again");
    const auto r = run_cli({"train", "--config", (dir_ / "run_config.txt").string(), "--out", dir2.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir2 / "phase1.ckpt"), slurp(dir_ / "phase1.ckpt"));
    EXPECT_EQ(slurp(dir2 / "phase2.ckpt"), slurp(dir_ / "phase2.ckpt"));
    EXPECT_EQ(slurp(dir2 / "report.txt"), first_report_);
}

TEST_F(TrainedCli, PhaseTwoFromCheckpointMatchesCombinedRun) {
    const auto dir2 = oracle::scratch_dir("cli_train_p2");
    const auto r = run_cli({"train", "--phase", "2", "--config", (dir_ / "run_config.txt").string(),
                            "--phase1-checkpoint", (dir_ / "phase1.ckpt").string(), "--out", dir2.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir2 / "phase2.ckpt"), slurp(dir_ / "phase2.ckpt"));
}

TEST_F(TrainedCli, PhaseTwoWithoutCheckpointIsUsageError) {
    const auto r = run_cli({"train", "--phase", "2", "--data", small_traj(), "--out",
                            oracle::scratch_dir("cli_p2_missing").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(run_cli({"train", "--phase", "3", "--data", small_traj(), "--out", dir_.string()}).code, 2);
}

TEST_F(TrainedCli, CorruptedCheckpointFailsWithChecksumError) {
    const auto bad = oracle::scratch_dir("cli_corrupt") / "bad.ckpt";
    std::string bytes = slurp(dir_ / "phase1.ckpt");
    bytes[bytes.size() - 5] = static_cast<char>(bytes[bytes.size() - 5] ^ 0x20);
    spit(bad, bytes);
    const auto r = run_cli({"eval", "--data", small_traj(), "--nn", bad.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("checksum"), std::string::npos) << r.err;
}

TEST_F(TrainedCli, EvalComparesBothNetworks) {
    const auto r = run_cli({"eval", "--data", small_traj(), "--nn", (dir_ / "phase1.ckpt").string(), "--jenn",
                            (dir_ / "phase2.ckpt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("jenn.tlm_rmse"), std::string::npos);
    EXPECT_NE(r.out.find("jenn/nn"), std::string::npos);
}

TEST_F(TrainedCli, VerifyTladChecksEmulator) {
    const auto r = run_cli({"verify-tlad", "--n", "8", "--probes", "10", "--checkpoint",
                            (dir_ / "phase2.ckpt").string()});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("emulator transpose identity"), std::string::npos);
}

TEST_F(TrainedCli, ExportFiguresWritesCsvAndSvg) {
    const auto out = oracle::scratch_dir("cli_figs");
    const auto r = run_cli({"export-figures", "--data", small_traj(), "--nn", (dir_ / "phase1.ckpt").string(),
                            "--jenn", (dir_ / "phase2.ckpt").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* name : {"fig2_forecast.csv", "fig3_tlm.csv", "fig4_adj.csv", "fig5_jacobian.csv", "summary.csv",
                             "fig2_forecast.svg", "fig3_tlm.svg", "fig4_adj.svg", "fig5_jacobian.svg",
                             "aggregate.txt"}) {
        EXPECT_TRUE(fs::exists(out / name)) << name;
    }
    std::istringstream lines(slurp(out / "fig3_tlm.csv"));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
        ++count;
    }
    EXPECT_EQ(count, 9);
    const auto stats = jenn::parse_key_values(slurp(out / "aggregate.txt"));
    EXPECT_EQ(stats.front(), (std::pair<std::string, std::string>{"probes", "80"}));
    EXPECT_EQ(run_cli({"export-figures", "--data", small_traj(), "--nn", (dir_ / "phase1.ckpt").string(), "--jenn",
                       (dir_ / "phase2.ckpt").string(), "--out", out.string(), "--format", "png"})
                  .code,
              2);
}

} // namespace
