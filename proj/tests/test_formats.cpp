#include "support/oracles.hpp"

#include <jenn/checkpoint.hpp>
#include <jenn/container.hpp>
#include <jenn/dataset.hpp>
#include <jenn/error.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace {

namespace fs = std::filesystem;
using jenn::Container;
using jenn::ContainerKind;

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <class T>
T get_le(const std::vector<unsigned char>& b, std::size_t offset) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(b[offset + i]) << (8 * i);
    }
    return v;
}

Container sample_container() {
    Container c;
    c.kind = ContainerKind::sensitivity;
    c.manifest = {{"alpha", "1"}, {"name", "three words here"}};
    c.payload = {1.0, -2.5, 1e-300, 3.141592653589793};
    return c;
}

TEST(Container, RoundTripAndLayout) {
    const auto dir = oracle::scratch_dir("container_rt");
    const auto path = dir / "c.jenn";
    const Container c = sample_container();
    jenn::write_container(path, c);
    const Container back = jenn::read_container(path);
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.manifest, c.manifest);
    EXPECT_EQ(back.payload, c.payload);

    const auto bytes = read_bytes(path);
    EXPECT_EQ(std::memcmp(bytes.data(), "JENNBIN\0", 8), 0);
    EXPECT_EQ(get_le<std::uint32_t>(bytes, 8), 1U);
    EXPECT_EQ(get_le<std::uint32_t>(bytes, 12), 2U);
    EXPECT_EQ(get_le<std::uint64_t>(bytes, 16), 64U);
    const auto payload_offset = get_le<std::uint64_t>(bytes, 32);
    EXPECT_EQ(payload_offset % 8, 0U);
    EXPECT_EQ(get_le<std::uint64_t>(bytes, 40), 4U);
    EXPECT_EQ(bytes.size(), payload_offset + 4 * 8);
    double second = 0.0;
    std::memcpy(&second, bytes.data() + payload_offset + 8, 8);
    EXPECT_EQ(second, -2.5);
}

TEST(Container, WritesAreDeterministic) {
    const auto dir = oracle::scratch_dir("container_det");
    jenn::write_container(dir / "a", sample_container());
    jenn::write_container(dir / "b", sample_container());
    EXPECT_EQ(read_bytes(dir / "a"), read_bytes(dir / "b"));
}

class CorruptionTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = oracle::scratch_dir("container_corrupt");
        path_ = dir_ / "c.jenn";
        jenn::write_container(path_, sample_container());
        bytes_ = read_bytes(path_);
    }
    fs::path dir_;
    fs::path path_;
    std::vector<unsigned char> bytes_;
};

TEST_F(CorruptionTest, PayloadByteFlipIsChecksumError) {
    bytes_[bytes_.size() - 3] ^= 0x10;
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::ChecksumError);
}

TEST_F(CorruptionTest, ManifestByteFlipIsChecksumError) {
    bytes_[66] ^= 0x01;
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::ChecksumError);
}

TEST_F(CorruptionTest, HeaderByteFlipIsChecksumError) {
    bytes_[45] ^= 0x01;
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::ChecksumError);
}

TEST_F(CorruptionTest, TruncationDetected) {
    bytes_.resize(bytes_.size() - 8);
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::TruncatedError);
    bytes_.resize(20);
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::TruncatedError);
}

TEST_F(CorruptionTest, TrailingBytesRejected) {
    bytes_.push_back(0);
    write_bytes(path_, bytes_);
    EXPECT_THROW(jenn::read_container(path_), jenn::FormatError);
}

TEST_F(CorruptionTest, BadMagicAndVersion) {
    auto bad = bytes_;
    bad[0] = 'X';
    write_bytes(path_, bad);
    EXPECT_THROW(jenn::read_container(path_), jenn::FormatError);
    bad = bytes_;
    bad[8] = 9;
    write_bytes(path_, bad);
    EXPECT_THROW(jenn::read_container(path_), jenn::VersionError);
}

TEST(Container, MissingFileIsAnError) {
    EXPECT_THROW(jenn::read_container("/nonexistent/dir/file.jenn"), jenn::Error);
}

TEST(KeyValues, ParseAndFormat) {
    const auto entries = jenn::parse_key_values("# comment\n\n a = 1 \nname = two words\n");
    ASSERT_EQ(entries.size(), 2U);
    EXPECT_EQ(entries[0], (std::pair<std::string, std::string>{"a", "1"}));
    EXPECT_EQ(entries[1].second, "two words");
    EXPECT_EQ(jenn::parse_key_values(jenn::format_key_values(entries)), entries);
    EXPECT_THROW(jenn::parse_key_values("no equals sign\n"), jenn::ValidationError);
}

TEST(KeyValues, FormatRealRoundTrips) {
    for (const double v : {0.0125, 8.0, 1.0 / 3.0, -1e-300, 6.02214076e23}) {
        EXPECT_EQ(std::stod(jenn::format_real(v)), v);
    }
    EXPECT_EQ(jenn::format_real(0.0125), "0.0125");
}

// ---------------------------------------------------------------------------

TEST(Dataset, DefaultGenerationYieldsEightyThousandPairs) {
    EXPECT_EQ(jenn::steps_for(jenn::kDefaultSampleTime, 0.0125), 80000);
    EXPECT_EQ(jenn::steps_for(10.0, 0.0125), 800);
    EXPECT_THROW(jenn::steps_for(10.001, 0.0125), jenn::ConfigError);
    EXPECT_THROW(jenn::steps_for(0.0, 0.0125), jenn::ConfigError);
}

TEST(Dataset, PairsAreExactRk4Steps) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 10.0, 5.0, 3);
    ASSERT_EQ(traj.size(), 400);
    EXPECT_EQ(traj.spinup_steps, 800);
    EXPECT_EQ(traj.sample_steps, 400);
    for (Eigen::Index k = 0; k < traj.size(); ++k) {
        EXPECT_EQ(traj.targets.col(k), jenn::lorenz96::step_rk4(cfg, traj.inputs.col(k)));
    }
    for (Eigen::Index k = 0; k + 1 < traj.size(); ++k) {
        EXPECT_EQ(traj.inputs.col(k + 1), traj.targets.col(k));
    }
}

TEST(Dataset, AttractorTimeMeanInRange) {
    const jenn::Lorenz96Config cfg;
    const auto traj = jenn::generate_trajectory(cfg, 100.0, 100.0, 0);
    const double mean = traj.inputs.mean();
    EXPECT_GE(mean, 1.5);
    EXPECT_LE(mean, 3.5);
}

TEST(Dataset, RegenerationIsBitIdentical) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto a = jenn::generate_trajectory(cfg, 5.0, 2.0, 9);
    const auto b = jenn::generate_trajectory(cfg, 5.0, 2.0, 9);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.targets, b.targets);
}

TEST(Sensitivity, DenseProportionalMagnitudes) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 10.0, 5.0, 1);
    const auto sens = jenn::generate_sensitivity_set(traj, 64, jenn::PerturbationMode::dense_proportional, 0.01, 4);
    ASSERT_EQ(sens.size(), 64);
    for (Eigen::Index k = 0; k < sens.size(); ++k) {
        const jenn::Vector x = sens.x.col(k);
        for (Eigen::Index i = 0; i < cfg.n; ++i) {
            EXPECT_DOUBLE_EQ(std::abs(sens.dx(i, k)), 0.01 * std::abs(x[i]));
            EXPECT_DOUBLE_EQ(std::abs(sens.yhat(i, k)), 0.01 * std::abs(x[i]));
        }
        EXPECT_NEAR(sens.dx.col(k).norm() / x.norm(), 0.01, 1e-15);
        EXPECT_EQ(sens.dy_true.col(k), jenn::lorenz96::step_tlm(cfg, x, sens.dx.col(k)));
        EXPECT_EQ(sens.xhat_true.col(k), jenn::lorenz96::step_adj(cfg, x, sens.yhat.col(k)));
        const double lhs = sens.dy_true.col(k).dot(sens.yhat.col(k));
        const double rhs = sens.dx.col(k).dot(sens.xhat_true.col(k));
        EXPECT_LT(std::abs(lhs - rhs), 1e-12 * sens.dy_true.col(k).norm() * sens.yhat.col(k).norm());
    }
    // Signs are random, not all equal.
    EXPECT_GT((sens.dx.array() * sens.x.array() > 0).count(), 0);
    EXPECT_GT((sens.dx.array() * sens.x.array() < 0).count(), 0);
}

TEST(Sensitivity, SparseSiteHasOneNonzero) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 10.0, 5.0, 1);
    const auto sens = jenn::generate_sensitivity_set(traj, 32, jenn::PerturbationMode::sparse_site, 0.01, 5);
    for (Eigen::Index k = 0; k < sens.size(); ++k) {
        EXPECT_EQ((sens.dx.col(k).array() != 0.0).count(), 1);
        EXPECT_EQ((sens.yhat.col(k).array() != 0.0).count(), 1);
    }
}

TEST(Sensitivity, StatesAreDistinctTrajectoryStates) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 10.0, 1.0, 1);
    const auto sens = jenn::generate_sensitivity_set(traj, traj.size(), jenn::PerturbationMode::dense_proportional,
                                                     0.01, 6);
    std::vector<int> hits(static_cast<std::size_t>(traj.size()), 0);
    for (Eigen::Index k = 0; k < sens.size(); ++k) {
        for (Eigen::Index j = 0; j < traj.size(); ++j) {
            if (sens.x.col(k) == traj.inputs.col(j)) {
                ++hits[static_cast<std::size_t>(j)];
            }
        }
    }
    for (const int h : hits) {
        EXPECT_EQ(h, 1);
    }
    EXPECT_THROW(jenn::generate_sensitivity_set(traj, traj.size() + 1, jenn::PerturbationMode::dense_proportional,
                                                0.01, 6),
                 jenn::ConfigError);
}

TEST(Dataset, HoldoutIsTheFinalTenPercent) {
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 5.0, 5.0, 1);
    const auto [train, holdout] = jenn::split_holdout(traj, 0.1);
    EXPECT_EQ(train.size(), 360);
    EXPECT_EQ(holdout.size(), 40);
    EXPECT_EQ(holdout.inputs.col(0), traj.inputs.col(360));
    EXPECT_EQ(train.inputs.col(359), traj.inputs.col(359));
}

TEST(Dataset, SaveLoadBitExact) {
    const auto dir = oracle::scratch_dir("dataset_rt");
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    const auto traj = jenn::generate_trajectory(cfg, 5.0, 2.0, 77);
    const auto sens = jenn::generate_sensitivity_set(traj, 20, jenn::PerturbationMode::sparse_site, 0.02, 8);
    jenn::save_dataset(dir / "t.jenn", traj);
    jenn::save_dataset(dir / "s.jenn", sens);
    const auto t2 = jenn::load_trajectory(dir / "t.jenn");
    EXPECT_EQ(t2.config, traj.config);
    EXPECT_EQ(t2.inputs, traj.inputs);
    EXPECT_EQ(t2.targets, traj.targets);
    EXPECT_EQ(t2.seed, traj.seed);
    EXPECT_EQ(t2.spinup_steps, traj.spinup_steps);
    EXPECT_EQ(t2.sample_steps, traj.sample_steps);
    const auto s2 = jenn::load_sensitivity(dir / "s.jenn");
    EXPECT_EQ(s2.mode, sens.mode);
    EXPECT_EQ(s2.rel_scale, sens.rel_scale);
    EXPECT_EQ(s2.seed, sens.seed);
    EXPECT_EQ(s2.x, sens.x);
    EXPECT_EQ(s2.dx, sens.dx);
    EXPECT_EQ(s2.dy_true, sens.dy_true);
    EXPECT_EQ(s2.yhat, sens.yhat);
    EXPECT_EQ(s2.xhat_true, sens.xhat_true);
    EXPECT_THROW(jenn::load_sensitivity(dir / "t.jenn"), jenn::ValidationError);
}

TEST(Dataset, CountMismatchIsValidationError) {
    const auto dir = oracle::scratch_dir("dataset_count");
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    jenn::save_dataset(dir / "t.jenn", jenn::generate_trajectory(cfg, 5.0, 1.0, 1));
    Container c = jenn::read_container(dir / "t.jenn");
    for (auto& [k, v] : c.manifest) {
        if (k == "pairs") {
            v = "81";
        }
    }
    jenn::write_container(dir / "bad.jenn", c);
    EXPECT_THROW(jenn::load_trajectory(dir / "bad.jenn"), jenn::ValidationError);
}

TEST(Dataset, SchemaVersionMismatch) {
    const auto dir = oracle::scratch_dir("dataset_schema");
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    jenn::save_dataset(dir / "t.jenn", jenn::generate_trajectory(cfg, 5.0, 1.0, 1));
    Container c = jenn::read_container(dir / "t.jenn");
    c.manifest.front().second = "99";
    jenn::write_container(dir / "bad.jenn", c);
    EXPECT_THROW(jenn::load_trajectory(dir / "bad.jenn"), jenn::VersionError);
}

TEST(Dataset, CorruptedPayloadDetected) {
    const auto dir = oracle::scratch_dir("dataset_crc");
    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    jenn::save_dataset(dir / "t.jenn", jenn::generate_trajectory(cfg, 5.0, 1.0, 1));
    auto bytes = read_bytes(dir / "t.jenn");
    bytes[bytes.size() / 2 + 100] ^= 0x40;
    write_bytes(dir / "t.jenn", bytes);
    EXPECT_THROW(jenn::load_trajectory(dir / "t.jenn"), jenn::ChecksumError);
}

// ---------------------------------------------------------------------------

TEST(Checkpoint, RoundTripAndStub) {
    const auto dir = oracle::scratch_dir("checkpoint_rt");
    const auto arch = jenn::MlpArchitecture::state_map(8, {16, 12});
    const auto params = jenn::init_params(arch, 5);
    jenn::save_checkpoint(dir / "p.ckpt", params, {5, "phase2", {1.0, 0.5, 0.25}});
    const auto back = jenn::load_checkpoint(dir / "p.ckpt");
    ASSERT_FALSE(back.is_physics_stub());
    EXPECT_EQ(back.params(), params);
    EXPECT_EQ(back.meta.seed, 5U);
    EXPECT_EQ(back.meta.phase, "phase2");
    EXPECT_EQ(back.meta.weights, (jenn::LossWeights{1.0, 0.5, 0.25}));

    const jenn::Lorenz96Config cfg{8, 8.0, 0.0125};
    jenn::save_physics_stub(dir / "stub.ckpt", cfg);
    const auto stub = jenn::load_checkpoint(dir / "stub.ckpt");
    ASSERT_TRUE(stub.is_physics_stub());
    EXPECT_THROW(stub.params(), jenn::ConfigError);
    const auto emu = jenn::make_emulator(stub);
    const jenn::Vector x = oracle::attractor_state(cfg, 1, 200);
    EXPECT_EQ(emu->predict(x), jenn::lorenz96::step_rk4(cfg, x));
}

TEST(Checkpoint, CorruptedWeightsDetected) {
    const auto dir = oracle::scratch_dir("checkpoint_crc");
    const auto arch = jenn::MlpArchitecture::state_map(8, {16});
    jenn::save_checkpoint(dir / "p.ckpt", jenn::init_params(arch, 1), {});
    auto bytes = read_bytes(dir / "p.ckpt");
    bytes[bytes.size() - 17] ^= 0x08;
    write_bytes(dir / "p.ckpt", bytes);
    EXPECT_THROW(jenn::load_checkpoint(dir / "p.ckpt"), jenn::ChecksumError);
}

TEST(Checkpoint, ParameterCountMismatch) {
    const auto dir = oracle::scratch_dir("checkpoint_count");
    const auto arch = jenn::MlpArchitecture::state_map(8, {16});
    jenn::save_checkpoint(dir / "p.ckpt", jenn::init_params(arch, 1), {});
    Container c = jenn::read_container(dir / "p.ckpt");
    for (auto& [k, v] : c.manifest) {
        if (k == "hidden_dims") {
            v = "17";
        }
    }
    jenn::write_container(dir / "bad.ckpt", c);
    EXPECT_THROW(jenn::load_checkpoint(dir / "bad.ckpt"), jenn::ValidationError);
}

TEST(LossWeights, Validation) {
    EXPECT_NO_THROW((jenn::LossWeights{1, 0, 0}.validate()));
    EXPECT_THROW((jenn::LossWeights{0, 0, 0}.validate()), jenn::ConfigError);
    EXPECT_THROW((jenn::LossWeights{1, -1, 0}.validate()), jenn::ConfigError);
    EXPECT_THROW((jenn::LossWeights{1, std::nan(""), 0}.validate()), jenn::ConfigError);
}

} // namespace
