#pragma once

#include "jenn/emulator.hpp"
#include "jenn/lorenz96.hpp"
#include "jenn/mlp.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <variant>

namespace jenn {

/// Relative weights of the forecast, tangent linear and adjoint loss terms.
struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;

    /// Non-negative, finite, and at least one strictly positive.
    void validate() const;

    bool operator==(const LossWeights&) const = default;
};

struct CheckpointMeta {
    Seed seed = 0;
    std::string phase = "phase1"; ///< "phase1", "phase2" or "stub"
    LossWeights weights{1.0, 0.0, 0.0};
};

/// A checkpoint holds either trained MLP parameters or, for testing, a
/// reference to the physics core itself.
struct Checkpoint {
    std::variant<MlpParams, Lorenz96Config> model;
    CheckpointMeta meta;

    bool is_physics_stub() const { return std::holds_alternative<Lorenz96Config>(model); }
    const MlpParams& params() const;
};

inline constexpr int kCheckpointSchemaVersion = 1;

/// Manifest: schema_version, model = mlp, input_dim, hidden_dims (comma
/// separated), output_dim, activation, parameter_count, seed, phase, alpha,
/// beta, gamma. Payload: the flat parameter vector in canonical order.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params, const CheckpointMeta& meta);

/// Manifest with model = lorenz96 and the physics config; empty payload.
void save_physics_stub(const std::filesystem::path& path, const Lorenz96Config& cfg);

Checkpoint load_checkpoint(const std::filesystem::path& path);

std::unique_ptr<Emulator> make_emulator(const Checkpoint& checkpoint);

} // namespace jenn
