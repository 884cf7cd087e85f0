#include "jenn/checkpoint.hpp"

#include "jenn/container.hpp"
#include "jenn/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace jenn {

void LossWeights::validate() const {
    for (const double w : {alpha, beta, gamma}) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ConfigError(fmt::format("LossWeights: weights must be finite and non-negative (alpha={} beta={} gamma={})",
                                          alpha, beta, gamma));
        }
    }
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0) {
        throw ConfigError("LossWeights: at least one weight must be positive");
    }
}

const MlpParams& Checkpoint::params() const {
    if (const auto* p = std::get_if<MlpParams>(&model)) {
        return *p;
    }
    throw ConfigError("checkpoint holds the physics stub, not network parameters");
}

namespace {

std::string join(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i == 0 ? "" : ",") + std::to_string(values[i]);
    }
    return out;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params, const CheckpointMeta& meta) {
    const auto& arch = params.architecture();
    Container c;
    c.kind = ContainerKind::checkpoint;
    c.manifest = {
        {"schema_version", std::to_string(kCheckpointSchemaVersion)},
        {"model", "mlp"},
        {"input_dim", std::to_string(arch.input_dim)},
        {"hidden_dims", join(arch.hidden_dims)},
        {"output_dim", std::to_string(arch.output_dim)},
        {"activation", std::string(to_string(arch.hidden_activation))},
        {"parameter_count", std::to_string(arch.parameter_count())},
        {"seed", std::to_string(meta.seed)},
        {"phase", meta.phase},
        {"alpha", format_real(meta.weights.alpha)},
        {"beta", format_real(meta.weights.beta)},
        {"gamma", format_real(meta.weights.gamma)},
        {"layout", "per layer: weight row-major, then bias"},
    };
    const Vector flat = params.flatten();
    c.payload.assign(flat.data(), flat.data() + flat.size());
    write_container(path, c);
}

void save_physics_stub(const std::filesystem::path& path, const Lorenz96Config& cfg) {
    cfg.validate();
    Container c;
    c.kind = ContainerKind::checkpoint;
    c.manifest = {
        {"schema_version", std::to_string(kCheckpointSchemaVersion)},
        {"model", "lorenz96"},
        {"n", std::to_string(cfg.n)},
        {"forcing", format_real(cfg.forcing)},
        {"dt", format_real(cfg.dt)},
        {"phase", "stub"},
    };
    write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != ContainerKind::checkpoint) {
        throw ValidationError(fmt::format("'{}': container does not hold a checkpoint", path.string()));
    }
    const ManifestView view(c.manifest);
    if (view.integer("schema_version") != kCheckpointSchemaVersion) {
        throw VersionError(fmt::format("'{}': checkpoint schema version {} is not supported", path.string(),
                                       view.text("schema_version")));
    }

    const std::string& model = view.text("model");
    if (model == "lorenz96") {
        Lorenz96Config cfg;
        cfg.n = static_cast<int>(view.integer("n"));
        cfg.forcing = view.real("forcing");
        cfg.dt = view.real("dt");
        cfg.validate();
        if (!c.payload.empty()) {
            throw ValidationError(fmt::format("'{}': physics stub carries an unexpected payload", path.string()));
        }
        return Checkpoint{cfg, CheckpointMeta{0, "stub", {}}};
    }
    if (model != "mlp") {
        throw ValidationError(fmt::format("'{}': unknown model '{}'", path.string(), model));
    }

    MlpArchitecture arch;
    arch.input_dim = static_cast<int>(view.integer("input_dim"));
    arch.hidden_dims = view.int_list("hidden_dims");
    arch.output_dim = static_cast<int>(view.integer("output_dim"));
    try {
        arch.hidden_activation = activation_from_string(view.text("activation"));
        arch.validate();
    } catch (const ConfigError& e) {
        throw ValidationError(fmt::format("'{}': {}", path.string(), e.what()));
    }
    const auto count = view.integer("parameter_count");
    if (count != arch.parameter_count() || static_cast<std::size_t>(count) != c.payload.size()) {
        throw ValidationError(fmt::format("'{}': parameter_count={} but architecture needs {} and payload has {}",
                                          path.string(), count, arch.parameter_count(), c.payload.size()));
    }

    CheckpointMeta meta;
    meta.seed = view.unsigned_integer("seed");
    meta.phase = view.text("phase");
    meta.weights = {view.real("alpha"), view.real("beta"), view.real("gamma")};
    MlpParams params = MlpParams::unflatten(arch, c.payload);
    if (!params.all_finite()) {
        throw ValidationError(fmt::format("'{}': parameters contain non-finite values", path.string()));
    }
    return Checkpoint{std::move(params), std::move(meta)};
}

std::unique_ptr<Emulator> make_emulator(const Checkpoint& checkpoint) {
    if (checkpoint.is_physics_stub()) {
        return std::make_unique<PhysicsEmulator>(std::get<Lorenz96Config>(checkpoint.model));
    }
    return std::make_unique<MlpEmulator>(checkpoint.params());
}

} // namespace jenn
