#include "jenn/dataset.hpp"

#include "jenn/container.hpp"
#include "jenn/error.hpp"
#include "jenn/parallel.hpp"
#include "jenn/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace jenn {

std::string_view to_string(PerturbationMode mode) {
    switch (mode) {
    case PerturbationMode::dense_proportional:
        return "dense_proportional";
    case PerturbationMode::sparse_site:
        return "sparse_site";
    }
    return "unknown";
}

PerturbationMode perturbation_mode_from_string(std::string_view name) {
    if (name == "dense_proportional" || name == "dense") {
        return PerturbationMode::dense_proportional;
    }
    if (name == "sparse_site" || name == "sparse") {
        return PerturbationMode::sparse_site;
    }
    throw ConfigError(fmt::format("unknown perturbation mode '{}'", name));
}

std::int64_t steps_for(double time, double dt) {
    if (!(time > 0.0) || !std::isfinite(time)) {
        throw ConfigError(fmt::format("time span must be positive, got {}", time));
    }
    const double ratio = time / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
        throw ConfigError(fmt::format("time span {} is not a whole multiple of dt={}", time, dt));
    }
    return static_cast<std::int64_t>(rounded);
}

TrajectoryDataset generate_trajectory(const Lorenz96Config& cfg, double spinup_time, double sample_time,
                                      Seed seed) {
    cfg.validate();
    TrajectoryDataset traj;
    traj.config = cfg;
    traj.seed = seed;
    traj.spinup_steps = steps_for(spinup_time, cfg.dt);
    traj.sample_steps = steps_for(sample_time, cfg.dt);

    StateVector x = StateVector::Constant(cfg.n, cfg.forcing);
    x[0] += kSpinupKick;
    for (std::int64_t k = 0; k < traj.spinup_steps; ++k) {
        x = lorenz96::step_rk4(cfg, x);
    }

    traj.inputs.resize(cfg.n, traj.sample_steps);
    traj.targets.resize(cfg.n, traj.sample_steps);
    for (std::int64_t k = 0; k < traj.sample_steps; ++k) {
        traj.inputs.col(k) = x;
        x = lorenz96::step_rk4(cfg, x);
        traj.targets.col(k) = x;
    }
    return traj;
}

namespace {

void draw_perturbation(Rng& rng, PerturbationMode mode, double rel_scale, const StateVector& x,
                       Eigen::Ref<Vector> out) {
    out.setZero();
    switch (mode) {
    case PerturbationMode::dense_proportional:
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            out[i] = rng.sign() * rel_scale * std::abs(x[i]);
        }
        break;
    case PerturbationMode::sparse_site: {
        const auto site = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(x.size())));
        out[site] = rng.sign() * rel_scale * std::abs(x[site]);
        break;
    }
    }
}

} // namespace

SensitivitySet generate_sensitivity_set(const TrajectoryDataset& traj, Eigen::Index count,
                                        PerturbationMode mode, double rel_scale, Seed seed) {
    if (count < 0 || count > traj.size()) {
        throw ConfigError(fmt::format("generate_sensitivity_set: requested {} records but the trajectory has {} states",
                                      count, traj.size()));
    }
    if (!(rel_scale > 0.0) || !std::isfinite(rel_scale)) {
        throw ConfigError("generate_sensitivity_set: rel_scale must be positive");
    }
    const int n = traj.config.n;
    SensitivitySet sens;
    sens.config = traj.config;
    sens.mode = mode;
    sens.rel_scale = rel_scale;
    sens.seed = seed;
    sens.x.resize(n, count);
    sens.dx.resize(n, count);
    sens.yhat.resize(n, count);
    sens.dy_true.resize(n, count);
    sens.xhat_true.resize(n, count);

    Rng rng(seed);
    const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(traj.size()),
                                                      static_cast<std::size_t>(count));
    for (Eigen::Index r = 0; r < count; ++r) {
        const StateVector x = traj.inputs.col(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(r)]));
        sens.x.col(r) = x;
        draw_perturbation(rng, mode, rel_scale, x, sens.dx.col(r));
        draw_perturbation(rng, mode, rel_scale, x, sens.yhat.col(r));
    }

    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        const StateVector x = sens.x.col(r);
        sens.dy_true.col(r) = lorenz96::step_tlm(sens.config, x, sens.dx.col(r));
        sens.xhat_true.col(r) = lorenz96::step_adj(sens.config, x, sens.yhat.col(r));
    });
    return sens;
}

std::pair<TrajectoryDataset, TrajectoryDataset> split_holdout(const TrajectoryDataset& traj,
                                                              double holdout_fraction) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("split_holdout: fraction must lie in (0, 1)");
    }
    const auto holdout = static_cast<Eigen::Index>(std::llround(holdout_fraction * static_cast<double>(traj.size())));
    const Eigen::Index train = traj.size() - holdout;
    if (holdout < 1 || train < 1) {
        throw ConfigError(fmt::format("split_holdout: {} pairs cannot be split with fraction {}", traj.size(),
                                      holdout_fraction));
    }
    auto slice = [&](Eigen::Index begin, Eigen::Index count) {
        TrajectoryDataset part;
        part.config = traj.config;
        part.seed = traj.seed;
        part.spinup_steps = traj.spinup_steps + begin;
        part.sample_steps = count;
        part.inputs = traj.inputs.middleCols(begin, count);
        part.targets = traj.targets.middleCols(begin, count);
        return part;
    };
    return {slice(0, train), slice(train, holdout)};
}

TrajectoryDataset select_pairs(const TrajectoryDataset& traj, const std::vector<std::size_t>& columns) {
    TrajectoryDataset out;
    out.config = traj.config;
    out.seed = traj.seed;
    out.spinup_steps = traj.spinup_steps;
    out.sample_steps = static_cast<std::int64_t>(columns.size());
    out.inputs.resize(traj.config.n, static_cast<Eigen::Index>(columns.size()));
    out.targets.resize(traj.config.n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto src = static_cast<Eigen::Index>(columns[k]);
        if (src < 0 || src >= traj.size()) {
            throw ShapeError("select_pairs: column index out of range");
        }
        out.inputs.col(static_cast<Eigen::Index>(k)) = traj.inputs.col(src);
        out.targets.col(static_cast<Eigen::Index>(k)) = traj.targets.col(src);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using Manifest = std::vector<std::pair<std::string, std::string>>;

void append_config(Manifest& m, const Lorenz96Config& cfg) {
    m.emplace_back("n", std::to_string(cfg.n));
    m.emplace_back("forcing", format_real(cfg.forcing));
    m.emplace_back("dt", format_real(cfg.dt));
}

Lorenz96Config read_config(const ManifestView& view) {
    Lorenz96Config cfg;
    cfg.n = static_cast<int>(view.integer("n"));
    cfg.forcing = view.real("forcing");
    cfg.dt = view.real("dt");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ValidationError(fmt::format("manifest: {}", e.what()));
    }
    return cfg;
}

void append_block(std::vector<double>& payload, const Matrix& block) {
    payload.insert(payload.end(), block.data(), block.data() + block.size());
}

Matrix read_block(const std::vector<double>& payload, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
    Matrix block(rows, cols);
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(pos), block.size(), block.data());
    pos += static_cast<std::size_t>(block.size());
    return block;
}

void check_schema(const ManifestView& view, std::string_view type, const std::filesystem::path& path) {
    const auto version = view.integer("schema_version");
    if (version != kDatasetSchemaVersion) {
        throw VersionError(fmt::format("'{}': dataset schema version {} is not supported (expected {})",
                                       path.string(), version, kDatasetSchemaVersion));
    }
    if (view.text("type") != type) {
        throw ValidationError(fmt::format("'{}': expected a {} dataset, found '{}'", path.string(), type,
                                          view.text("type")));
    }
}

void check_payload_length(const Container& c, std::size_t expected, const std::filesystem::path& path) {
    if (c.payload.size() != expected) {
        throw ValidationError(fmt::format("'{}': manifest implies {} payload values, found {}", path.string(),
                                          expected, c.payload.size()));
    }
}

} // namespace

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& traj) {
    Container c;
    c.kind = ContainerKind::trajectory;
    c.manifest.emplace_back("schema_version", std::to_string(kDatasetSchemaVersion));
    c.manifest.emplace_back("type", "trajectory");
    append_config(c.manifest, traj.config);
    c.manifest.emplace_back("seed", std::to_string(traj.seed));
    c.manifest.emplace_back("spinup_steps", std::to_string(traj.spinup_steps));
    c.manifest.emplace_back("sample_steps", std::to_string(traj.sample_steps));
    c.manifest.emplace_back("pairs", std::to_string(traj.size()));
    c.manifest.emplace_back("layout", "inputs,targets; record-major float64");
    c.payload.reserve(static_cast<std::size_t>(2 * traj.inputs.size()));
    append_block(c.payload, traj.inputs);
    append_block(c.payload, traj.targets);
    write_container(path, c);
}

void save_dataset(const std::filesystem::path& path, const SensitivitySet& sens) {
    Container c;
    c.kind = ContainerKind::sensitivity;
    c.manifest.emplace_back("schema_version", std::to_string(kDatasetSchemaVersion));
    c.manifest.emplace_back("type", "sensitivity");
    append_config(c.manifest, sens.config);
    c.manifest.emplace_back("seed", std::to_string(sens.seed));
    c.manifest.emplace_back("mode", std::string(to_string(sens.mode)));
    c.manifest.emplace_back("rel_scale", format_real(sens.rel_scale));
    c.manifest.emplace_back("records", std::to_string(sens.size()));
    c.manifest.emplace_back("layout", "x,dx,dy_true,yhat,xhat_true; record-major float64");
    c.payload.reserve(static_cast<std::size_t>(5 * sens.x.size()));
    for (const Matrix* block : {&sens.x, &sens.dx, &sens.dy_true, &sens.yhat, &sens.xhat_true}) {
        append_block(c.payload, *block);
    }
    write_container(path, c);
}

TrajectoryDataset load_trajectory(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != ContainerKind::trajectory) {
        throw ValidationError(fmt::format("'{}': container does not hold a trajectory", path.string()));
    }
    const ManifestView view(c.manifest);
    check_schema(view, "trajectory", path);
    TrajectoryDataset traj;
    traj.config = read_config(view);
    traj.seed = view.unsigned_integer("seed");
    traj.spinup_steps = view.integer("spinup_steps");
    traj.sample_steps = view.integer("sample_steps");
    const auto pairs = view.integer("pairs");
    if (pairs < 0 || pairs != traj.sample_steps) {
        throw ValidationError(fmt::format("'{}': pairs={} disagrees with sample_steps={}", path.string(), pairs,
                                          traj.sample_steps));
    }
    check_payload_length(c, static_cast<std::size_t>(2 * pairs * traj.config.n), path);
    std::size_t pos = 0;
    traj.inputs = read_block(c.payload, pos, traj.config.n, pairs);
    traj.targets = read_block(c.payload, pos, traj.config.n, pairs);
    return traj;
}

SensitivitySet load_sensitivity(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != ContainerKind::sensitivity) {
        throw ValidationError(fmt::format("'{}': container does not hold a sensitivity set", path.string()));
    }
    const ManifestView view(c.manifest);
    check_schema(view, "sensitivity", path);
    SensitivitySet sens;
    sens.config = read_config(view);
    sens.seed = view.unsigned_integer("seed");
    try {
        sens.mode = perturbation_mode_from_string(view.text("mode"));
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    }
    sens.rel_scale = view.real("rel_scale");
    const auto records = view.integer("records");
    if (records < 0) {
        throw ValidationError(fmt::format("'{}': negative record count", path.string()));
    }
    check_payload_length(c, static_cast<std::size_t>(5 * records * sens.config.n), path);
    std::size_t pos = 0;
    for (Matrix* block : {&sens.x, &sens.dx, &sens.dy_true, &sens.yhat, &sens.xhat_true}) {
        *block = read_block(c.payload, pos, sens.config.n, records);
    }
    return sens;
}

} // namespace jenn
