#pragma once

#include "jenn/lorenz96.hpp"
#include "jenn/mlp.hpp"
#include "jenn/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>

namespace jenn {

/// Consecutive one-step pairs (x_t, x_{t+dt}) sampled after a spin-up.
struct TrajectoryDataset {
    Lorenz96Config config;
    Matrix inputs;  ///< n x pairs
    Matrix targets; ///< n x pairs, column k = step_rk4(inputs column k)
    Seed seed = 0;
    std::int64_t spinup_steps = 0;
    std::int64_t sample_steps = 0;

    Eigen::Index size() const { return inputs.cols(); }
    ForecastBatch as_batch() const { return {inputs, targets}; }
};

enum class PerturbationMode { dense_proportional, sparse_site };

std::string_view to_string(PerturbationMode mode);
PerturbationMode perturbation_mode_from_string(std::string_view name);

/// Tangent linear and adjoint supervision records computed by the physics core.
struct SensitivitySet {
    Lorenz96Config config;
    PerturbationMode mode = PerturbationMode::dense_proportional;
    double rel_scale = 0.01;
    Seed seed = 0;
    Matrix x;         ///< states
    Matrix dx;        ///< tangent inputs
    Matrix dy_true;   ///< step_tlm(x, dx)
    Matrix yhat;      ///< adjoint inputs
    Matrix xhat_true; ///< step_adj(x, yhat)

    Eigen::Index size() const { return x.cols(); }
    TangentBatch tangent_batch() const { return {x, dx, dy_true}; }
    AdjointBatch adjoint_batch() const { return {x, yhat, xhat_true}; }
};

inline constexpr double kDefaultSpinupTime = 1000.0;
inline constexpr double kDefaultSampleTime = 1000.0;
/// Added to component 0 of the all-F equilibrium to start the spin-up.
inline constexpr double kSpinupKick = 1e-3;

/// Number of dt steps in `time`; throws ConfigError unless `time` is a
/// positive whole multiple of dt (to 1e-9 relative).
std::int64_t steps_for(double time, double dt);

/// Spins up from F + kSpinupKick on component 0, discards spinup_time/dt
/// steps, then records sample_time/dt consecutive pairs. The trajectory is
/// fully determined by cfg and the times; `seed` is carried as provenance for
/// downstream sampling.
TrajectoryDataset generate_trajectory(const Lorenz96Config& cfg, double spinup_time = kDefaultSpinupTime,
                                      double sample_time = kDefaultSampleTime, Seed seed = 0);

/// Samples `count` states without replacement and attaches perturbations:
/// dense_proportional sets every component to +-rel_scale*|x_i| (random sign);
/// sparse_site perturbs one uniformly chosen site by +-rel_scale*|x_site|.
/// dx and yhat are drawn independently.
SensitivitySet generate_sensitivity_set(const TrajectoryDataset& traj, Eigen::Index count,
                                        PerturbationMode mode = PerturbationMode::dense_proportional,
                                        double rel_scale = 0.01, Seed seed = 0);

/// Leading pairs for training and the final `holdout_fraction` for evaluation.
std::pair<TrajectoryDataset, TrajectoryDataset> split_holdout(const TrajectoryDataset& traj,
                                                              double holdout_fraction = 0.1);

/// Pairs at the given column indices, in that order.
TrajectoryDataset select_pairs(const TrajectoryDataset& traj, const std::vector<std::size_t>& columns);

inline constexpr int kDatasetSchemaVersion = 1;

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& traj);
void save_dataset(const std::filesystem::path& path, const SensitivitySet& sens);
TrajectoryDataset load_trajectory(const std::filesystem::path& path);
SensitivitySet load_sensitivity(const std::filesystem::path& path);

} // namespace jenn
