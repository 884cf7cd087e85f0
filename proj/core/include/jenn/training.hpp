#pragma once

#include "jenn/checkpoint.hpp"
#include "jenn/dataset.hpp"
#include "jenn/emulator.hpp"
#include "jenn/lbfgs.hpp"
#include "jenn/mlp.hpp"

#include <string>
#include <string_view>

namespace jenn {

enum class TrainingPhase { forecast_only, jenn };

std::string_view to_string(TrainingPhase phase);

struct TrainResult {
    MlpParams params;
    OptimizeReport report;
};

inline constexpr Eigen::Index kDefaultSubsetSize = 8192;
inline constexpr Eigen::Index kDefaultSensitivityCount = 2048;

/// Seeded subset of `subset_size` pairs (all pairs if the set is smaller).
ForecastBatch select_forecast_subset(const TrajectoryDataset& train, Eigen::Index subset_size, Seed seed);

/// Phase 1: minimize the mean forecast RMSE from init_params(arch, seed).
TrainResult train_phase1(const MlpArchitecture& arch, const TrajectoryDataset& train, const LbfgsConfig& lbfgs,
                         Eigen::Index subset_size = kDefaultSubsetSize, Seed seed = 0);

/// Phase-1 core on an explicit batch.
TrainResult train_phase1(const MlpArchitecture& arch, const ForecastBatch& batch, const LbfgsConfig& lbfgs,
                         Seed seed);

struct JennLossTerms {
    double forecast = 0.0;
    double tlm = 0.0;
    double adj = 0.0;
    double total = 0.0;
};

/// Each loss term evaluated separately, and their weighted sum.
JennLossTerms jenn_loss_terms(const MlpParams& params, const ForecastBatch& forecast, const SensitivitySet& sens,
                              const LossWeights& weights);

/// alpha * L_forecast + beta * L_tlm + gamma * L_adj with its gradient.
/// Terms with zero weight are not evaluated.
LossGradient jenn_loss(const MlpParams& params, const ForecastBatch& forecast, const SensitivitySet& sens,
                       const LossWeights& weights);

/// Phase 2: minimize the weighted total loss starting from phase-1 parameters.
TrainResult train_phase2(const MlpParams& params0, const ForecastBatch& forecast, const SensitivitySet& sens,
                         const LossWeights& weights, const LbfgsConfig& lbfgs);

/// Phase 2 on the same seeded subset that phase 1 used.
TrainResult train_phase2(const MlpParams& params0, const TrajectoryDataset& train, const SensitivitySet& sens,
                         const LossWeights& weights, const LbfgsConfig& lbfgs,
                         Eigen::Index subset_size = kDefaultSubsetSize, Seed seed = 0);

struct MetricsReport {
    double forecast_rmse = 0.0;      ///< mean per-sample RMSE of predict vs truth
    double tlm_rmse = 0.0;           ///< mean per-sample RMSE of tangent vs step_tlm
    double adj_rmse = 0.0;           ///< mean per-sample RMSE of adjoint vs step_adj
    double jacobian_frob_rmse = 0.0; ///< mean of ||J - J_true||_F / n
    Eigen::Index forecast_samples = 0;
    Eigen::Index sensitivity_samples = 0;
    Eigen::Index jacobian_states = 0;
};

struct EvalOptions {
    Eigen::Index jacobian_states = 20; ///< all holdout states if larger than the holdout
    Seed seed = 0;
};

/// Metrics of `emulator` on held-out data. Throws ConfigError on an empty holdout.
MetricsReport evaluate(const Emulator& emulator, const TrajectoryDataset& holdout, const SensitivitySet& sens_holdout,
                       const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// End-to-end experiment

struct ExperimentConfig {
    Lorenz96Config physics{};
    double spinup_time = kDefaultSpinupTime;
    double sample_time = kDefaultSampleTime;
    double holdout_fraction = 0.1;
    std::vector<int> hidden_dims{256, 256};
    Eigen::Index subset_size = kDefaultSubsetSize;
    Eigen::Index sensitivity_count = kDefaultSensitivityCount;
    Eigen::Index eval_sensitivity_count = 1024;
    Eigen::Index eval_jacobian_states = 20;
    PerturbationMode mode = PerturbationMode::dense_proportional;
    double rel_scale = 0.01;
    LossWeights weights{};
    LbfgsConfig phase1{};
    LbfgsConfig phase2{};
    Seed seed = 0;

    void validate() const;
};

/// Seeds of every random stream in an experiment, derived from the master seed.
struct ExperimentSeeds {
    Seed init;
    Seed subset;
    Seed sensitivity;
    Seed eval_sensitivity;
    Seed eval_jacobian;

    static ExperimentSeeds from(Seed master);
};

/// Data every phase of an experiment shares.
struct ExperimentData {
    TrajectoryDataset train;
    TrajectoryDataset holdout;
    ForecastBatch subset;
    SensitivitySet sensitivity;
    SensitivitySet eval_sensitivity;
};

ExperimentData prepare_experiment_data(const ExperimentConfig& cfg, const TrajectoryDataset& traj);

struct ExperimentResult {
    TrainResult phase1;
    TrainResult phase2;
    MetricsReport metrics_nn;
    MetricsReport metrics_jenn;
};

/// Generates the trajectory, runs both phases and evaluates both networks.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data);

/// Plain-text run report: "key = value" lines for every non-null argument,
/// then, when both metric reports are given, a table with one row per metric
/// and columns nn / jenn / ratio.
std::string format_run_report(const ExperimentConfig* config, const OptimizeReport* phase1,
                              const OptimizeReport* phase2, const MetricsReport* nn, const MetricsReport* jenn);

std::string format_metrics_table(const MetricsReport& nn, const MetricsReport& jenn);

} // namespace jenn
