#include "jenn/training.hpp"

#include "jenn/container.hpp"
#include "jenn/error.hpp"
#include "jenn/parallel.hpp"
#include "jenn/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

namespace jenn {

std::string_view to_string(TrainingPhase phase) {
    switch (phase) {
    case TrainingPhase::forecast_only:
        return "forecast_only";
    case TrainingPhase::jenn:
        return "jenn";
    }
    return "unknown";
}

ForecastBatch select_forecast_subset(const TrajectoryDataset& train, Eigen::Index subset_size, Seed seed) {
    if (train.size() == 0) {
        throw ConfigError("select_forecast_subset: training set is empty");
    }
    if (subset_size <= 0) {
        throw ConfigError("select_forecast_subset: subset size must be positive");
    }
    if (subset_size >= train.size()) {
        return train.as_batch();
    }
    Rng rng(seed);
    const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(train.size()),
                                                      static_cast<std::size_t>(subset_size));
    return select_pairs(train, picks).as_batch();
}

TrainResult train_phase1(const MlpArchitecture& arch, const ForecastBatch& batch, const LbfgsConfig& lbfgs,
                         Seed seed) {
    if (batch.size() == 0) {
        throw ConfigError("train_phase1: empty training batch");
    }
    const MlpParams init = init_params(arch, seed);
    const Objective objective = [&](const Vector& theta, Vector& grad) {
        const MlpParams params = MlpParams::unflatten(arch, theta);
        LossGradient lg = grad_forecast_loss(params, batch);
        grad = std::move(lg.grad);
        return lg.loss;
    };
    OptimizeResult result = minimize(objective, init.flatten(), lbfgs);
    return {MlpParams::unflatten(arch, result.x), std::move(result.report)};
}

TrainResult train_phase1(const MlpArchitecture& arch, const TrajectoryDataset& train, const LbfgsConfig& lbfgs,
                         Eigen::Index subset_size, Seed seed) {
    return train_phase1(arch, select_forecast_subset(train, subset_size, seed), lbfgs, seed);
}

JennLossTerms jenn_loss_terms(const MlpParams& params, const ForecastBatch& forecast, const SensitivitySet& sens,
                              const LossWeights& weights) {
    weights.validate();
    JennLossTerms terms;
    terms.forecast = forecast_loss(params, forecast);
    terms.tlm = tlm_loss(params, sens.tangent_batch());
    terms.adj = adj_loss(params, sens.adjoint_batch());
    terms.total = weights.alpha * terms.forecast + weights.beta * terms.tlm + weights.gamma * terms.adj;
    return terms;
}

LossGradient jenn_loss(const MlpParams& params, const ForecastBatch& forecast, const SensitivitySet& sens,
                       const LossWeights& weights) {
    weights.validate();
    LossGradient total;
    total.grad = Vector::Zero(params.architecture().parameter_count());
    auto add = [&](double weight, const LossGradient& term) {
        total.loss += weight * term.loss;
        total.grad += weight * term.grad;
    };
    if (weights.alpha != 0.0) {
        add(weights.alpha, grad_forecast_loss(params, forecast));
    }
    if (weights.beta != 0.0) {
        add(weights.beta, grad_tlm_loss(params, sens.tangent_batch()));
    }
    if (weights.gamma != 0.0) {
        add(weights.gamma, grad_adj_loss(params, sens.adjoint_batch()));
    }
    return total;
}

TrainResult train_phase2(const MlpParams& params0, const ForecastBatch& forecast, const SensitivitySet& sens,
                         const LossWeights& weights, const LbfgsConfig& lbfgs) {
    weights.validate();
    const auto& arch = params0.architecture();
    if (sens.config.n != arch.input_dim) {
        throw ConfigError(fmt::format("train_phase2: sensitivity set has n={}, network expects {}", sens.config.n,
                                      arch.input_dim));
    }
    if ((weights.beta != 0.0 || weights.gamma != 0.0) && sens.size() == 0) {
        throw ConfigError("train_phase2: tangent/adjoint weights are set but the sensitivity set is empty");
    }
    const Objective objective = [&](const Vector& theta, Vector& grad) {
        const MlpParams params = MlpParams::unflatten(arch, theta);
        LossGradient lg = jenn_loss(params, forecast, sens, weights);
        grad = std::move(lg.grad);
        return lg.loss;
    };
    OptimizeResult result = minimize(objective, params0.flatten(), lbfgs);
    return {MlpParams::unflatten(arch, result.x), std::move(result.report)};
}

TrainResult train_phase2(const MlpParams& params0, const TrajectoryDataset& train, const SensitivitySet& sens,
                         const LossWeights& weights, const LbfgsConfig& lbfgs, Eigen::Index subset_size, Seed seed) {
    return train_phase2(params0, select_forecast_subset(train, subset_size, seed), sens, weights, lbfgs);
}

// ---------------------------------------------------------------------------

namespace {

double rmse(const Vector& residual) {
    return residual.norm() / std::sqrt(static_cast<double>(residual.size()));
}

// Mean of `sample(i)` over i in [0, count), summed in index order.
template <class Fn>
double ordered_mean(std::size_t count, Fn&& sample) {
    std::vector<double> values(count, 0.0);
    parallel_for(count, [&](std::size_t i) { values[i] = sample(i); });
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(count);
}

} // namespace

MetricsReport evaluate(const Emulator& emulator, const TrajectoryDataset& holdout, const SensitivitySet& sens_holdout,
                       const EvalOptions& options) {
    if (holdout.size() == 0 || sens_holdout.size() == 0) {
        throw ConfigError("evaluate: holdout data is empty");
    }
    if (emulator.dim() != holdout.config.n || sens_holdout.config.n != holdout.config.n) {
        throw ShapeError("evaluate: emulator and holdout dimensions differ");
    }
    const auto& cfg = holdout.config;
    MetricsReport m;
    m.forecast_samples = holdout.size();
    m.sensitivity_samples = sens_holdout.size();

    m.forecast_rmse = ordered_mean(static_cast<std::size_t>(holdout.size()), [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        return rmse(emulator.predict(holdout.inputs.col(k)) - holdout.targets.col(k));
    });
    m.tlm_rmse = ordered_mean(static_cast<std::size_t>(sens_holdout.size()), [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        return rmse(emulator.tangent(sens_holdout.x.col(k), sens_holdout.dx.col(k)) - sens_holdout.dy_true.col(k));
    });
    m.adj_rmse = ordered_mean(static_cast<std::size_t>(sens_holdout.size()), [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        return rmse(emulator.adjoint(sens_holdout.x.col(k), sens_holdout.yhat.col(k)) - sens_holdout.xhat_true.col(k));
    });

    std::vector<std::size_t> states;
    if (options.jacobian_states >= holdout.size()) {
        states.resize(static_cast<std::size_t>(holdout.size()));
        std::iota(states.begin(), states.end(), std::size_t{0});
    } else {
        if (options.jacobian_states <= 0) {
            throw ConfigError("evaluate: jacobian_states must be positive");
        }
        Rng rng(options.seed);
        states = rng.sample_without_replacement(static_cast<std::size_t>(holdout.size()),
                                                static_cast<std::size_t>(options.jacobian_states));
    }
    m.jacobian_states = static_cast<Eigen::Index>(states.size());
    m.jacobian_frob_rmse = ordered_mean(states.size(), [&](std::size_t i) {
        const StateVector x = holdout.inputs.col(static_cast<Eigen::Index>(states[i]));
        const JacobianMatrix dev = emulator.jacobian(x) - lorenz96::reference_jacobian(cfg, x);
        return dev.norm() / static_cast<double>(cfg.n);
    });
    return m;
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    physics.validate();
    weights.validate();
    phase1.validate();
    phase2.validate();
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("ExperimentConfig: holdout_fraction must lie in (0, 1)");
    }
    if (subset_size <= 0 || sensitivity_count < 0 || eval_sensitivity_count <= 0 || eval_jacobian_states <= 0) {
        throw ConfigError("ExperimentConfig: sample counts must be positive");
    }
    MlpArchitecture::state_map(physics.n, hidden_dims);
}

ExperimentSeeds ExperimentSeeds::from(Seed master) {
    return {derive_seed(master, 0), derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3),
            derive_seed(master, 4)};
}

ExperimentData prepare_experiment_data(const ExperimentConfig& cfg, const TrajectoryDataset& traj) {
    cfg.validate();
    if (!(traj.config == cfg.physics)) {
        throw ConfigError("prepare_experiment_data: trajectory was generated with a different physics config");
    }
    const auto seeds = ExperimentSeeds::from(cfg.seed);
    ExperimentData data;
    std::tie(data.train, data.holdout) = split_holdout(traj, cfg.holdout_fraction);
    data.subset = select_forecast_subset(data.train, cfg.subset_size, seeds.subset);
    data.sensitivity = generate_sensitivity_set(data.train, std::min(cfg.sensitivity_count, data.train.size()),
                                                cfg.mode, cfg.rel_scale, seeds.sensitivity);
    data.eval_sensitivity = generate_sensitivity_set(
        data.holdout, std::min(cfg.eval_sensitivity_count, data.holdout.size()), cfg.mode, cfg.rel_scale,
        seeds.eval_sensitivity);
    return data;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
    cfg.validate();
    const auto seeds = ExperimentSeeds::from(cfg.seed);
    const auto arch = MlpArchitecture::state_map(cfg.physics.n, cfg.hidden_dims);
    TrainResult phase1 = train_phase1(arch, data.subset, cfg.phase1, seeds.init);
    TrainResult phase2 = train_phase2(phase1.params, data.subset, data.sensitivity, cfg.weights, cfg.phase2);

    const EvalOptions eval{cfg.eval_jacobian_states, seeds.eval_jacobian};
    MetricsReport nn = evaluate(MlpEmulator(phase1.params), data.holdout, data.eval_sensitivity, eval);
    MetricsReport jenn = evaluate(MlpEmulator(phase2.params), data.holdout, data.eval_sensitivity, eval);
    return {std::move(phase1), std::move(phase2), nn, jenn};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const TrajectoryDataset traj = generate_trajectory(cfg.physics, cfg.spinup_time, cfg.sample_time, cfg.seed);
    return run_experiment(cfg, prepare_experiment_data(cfg, traj));
}

// ---------------------------------------------------------------------------

namespace {

void append_report(std::string& out, std::string_view prefix, const OptimizeReport& r) {
    out += fmt::format("{}.iterations = {}\n", prefix, r.iterations);
    out += fmt::format("{}.evaluations = {}\n", prefix, r.evaluations);
    out += fmt::format("{}.termination = {}\n", prefix, to_string(r.termination));
    out += fmt::format("{}.initial_loss = {}\n", prefix,
                       format_real(r.loss_history.empty() ? r.final_loss : r.loss_history.front()));
    out += fmt::format("{}.final_loss = {}\n", prefix, format_real(r.final_loss));
    out += fmt::format("{}.final_grad_norm = {}\n", prefix, format_real(r.final_grad_norm));
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

void append_config(std::string& out, const ExperimentConfig& cfg) {
    out += fmt::format("n = {}\nforcing = {}\ndt = {}\n", cfg.physics.n, format_real(cfg.physics.forcing),
                       format_real(cfg.physics.dt));
    out += fmt::format("hidden_dims = {}\n", join_ints(cfg.hidden_dims));
    out += fmt::format("seed = {}\n", cfg.seed);
    out += fmt::format("subset_size = {}\nsensitivity_count = {}\n", cfg.subset_size, cfg.sensitivity_count);
    out += fmt::format("perturbation_mode = {}\nrel_scale = {}\n", to_string(cfg.mode), format_real(cfg.rel_scale));
    out += fmt::format("alpha = {}\nbeta = {}\ngamma = {}\n", format_real(cfg.weights.alpha),
                       format_real(cfg.weights.beta), format_real(cfg.weights.gamma));
}

} // namespace

std::string format_metrics_table(const MetricsReport& nn, const MetricsReport& jenn) {
    std::string out = fmt::format("{:<20} {:>24} {:>24} {:>12}\n", "metric", "nn", "jenn", "jenn/nn");
    auto row = [&](std::string_view name, double a, double b) {
        out += fmt::format("{:<20} {:>24} {:>24} {:>12.6f}\n", name, format_real(a), format_real(b),
                           a > 0.0 ? b / a : 0.0);
    };
    row("forecast_rmse", nn.forecast_rmse, jenn.forecast_rmse);
    row("tlm_rmse", nn.tlm_rmse, jenn.tlm_rmse);
    row("adj_rmse", nn.adj_rmse, jenn.adj_rmse);
    row("jacobian_frob_rmse", nn.jacobian_frob_rmse, jenn.jacobian_frob_rmse);
    return out;
}

std::string format_run_report(const ExperimentConfig* config, const OptimizeReport* phase1,
                              const OptimizeReport* phase2, const MetricsReport* nn, const MetricsReport* jenn) {
    std::string out = "# jenn run report\n";
    if (config != nullptr) {
        append_config(out, *config);
    }
    if (phase1 != nullptr) {
        append_report(out, "phase1", *phase1);
    }
    if (phase2 != nullptr) {
        append_report(out, "phase2", *phase2);
    }
    for (const auto& [prefix, m] : {std::pair{"nn", nn}, std::pair{"jenn", jenn}}) {
        if (m == nullptr) {
            continue;
        }
        out += fmt::format("{}.forecast_samples = {}\n{}.sensitivity_samples = {}\n{}.jacobian_states = {}\n", prefix,
                           m->forecast_samples, prefix, m->sensitivity_samples, prefix, m->jacobian_states);
        out += fmt::format("{}.forecast_rmse = {}\n", prefix, format_real(m->forecast_rmse));
        out += fmt::format("{}.tlm_rmse = {}\n", prefix, format_real(m->tlm_rmse));
        out += fmt::format("{}.adj_rmse = {}\n", prefix, format_real(m->adj_rmse));
        out += fmt::format("{}.jacobian_frob_rmse = {}\n", prefix, format_real(m->jacobian_frob_rmse));
    }
    if (nn != nullptr && jenn != nullptr) {
        out += "\n[metrics]\n";
        out += format_metrics_table(*nn, *jenn);
    }
    return out;
}

} // namespace jenn
