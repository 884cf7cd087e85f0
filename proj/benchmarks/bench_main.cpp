#include <jenn/dataset.hpp>
#include <jenn/lorenz96.hpp>
#include <jenn/mlp.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace jenn;

struct Setup {
    Lorenz96Config cfg{};
    TrajectoryDataset traj = generate_trajectory(cfg, 50.0, 52.0, 0);
    SensitivitySet sens = generate_sensitivity_set(traj, 2048, PerturbationMode::dense_proportional, 0.01, 1);
    MlpParams params = init_params(MlpArchitecture::state_map(cfg.n, {256, 256}), 2);
    StateVector x = traj.inputs.col(0);
};

const Setup& setup() {
    static const Setup s;
    return s;
}

ForecastBatch forecast_batch(Eigen::Index size) {
    const auto& s = setup();
    return {s.traj.inputs.leftCols(size), s.traj.targets.leftCols(size)};
}

TangentBatch tangent_batch(Eigen::Index size) {
    const auto& s = setup();
    return {s.sens.x.leftCols(size), s.sens.dx.leftCols(size), s.sens.dy_true.leftCols(size)};
}

AdjointBatch adjoint_batch(Eigen::Index size) {
    const auto& s = setup();
    return {s.sens.x.leftCols(size), s.sens.yhat.leftCols(size), s.sens.xhat_true.leftCols(size)};
}

void BM_StepRk4(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) {
        benchmark::DoNotOptimize(lorenz96::step_rk4(s.cfg, s.x));
    }
}
BENCHMARK(BM_StepRk4);

void BM_StepTlm(benchmark::State& state) {
    const auto& s = setup();
    const StateVector dx = s.sens.dx.col(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lorenz96::step_tlm(s.cfg, s.x, dx));
    }
}
BENCHMARK(BM_StepTlm);

void BM_StepAdj(benchmark::State& state) {
    const auto& s = setup();
    const StateVector w = s.sens.yhat.col(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lorenz96::step_adj(s.cfg, s.x, w));
    }
}
BENCHMARK(BM_StepAdj);

void BM_MlpForward(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(s.params, s.x));
    }
}
BENCHMARK(BM_MlpForward);

void BM_MlpJvp(benchmark::State& state) {
    const auto& s = setup();
    const auto [y, trace] = forward(s.params, s.x);
    const StateVector dx = s.sens.dx.col(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(jvp(s.params, trace, dx));
    }
}
BENCHMARK(BM_MlpJvp);

void BM_MlpVjp(benchmark::State& state) {
    const auto& s = setup();
    const auto [y, trace] = forward(s.params, s.x);
    const StateVector w = s.sens.yhat.col(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(vjp(s.params, trace, w));
    }
}
BENCHMARK(BM_MlpVjp);

void BM_ExtractJacobian(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_jacobian(s.params, s.x));
    }
}
BENCHMARK(BM_ExtractJacobian);

void BM_GradForecastLoss(benchmark::State& state) {
    const auto batch = forecast_batch(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_forecast_loss(setup().params, batch));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradForecastLoss)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_GradTlmLoss(benchmark::State& state) {
    const auto batch = tangent_batch(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_tlm_loss(setup().params, batch));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradTlmLoss)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_GradAdjLoss(benchmark::State& state) {
    const auto batch = adjoint_batch(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_adj_loss(setup().params, batch));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradAdjLoss)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
