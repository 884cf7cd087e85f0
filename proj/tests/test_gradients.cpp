#include "support/oracles.hpp"

#include <jenn/error.hpp>
#include <jenn/lorenz96.hpp>
#include <jenn/mlp.hpp>
#include <jenn/parallel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using jenn::Matrix;
using jenn::MlpArchitecture;
using jenn::MlpParams;
using jenn::Vector;

constexpr int kN = 8;

struct Fixture {
    MlpArchitecture arch = MlpArchitecture::state_map(kN, {16, 16});
    MlpParams params;
    jenn::ForecastBatch forecast;
    jenn::TangentBatch tangent;
    jenn::AdjointBatch adjoint;

    explicit Fixture(Eigen::Index samples = 12, unsigned seed = 1) : params(jenn::init_params(arch, seed)) {
        std::mt19937_64 gen(seed);
        for (auto& layer : params.layers()) {
            layer.bias = oracle::normal_vector(gen, layer.bias.size(), 0.1);
        }
        const jenn::Lorenz96Config cfg{kN, 8.0, 0.0125};
        Matrix x(kN, samples);
        for (Eigen::Index k = 0; k < samples; ++k) {
            x.col(k) = oracle::normal_vector(gen, kN, 3.0);
        }
        forecast = {x, Matrix(kN, samples)};
        tangent = {x, Matrix(kN, samples), Matrix(kN, samples)};
        adjoint = {x, Matrix(kN, samples), Matrix(kN, samples)};
        for (Eigen::Index k = 0; k < samples; ++k) {
            const Vector xk = x.col(k);
            forecast.y_true.col(k) = jenn::lorenz96::step_rk4(cfg, xk);
            tangent.dx.col(k) = oracle::normal_vector(gen, kN, 0.1);
            tangent.dy_true.col(k) = jenn::lorenz96::step_tlm(cfg, xk, tangent.dx.col(k));
            adjoint.yhat.col(k) = oracle::normal_vector(gen, kN, 0.1);
            adjoint.xhat_true.col(k) = jenn::lorenz96::step_adj(cfg, xk, adjoint.yhat.col(k));
        }
    }
};

double sample_rmse(const Vector& r) { return r.norm() / std::sqrt(static_cast<double>(r.size())); }

// Loss computed sample by sample through the per-sample API.
double naive_forecast_loss(const MlpParams& p, const jenn::ForecastBatch& b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        s += sample_rmse(jenn::predict(p, b.x.col(k)) - b.y_true.col(k));
    }
    return s / static_cast<double>(b.size());
}

double naive_tlm_loss(const MlpParams& p, const jenn::TangentBatch& b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        const auto [y, trace] = jenn::forward(p, b.x.col(k));
        s += sample_rmse(jenn::jvp(p, trace, b.dx.col(k)) - b.dy_true.col(k));
    }
    return s / static_cast<double>(b.size());
}

double naive_adj_loss(const MlpParams& p, const jenn::AdjointBatch& b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        const auto [y, trace] = jenn::forward(p, b.x.col(k));
        s += sample_rmse(jenn::vjp(p, trace, b.yhat.col(k)) - b.xhat_true.col(k));
    }
    return s / static_cast<double>(b.size());
}

template <class LossFn>
void expect_gradient_matches(const MlpArchitecture& arch, const Vector& theta, const Vector& grad, LossFn&& loss,
                             double tol, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
    auto f = [&](const Vector& t) { return loss(MlpParams::unflatten(arch, t)); };
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index i = pick(gen);
        const double fd = oracle::central_difference(f, theta, i, 1e-6);
        const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        EXPECT_LT(std::abs(fd - grad[i]) / scale, tol) << "coordinate " << i;
    }
}

TEST(ForecastLoss, ValueMatchesPerSampleOracle) {
    const Fixture fx;
    const auto lg = jenn::grad_forecast_loss(fx.params, fx.forecast);
    EXPECT_NEAR(lg.loss, naive_forecast_loss(fx.params, fx.forecast), 1e-14);
    EXPECT_EQ(jenn::forecast_loss(fx.params, fx.forecast), lg.loss);
}

TEST(ForecastLoss, GradientMatchesFiniteDifferences) {
    const Fixture fx;
    const auto lg = jenn::grad_forecast_loss(fx.params, fx.forecast);
    expect_gradient_matches(fx.arch, fx.params.flatten(), lg.grad,
                            [&](const MlpParams& p) { return naive_forecast_loss(p, fx.forecast); }, 1e-5, 11);
}

TEST(ForecastLoss, ExactLabelsGiveZeroLossAndGradient) {
    Fixture fx;
    for (Eigen::Index k = 0; k < fx.forecast.size(); ++k) {
        fx.forecast.y_true.col(k) = jenn::predict(fx.params, fx.forecast.x.col(k));
    }
    const auto lg = jenn::grad_forecast_loss(fx.params, fx.forecast);
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_TRUE(lg.grad.isZero(0.0));
}

TEST(ForecastLoss, DoublingResidualsDoublesLoss) {
    Fixture fx;
    const double base = jenn::forecast_loss(fx.params, fx.forecast);
    for (Eigen::Index k = 0; k < fx.forecast.size(); ++k) {
        const Vector y = jenn::predict(fx.params, fx.forecast.x.col(k));
        fx.forecast.y_true.col(k) = y + 2.0 * (fx.forecast.y_true.col(k) - y);
    }
    EXPECT_NEAR(jenn::forecast_loss(fx.params, fx.forecast), 2.0 * base, 1e-12 * base);
}

TEST(TlmLoss, ValueAndGradient) {
    const Fixture fx;
    const auto lg = jenn::grad_tlm_loss(fx.params, fx.tangent);
    EXPECT_NEAR(lg.loss, naive_tlm_loss(fx.params, fx.tangent), 1e-14);
    EXPECT_EQ(jenn::tlm_loss(fx.params, fx.tangent), lg.loss);
    expect_gradient_matches(fx.arch, fx.params.flatten(), lg.grad,
                            [&](const MlpParams& p) { return naive_tlm_loss(p, fx.tangent); }, 1e-4, 12);
}

TEST(TlmLoss, ExactLabelsGiveZero) {
    Fixture fx;
    for (Eigen::Index k = 0; k < fx.tangent.size(); ++k) {
        const auto [y, trace] = jenn::forward(fx.params, fx.tangent.x.col(k));
        fx.tangent.dy_true.col(k) = jenn::jvp(fx.params, trace, fx.tangent.dx.col(k));
    }
    const auto lg = jenn::grad_tlm_loss(fx.params, fx.tangent);
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_TRUE(lg.grad.isZero(0.0));
}

TEST(TlmLoss, JointScalingIsHomogeneous) {
    Fixture fx;
    const auto base = jenn::grad_tlm_loss(fx.params, fx.tangent);
    fx.tangent.dx *= 3.0;
    fx.tangent.dy_true *= 3.0;
    const auto scaled = jenn::grad_tlm_loss(fx.params, fx.tangent);
    EXPECT_NEAR(scaled.loss, 3.0 * base.loss, 1e-12 * base.loss);
    EXPECT_LT((scaled.grad - 3.0 * base.grad).norm(), 1e-11 * base.grad.norm());
}

TEST(AdjLoss, ValueAndGradient) {
    const Fixture fx;
    const auto lg = jenn::grad_adj_loss(fx.params, fx.adjoint);
    EXPECT_NEAR(lg.loss, naive_adj_loss(fx.params, fx.adjoint), 1e-14);
    EXPECT_EQ(jenn::adj_loss(fx.params, fx.adjoint), lg.loss);
    expect_gradient_matches(fx.arch, fx.params.flatten(), lg.grad,
                            [&](const MlpParams& p) { return naive_adj_loss(p, fx.adjoint); }, 1e-4, 13);
}

TEST(AdjLoss, ExactLabelsGiveZero) {
    Fixture fx;
    for (Eigen::Index k = 0; k < fx.adjoint.size(); ++k) {
        const auto [y, trace] = jenn::forward(fx.params, fx.adjoint.x.col(k));
        fx.adjoint.xhat_true.col(k) = jenn::vjp(fx.params, trace, fx.adjoint.yhat.col(k));
    }
    // Batched and per-sample products round differently; the residual is
    // below the gradient floor, so the gradient is exactly zero.
    const auto lg = jenn::grad_adj_loss(fx.params, fx.adjoint);
    EXPECT_LT(lg.loss, jenn::kRmseGradientFloor);
    EXPECT_TRUE(lg.grad.isZero(0.0));
}

TEST(AdjLoss, ZeroSensitivityDegenerateCase) {
    Fixture fx;
    fx.adjoint.yhat.setZero();
    double expect = 0.0;
    for (Eigen::Index k = 0; k < fx.adjoint.size(); ++k) {
        expect += fx.adjoint.xhat_true.col(k).norm() / std::sqrt(double{kN});
    }
    expect /= static_cast<double>(fx.adjoint.size());
    EXPECT_NEAR(jenn::adj_loss(fx.params, fx.adjoint), expect, 1e-14);
    // The network output no longer depends on the parameters.
    EXPECT_TRUE(jenn::grad_adj_loss(fx.params, fx.adjoint).grad.isZero(0.0));
    fx.adjoint.xhat_true.setZero();
    // Batched and per-sample products round differently; the residual is
    // below the gradient floor, so the gradient is exactly zero.
    const auto lg = jenn::grad_adj_loss(fx.params, fx.adjoint);
    EXPECT_LT(lg.loss, jenn::kRmseGradientFloor);
    EXPECT_TRUE(lg.grad.isZero(0.0));
}

TEST(BatchLosses, EmptyOrMismatchedBatchesThrow) {
    const Fixture fx;
    EXPECT_THROW(jenn::grad_forecast_loss(fx.params, {Matrix(kN, 0), Matrix(kN, 0)}), jenn::ShapeError);
    EXPECT_THROW(jenn::grad_tlm_loss(fx.params, {Matrix(kN, 0), Matrix(kN, 0), Matrix(kN, 0)}), jenn::ShapeError);
    EXPECT_THROW(jenn::grad_adj_loss(fx.params, {Matrix(kN, 2), Matrix(kN, 3), Matrix(kN, 2)}), jenn::ShapeError);
    EXPECT_THROW(jenn::grad_forecast_loss(fx.params, {Matrix(kN + 1, 2), Matrix(kN, 2)}), jenn::ShapeError);
}

TEST(BatchLosses, NonFiniteParametersRaise) {
    Fixture fx;
    fx.params.layer(0).weight(0, 0) = std::nan("");
    EXPECT_THROW(jenn::grad_forecast_loss(fx.params, fx.forecast), jenn::NumericalError);
}

TEST(BatchLosses, ResultIndependentOfThreadCount) {
    // More than one 256-column chunk so the chunked reduction is exercised.
    const Fixture fx(700, 3);
    jenn::set_max_threads(1);
    const auto f1 = jenn::grad_forecast_loss(fx.params, fx.forecast);
    const auto t1 = jenn::grad_tlm_loss(fx.params, fx.tangent);
    const auto a1 = jenn::grad_adj_loss(fx.params, fx.adjoint);
    jenn::set_max_threads(4);
    const auto f4 = jenn::grad_forecast_loss(fx.params, fx.forecast);
    const auto t4 = jenn::grad_tlm_loss(fx.params, fx.tangent);
    const auto a4 = jenn::grad_adj_loss(fx.params, fx.adjoint);
    jenn::set_max_threads(0);
    EXPECT_EQ(f1.loss, f4.loss);
    EXPECT_EQ(f1.grad, f4.grad);
    EXPECT_EQ(t1.loss, t4.loss);
    EXPECT_EQ(t1.grad, t4.grad);
    EXPECT_EQ(a1.loss, a4.loss);
    EXPECT_EQ(a1.grad, a4.grad);
    EXPECT_NEAR(f1.loss, naive_forecast_loss(fx.params, fx.forecast), 1e-13);
    EXPECT_NEAR(t1.loss, naive_tlm_loss(fx.params, fx.tangent), 1e-13);
    EXPECT_NEAR(a1.loss, naive_adj_loss(fx.params, fx.adjoint), 1e-13);
}

} // namespace
