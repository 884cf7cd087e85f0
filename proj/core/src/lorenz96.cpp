#include "jenn/lorenz96.hpp"

#include "jenn/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace jenn {

void Lorenz96Config::validate() const {
    if (n < 4) {
        throw ConfigError(fmt::format("Lorenz96Config: n must be >= 4, got {}", n));
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ConfigError(fmt::format("Lorenz96Config: dt must be positive, got {}", dt));
    }
    if (!std::isfinite(forcing)) {
        throw ConfigError("Lorenz96Config: forcing must be finite");
    }
}

namespace lorenz96 {

namespace {

void check_length(const Lorenz96Config& cfg, const StateVector& v, const char* what) {
    if (v.size() != cfg.n) {
        throw ShapeError(fmt::format("lorenz96: {} has length {}, expected {}", what, v.size(), cfg.n));
    }
}

void check_finite(const StateVector& v, const char* stage) {
    if (!v.allFinite()) {
        throw NumericalError(fmt::format("lorenz96: non-finite values in {}", stage));
    }
}

// Cyclic neighbour offsets for index i in a ring of n.
struct Ring {
    Eigen::Index n;
    Eigen::Index operator()(Eigen::Index i) const { return ((i % n) + n) % n; }
};

struct Rk4Stages {
    StateVector x1, x2, x3, x4;
};

// Stage inputs of one RK4 step; the tangent and adjoint sweeps linearize about these.
Rk4Stages rk4_stage_inputs(const Lorenz96Config& cfg, const StateVector& x) {
    const double h = cfg.dt;
    Rk4Stages s;
    s.x1 = x;
    const StateVector k1 = tendency(cfg, s.x1);
    s.x2 = x + 0.5 * h * k1;
    const StateVector k2 = tendency(cfg, s.x2);
    s.x3 = x + 0.5 * h * k2;
    const StateVector k3 = tendency(cfg, s.x3);
    s.x4 = x + h * k3;
    return s;
}

} // namespace

StateVector tendency(const Lorenz96Config& cfg, const StateVector& x) {
    check_length(cfg, x, "state");
    const Ring at{x.size()};
    StateVector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out[i] = (x[at(i + 1)] - x[at(i - 2)]) * x[at(i - 1)] - x[i] + cfg.forcing;
    }
    return out;
}

StateVector tendency_tl(const StateVector& x, const StateVector& dx) {
    if (dx.size() != x.size()) {
        throw ShapeError("lorenz96::tendency_tl: perturbation length differs from state");
    }
    const Ring at{x.size()};
    StateVector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out[i] = (dx[at(i + 1)] - dx[at(i - 2)]) * x[at(i - 1)]
               + (x[at(i + 1)] - x[at(i - 2)]) * dx[at(i - 1)] - dx[i];
    }
    return out;
}

StateVector tendency_ad(const StateVector& x, const StateVector& w) {
    if (w.size() != x.size()) {
        throw ShapeError("lorenz96::tendency_ad: adjoint length differs from state");
    }
    const Ring at{x.size()};
    StateVector out = StateVector::Zero(x.size());
    // Scatter form: transpose of each gather in tendency_tl.
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out[at(i + 1)] += w[i] * x[at(i - 1)];
        out[at(i - 2)] -= w[i] * x[at(i - 1)];
        out[at(i - 1)] += w[i] * (x[at(i + 1)] - x[at(i - 2)]);
        out[i] -= w[i];
    }
    return out;
}

StateVector step_rk4(const Lorenz96Config& cfg, const StateVector& x) {
    cfg.validate();
    check_length(cfg, x, "state");
    const double h = cfg.dt;
    const StateVector k1 = tendency(cfg, x);
    const StateVector k2 = tendency(cfg, x + 0.5 * h * k1);
    const StateVector k3 = tendency(cfg, x + 0.5 * h * k2);
    const StateVector k4 = tendency(cfg, x + h * k3);
    StateVector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(next, "rk4 step");
    return next;
}

StateVector step_tlm(const Lorenz96Config& cfg, const StateVector& x, const StateVector& dx) {
    cfg.validate();
    check_length(cfg, x, "state");
    check_length(cfg, dx, "perturbation");
    const double h = cfg.dt;
    const Rk4Stages s = rk4_stage_inputs(cfg, x);

    const StateVector dk1 = tendency_tl(s.x1, dx);
    const StateVector dk2 = tendency_tl(s.x2, dx + 0.5 * h * dk1);
    const StateVector dk3 = tendency_tl(s.x3, dx + 0.5 * h * dk2);
    const StateVector dk4 = tendency_tl(s.x4, dx + h * dk3);
    return dx + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
}

StateVector step_adj(const Lorenz96Config& cfg, const StateVector& x, const StateVector& yhat) {
    cfg.validate();
    check_length(cfg, x, "state");
    check_length(cfg, yhat, "adjoint");
    const double h = cfg.dt;
    const Rk4Stages s = rk4_stage_inputs(cfg, x);

    // Output combination: x' = x + h/6 (k1 + 2 k2 + 2 k3 + k4).
    StateVector xhat = yhat;
    StateVector khat1 = (h / 6.0) * yhat;
    StateVector khat2 = (h / 3.0) * yhat;
    StateVector khat3 = (h / 3.0) * yhat;
    const StateVector khat4 = (h / 6.0) * yhat;

    // Stage 4: dk4 = L(x4) (dx + h dk3).
    StateVector stage = tendency_ad(s.x4, khat4);
    xhat += stage;
    khat3 += h * stage;
    // Stage 3: dk3 = L(x3) (dx + h/2 dk2).
    stage = tendency_ad(s.x3, khat3);
    xhat += stage;
    khat2 += 0.5 * h * stage;
    // Stage 2: dk2 = L(x2) (dx + h/2 dk1).
    stage = tendency_ad(s.x2, khat2);
    xhat += stage;
    khat1 += 0.5 * h * stage;
    // Stage 1: dk1 = L(x1) dx.
    xhat += tendency_ad(s.x1, khat1);
    return xhat;
}

JacobianMatrix reference_jacobian(const Lorenz96Config& cfg, const StateVector& x) {
    cfg.validate();
    check_length(cfg, x, "state");
    JacobianMatrix jac(cfg.n, cfg.n);
    StateVector basis = StateVector::Zero(cfg.n);
    for (int j = 0; j < cfg.n; ++j) {
        basis[j] = 1.0;
        jac.col(j) = step_tlm(cfg, x, basis);
        basis[j] = 0.0;
    }
    return jac;
}

JacobianMatrix reference_jacobian_adjoint(const Lorenz96Config& cfg, const StateVector& x) {
    cfg.validate();
    check_length(cfg, x, "state");
    JacobianMatrix jac(cfg.n, cfg.n);
    StateVector basis = StateVector::Zero(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        basis[i] = 1.0;
        jac.row(i) = step_adj(cfg, x, basis).transpose();
        basis[i] = 0.0;
    }
    return jac;
}

} // namespace lorenz96
} // namespace jenn
