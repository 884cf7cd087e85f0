#include "jenn/verification.hpp"

#include "jenn/error.hpp"
#include "jenn/rng.hpp"

#include <algorithm>
#include <cmath>

namespace jenn {

namespace {

Vector normal_vector(Rng& rng, Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = rng.normal();
    }
    return v;
}

void record(TransposeCheck& check, Eigen::Index probe, double lhs, double rhs, double scale) {
    const double rel = std::abs(lhs - rhs) / (scale + kDotProductFloor);
    if (!(rel <= check.max_rel)) {
        check.max_rel = rel;
        check.worst_probe = probe;
    }
}

void check_states(const Matrix& states, Eigen::Index rows, Eigen::Index probes) {
    if (states.cols() == 0 || states.rows() != rows) {
        throw ShapeError("transpose check: state matrix has the wrong shape");
    }
    if (probes <= 0) {
        throw ConfigError("transpose check: probes must be positive");
    }
}

} // namespace

TransposeCheck physics_adjoint_identity(const Lorenz96Config& cfg, const Matrix& states, Eigen::Index probes,
                                        Seed seed) {
    cfg.validate();
    check_states(states, cfg.n, probes);
    Rng rng(seed);
    TransposeCheck check;
    check.probes = probes;
    for (Eigen::Index p = 0; p < probes; ++p) {
        const StateVector x = states.col(p % states.cols());
        const Vector dx = normal_vector(rng, cfg.n);
        const Vector w = normal_vector(rng, cfg.n);
        const Vector mdx = lorenz96::step_tlm(cfg, x, dx);
        const Vector mtw = lorenz96::step_adj(cfg, x, w);
        record(check, p, mdx.dot(w), dx.dot(mtw), mdx.norm() * w.norm());
    }
    return check;
}

TaylorCheck taylor_test(const Lorenz96Config& cfg, const StateVector& x, const StateVector& dx,
                        const std::vector<double>& eps) {
    if (eps.size() < 2) {
        throw ConfigError("taylor_test: need at least two step sizes");
    }
    TaylorCheck t;
    t.eps = eps;
    const StateVector base = lorenz96::step_rk4(cfg, x);
    const StateVector mdx = lorenz96::step_tlm(cfg, x, dx);
    for (const double e : eps) {
        const StateVector pert = x + e * dx;
        t.residuals.push_back((lorenz96::step_rk4(cfg, pert) - base - e * mdx).norm());
    }
    for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
        t.orders.push_back(std::log(t.residuals[i] / t.residuals[i + 1]) / std::log(eps[i] / eps[i + 1]));
    }
    t.min_order = *std::min_element(t.orders.begin(), t.orders.end());
    t.max_order = *std::max_element(t.orders.begin(), t.orders.end());
    return t;
}

EmulatorTransposeCheck emulator_transpose_identity(const MlpParams& params, const Matrix& states,
                                                   Eigen::Index probes, Seed seed, Eigen::Index jacobian_states) {
    const auto& arch = params.architecture();
    check_states(states, arch.input_dim, probes);
    Rng rng(seed);
    EmulatorTransposeCheck out;
    out.identity.probes = probes;
    for (Eigen::Index p = 0; p < probes; ++p) {
        const StateVector x = states.col(p % states.cols());
        const Vector dx = normal_vector(rng, arch.input_dim);
        const Vector w = normal_vector(rng, arch.output_dim);
        const auto [y, trace] = forward(params, x);
        const Vector jdx = jvp(params, trace, dx);
        const Vector jtw = vjp(params, trace, w);
        record(out.identity, p, jdx.dot(w), dx.dot(jtw), jdx.norm() * w.norm());
    }
    const Eigen::Index jcount = std::min(jacobian_states, states.cols());
    for (Eigen::Index k = 0; k < jcount; ++k) {
        const StateVector x = states.col(k);
        const double diff = (extract_jacobian(params, x) - extract_jacobian_reverse(params, x)).cwiseAbs().maxCoeff();
        out.jacobian_max_abs = std::max(out.jacobian_max_abs, diff);
    }
    return out;
}

} // namespace jenn
