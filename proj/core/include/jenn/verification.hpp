#pragma once

#include "jenn/lorenz96.hpp"
#include "jenn/mlp.hpp"
#include "jenn/types.hpp"

#include <vector>

namespace jenn {

/// Worst relative dot-product discrepancy
/// |<L dx, w> - <dx, L^T w>| / (||L dx|| ||w|| + eps) over a set of probes.
struct TransposeCheck {
    Eigen::Index probes = 0;
    double max_rel = 0.0;
    Eigen::Index worst_probe = -1;
};

inline constexpr double kDotProductFloor = 1e-300;

/// Probe i uses state column i % states.cols() with standard normal dx and w.
TransposeCheck physics_adjoint_identity(const Lorenz96Config& cfg, const Matrix& states, Eigen::Index probes,
                                        Seed seed);

struct TaylorCheck {
    std::vector<double> eps;
    std::vector<double> residuals; ///< ||step(x + e dx) - step(x) - e M dx||
    std::vector<double> orders;    ///< observed order between consecutive eps
    double min_order = 0.0;
    double max_order = 0.0;
};

/// Taylor remainder test of step_tlm around x along dx.
TaylorCheck taylor_test(const Lorenz96Config& cfg, const StateVector& x, const StateVector& dx,
                        const std::vector<double>& eps = {1e-2, 5e-3, 2.5e-3, 1.25e-3});

struct EmulatorTransposeCheck {
    TransposeCheck identity;
    double jacobian_max_abs = 0.0; ///< max |J_forward - J_reverse| over the probed states
};

/// JVP/VJP identity at states column i % states.cols(), and agreement of the
/// forward- and reverse-assembled Jacobians at the first `jacobian_states`.
EmulatorTransposeCheck emulator_transpose_identity(const MlpParams& params, const Matrix& states,
                                                   Eigen::Index probes, Seed seed, Eigen::Index jacobian_states = 5);

} // namespace jenn
