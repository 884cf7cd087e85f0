#pragma once

#include "jenn/types.hpp"

namespace jenn {

/// Parameters of the cyclic Lorenz 96 system and its RK4 step.
struct Lorenz96Config {
    int n = 40;
    double forcing = 8.0;
    double dt = 0.0125;

    /// Throws ConfigError unless n >= 4 and dt is positive and finite.
    void validate() const;

    bool operator==(const Lorenz96Config&) const = default;
};

namespace lorenz96 {

/// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, indices taken modulo n.
StateVector tendency(const Lorenz96Config& cfg, const StateVector& x);

/// Linearized tendency about `x` applied to `dx` (forcing drops out).
StateVector tendency_tl(const StateVector& x, const StateVector& dx);

/// Transpose of tendency_tl about `x` applied to `w`.
StateVector tendency_ad(const StateVector& x, const StateVector& w);

/// One classical fourth-order Runge-Kutta step of length cfg.dt.
/// Throws NumericalError if any stage leaves the finite range.
StateVector step_rk4(const Lorenz96Config& cfg, const StateVector& x);

/// Exact derivative of step_rk4 at `x` applied to `dx`. Each RK stage is
/// linearized, so this is the Jacobian of the discrete map, not an RK4
/// integration of the continuous tangent equation.
StateVector step_tlm(const Lorenz96Config& cfg, const StateVector& x, const StateVector& dx);

/// Transpose of step_tlm at `x` applied to `yhat`: the stage sweep run in
/// reverse with transposed coefficients. Never materializes the Jacobian.
StateVector step_adj(const Lorenz96Config& cfg, const StateVector& x, const StateVector& yhat);

/// Dense Jacobian of step_rk4 at `x`, assembled column by column from step_tlm.
JacobianMatrix reference_jacobian(const Lorenz96Config& cfg, const StateVector& x);

/// Same matrix assembled row by row from step_adj.
JacobianMatrix reference_jacobian_adjoint(const Lorenz96Config& cfg, const StateVector& x);

} // namespace lorenz96
} // namespace jenn
