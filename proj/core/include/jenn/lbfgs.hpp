#pragma once

#include "jenn/types.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace jenn {

struct LbfgsConfig {
    int memory = 10;                ///< stored (s, y) curvature pairs
    int max_iters = 2000;
    double grad_tol = 1e-8;         ///< on the sup-norm of the gradient
    double loss_tol = 1e-12;        ///< on the relative loss decrease of one iteration
    double wolfe_c1 = 1e-4;         ///< sufficient decrease
    double wolfe_c2 = 0.9;          ///< curvature
    int max_line_search_steps = 25; ///< objective evaluations per line search

    void validate() const;
};

enum class Termination { grad_tol, loss_tol, max_iters, line_search_failure };

std::string_view to_string(Termination termination);

struct OptimizeReport {
    int iterations = 0;
    int evaluations = 0;
    double final_loss = 0.0;
    double final_grad_norm = 0.0; ///< sup-norm
    Termination termination = Termination::max_iters;
    std::vector<double> loss_history; ///< loss at x0, then after each accepted step
};

struct OptimizeResult {
    Vector x;
    OptimizeReport report;
};

/// Evaluates the loss at `x` and writes its gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Full-batch L-BFGS (two-loop recursion) with a strong Wolfe line search.
/// Throws NumericalError if the objective is not finite at x0.
OptimizeResult minimize(const Objective& objective, Vector x0, const LbfgsConfig& cfg);

namespace detail {

/// Line search restricted to phi(alpha) = f(x + alpha d).
struct LineSearchResult {
    bool converged = false; ///< both strong Wolfe conditions hold at `step`
    double step = 0.0;
    double value = 0.0;
    double slope = 0.0;     ///< phi'(step)
    int evaluations = 0;
};

/// `phi(alpha, slope_out)` returns phi(alpha) and writes phi'(alpha).
/// `value0`/`slope0` are phi(0) and phi'(0) < 0. On failure the returned step
/// is the best point with phi < phi(0) seen, or 0 if there was none.
LineSearchResult strong_wolfe_search(const std::function<double(double, double&)>& phi,
                                     double value0, double slope0, double initial_step,
                                     double c1, double c2, int max_evaluations);

/// Minimizer of the cubic interpolating (x1, f1, g1) and (x2, f2, g2),
/// clamped to the interval between `lo` and `hi`; bisects when the cubic
/// has no real minimizer.
double cubic_minimizer(double x1, double f1, double g1, double x2, double f2, double g2, double lo,
                       double hi);

} // namespace detail
} // namespace jenn
