#include "jenn/lbfgs.hpp"

#include "jenn/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace jenn {

void LbfgsConfig::validate() const {
    if (memory < 1) {
        throw ConfigError("LbfgsConfig: memory must be >= 1");
    }
    if (max_iters < 1) {
        throw ConfigError("LbfgsConfig: max_iters must be >= 1");
    }
    if (!(grad_tol > 0.0) || !(loss_tol > 0.0)) {
        throw ConfigError("LbfgsConfig: tolerances must be positive");
    }
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
        throw ConfigError(
            fmt::format("LbfgsConfig: need 0 < c1 < c2 < 1, got c1={} c2={}", wolfe_c1, wolfe_c2));
    }
    if (max_line_search_steps < 1) {
        throw ConfigError("LbfgsConfig: max_line_search_steps must be >= 1");
    }
}

std::string_view to_string(Termination termination) {
    switch (termination) {
    case Termination::grad_tol:
        return "grad_tol";
    case Termination::loss_tol:
        return "loss_tol";
    case Termination::max_iters:
        return "max_iters";
    case Termination::line_search_failure:
        return "line_search_failure";
    }
    return "unknown";
}

namespace detail {

double cubic_minimizer(double x1, double f1, double g1, double x2, double f2, double g2, double lo,
                       double hi) {
    if (lo > hi) {
        std::swap(lo, hi);
    }
    if (!std::isfinite(f1) || !std::isfinite(f2) || x1 == x2) {
        return 0.5 * (lo + hi);
    }
    const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    const double d2_sq = d1 * d1 - g1 * g2;
    if (d2_sq < 0.0) {
        return 0.5 * (lo + hi);
    }
    const double d2 = std::sqrt(d2_sq);
    double xmin = 0.0;
    if (x1 <= x2) {
        xmin = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
    } else {
        xmin = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
    }
    if (!std::isfinite(xmin)) {
        return 0.5 * (lo + hi);
    }
    return std::clamp(xmin, lo, hi);
}

namespace {

struct Point {
    double step;
    double value;
    double slope;
};

} // namespace

LineSearchResult strong_wolfe_search(const std::function<double(double, double&)>& phi,
                                     double value0, double slope0, double initial_step,
                                     double c1, double c2, int max_evaluations) {
    LineSearchResult result;
    Point best{0.0, value0, slope0};

    auto evaluate = [&](double step) {
        double slope = 0.0;
        double value = phi(step, slope);
        ++result.evaluations;
        if (!std::isfinite(value) || !std::isfinite(slope)) {
            // Treat as an overshoot: the bracket shrinks toward smaller steps.
            value = std::numeric_limits<double>::infinity();
            slope = std::numeric_limits<double>::quiet_NaN();
        } else if (value < best.value) {
            best = {step, value, slope};
        }
        return Point{step, value, slope};
    };
    auto armijo_fails = [&](const Point& p) { return !(p.value <= value0 + c1 * p.step * slope0); };
    auto curvature_holds = [&](const Point& p) { return std::abs(p.slope) <= -c2 * slope0; };
    auto accept = [&](const Point& p) {
        if (armijo_fails(p) || !curvature_holds(p)) {
            throw std::logic_error("strong_wolfe_search: accepted step violates the Wolfe conditions");
        }
        result.converged = true;
        result.step = p.step;
        result.value = p.value;
        result.slope = p.slope;
        return result;
    };

    // Bracketing phase.
    Point prev{0.0, value0, slope0};
    double step = initial_step;
    Point lo{};
    Point hi{};
    bool bracketed = false;
    while (result.evaluations < max_evaluations) {
        const Point cur = evaluate(step);
        if (!std::isfinite(cur.value) || armijo_fails(cur)
            || (result.evaluations > 1 && cur.value >= prev.value)) {
            lo = prev;
            hi = cur;
            bracketed = true;
            break;
        }
        if (curvature_holds(cur)) {
            return accept(cur);
        }
        if (cur.slope >= 0.0) {
            lo = cur;
            hi = prev;
            bracketed = true;
            break;
        }
        const double min_step = cur.step + 0.01 * (cur.step - prev.step);
        const double max_step = cur.step * 10.0;
        step = cubic_minimizer(prev.step, prev.value, prev.slope, cur.step, cur.value, cur.slope,
                               min_step, max_step);
        prev = cur;
    }

    // Zoom phase: lo always satisfies sufficient decrease and has the lower value.
    bool insufficient_progress = false;
    while (bracketed && result.evaluations < max_evaluations) {
        const double left = std::min(lo.step, hi.step);
        const double right = std::max(lo.step, hi.step);
        if (right - left <= 1e-14 * std::max(1.0, right)) {
            break;
        }
        double trial = std::isfinite(hi.value)
                           ? cubic_minimizer(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope,
                                             left, right)
                           : 0.5 * (left + right);
        // Keep the trial away from the bracket ends.
        const double margin = 0.1 * (right - left);
        if (std::min(right - trial, trial - left) < margin) {
            if (insufficient_progress || trial >= right || trial <= left) {
                trial = std::abs(trial - right) < std::abs(trial - left) ? right - margin : left + margin;
                insufficient_progress = false;
            } else {
                insufficient_progress = true;
            }
        } else {
            insufficient_progress = false;
        }

        const Point cur = evaluate(trial);
        if (!std::isfinite(cur.value) || armijo_fails(cur) || cur.value >= lo.value) {
            hi = cur;
        } else {
            if (curvature_holds(cur)) {
                return accept(cur);
            }
            if (cur.slope * (hi.step - lo.step) >= 0.0) {
                hi = lo;
            }
            lo = cur;
        }
    }

    result.converged = false;
    result.step = best.step;
    result.value = best.value;
    result.slope = best.slope;
    return result;
}

} // namespace detail

namespace {

struct CurvaturePair {
    Vector s;
    Vector y;
    double rho;
};

Vector two_loop_direction(const Vector& grad, const std::deque<CurvaturePair>& history) {
    Vector q = grad;
    if (history.empty()) {
        return -q;
    }
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * history[i].s.dot(q);
        q.noalias() -= alpha[i] * history[i].y;
    }
    const auto& newest = history.back();
    q *= newest.s.dot(newest.y) / newest.y.squaredNorm();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * history[i].y.dot(q);
        q.noalias() += (alpha[i] - beta) * history[i].s;
    }
    return -q;
}

} // namespace

OptimizeResult minimize(const Objective& objective, Vector x0, const LbfgsConfig& cfg) {
    cfg.validate();
    OptimizeResult out;
    OptimizeReport& report = out.report;
    Vector x = std::move(x0);
    if (!x.allFinite()) {
        throw NumericalError("minimize: initial point is not finite");
    }

    Vector grad(x.size());
    double loss = objective(x, grad);
    report.evaluations = 1;
    if (!std::isfinite(loss) || !grad.allFinite()) {
        throw NumericalError(fmt::format("minimize: objective is not finite at the initial point (loss={})", loss));
    }
    report.loss_history.push_back(loss);
    report.termination = Termination::max_iters;

    auto finish = [&](Termination why) {
        report.termination = why;
        report.final_loss = loss;
        report.final_grad_norm = grad.size() == 0 ? 0.0 : grad.cwiseAbs().maxCoeff();
        out.x = std::move(x);
        return std::move(out);
    };

    if (grad.size() == 0 || grad.cwiseAbs().maxCoeff() <= cfg.grad_tol) {
        return finish(Termination::grad_tol);
    }

    std::deque<CurvaturePair> history;
    Vector trial_x(x.size());
    Vector trial_grad(x.size());
    double trial_step = std::numeric_limits<double>::quiet_NaN();

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        Vector direction = two_loop_direction(grad, history);
        double slope0 = grad.dot(direction);
        if (!(slope0 < 0.0)) {
            history.clear();
            direction = -grad;
            slope0 = -grad.squaredNorm();
        }
        const double initial_step = history.empty() ? std::min(1.0, 1.0 / grad.lpNorm<1>()) : 1.0;

        auto phi = [&](double step, double& slope) {
            trial_x = x + step * direction;
            const double value = objective(trial_x, trial_grad);
            trial_step = step;
            slope = trial_grad.dot(direction);
            return value;
        };
        const auto ls = detail::strong_wolfe_search(phi, loss, slope0, initial_step, cfg.wolfe_c1,
                                                    cfg.wolfe_c2, cfg.max_line_search_steps);
        report.evaluations += ls.evaluations;

        if (!ls.converged) {
            if (ls.step > 0.0 && ls.value < loss) {
                // Keep the best point the search found.
                if (trial_step != ls.step) {
                    trial_x = x + ls.step * direction;
                    objective(trial_x, trial_grad);
                    ++report.evaluations;
                }
                x = trial_x;
                grad = trial_grad;
                loss = ls.value;
                ++report.iterations;
                report.loss_history.push_back(loss);
            }
            return finish(Termination::line_search_failure);
        }

        Vector s = ls.step * direction;
        Vector y = trial_grad - grad;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            history.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (history.size() > static_cast<std::size_t>(cfg.memory)) {
                history.pop_front();
            }
        }

        const double previous = loss;
        x = trial_x;
        grad = trial_grad;
        loss = ls.value;
        ++report.iterations;
        report.loss_history.push_back(loss);

        if (grad.cwiseAbs().maxCoeff() <= cfg.grad_tol) {
            return finish(Termination::grad_tol);
        }
        const double scale = std::max({std::abs(previous), std::abs(loss), 1.0});
        if (previous - loss <= cfg.loss_tol * scale) {
            return finish(Termination::loss_tol);
        }
    }
    return finish(Termination::max_iters);
}

} // namespace jenn
