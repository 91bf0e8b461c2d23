#include "core/solver.hpp"

#include <algorithm>
#include <limits>

namespace lotfair {

double lagrangian_value(const DualPair& duals, double f_val, double g_val) {
    if (!std::isfinite(f_val) || !std::isfinite(g_val) ||
        !std::isfinite(duals.lambda1) || !std::isfinite(duals.lambda2))
        throw InvalidValueError("lagrangian_value: non-finite input");
    return f_val + duals.lambda1 * g_val + duals.lambda2 * (-g_val);
}

double proximal_objective(const Vec& x, const Vec& x_prev, const Vec& grad_prev,
                          const DualPair& duals,
                          const std::function<double(const Vec&)>& gap_prev,
                          double alpha) {
    if (!all_finite(x) || !all_finite(x_prev) || !all_finite(grad_prev))
        throw InvalidValueError("proximal_objective: non-finite input");
    Vec d = sub(x, x_prev);
    double g = gap_prev(x);
    return dot(grad_prev, d) + (duals.lambda1 - duals.lambda2) * g +
           dot(d, d) / (2.0 * alpha);
}

namespace {

struct PgdResult {
    Vec x;
    int iters = 0;
    double residual = 0.0;
    bool stalled = false;
};

// Projected gradient descent with backtracking. Residual is the gradient
// mapping ||x - project(x - step0 * grad)|| / step0, so a fixed point of the
// projected step is stationary.
PgdResult pgd_minimize(const std::function<double(const Vec&)>& obj,
                       const std::function<Vec(const Vec&)>& grad,
                       const std::function<Vec(const Vec&)>& project, const Vec& x0,
                       double step0, int max_iters, double tol) {
    PgdResult out;
    out.x = project(x0);
    double fx = obj(out.x);
    double residual = std::numeric_limits<double>::infinity();
    double step_start = step0;  // carried across iterations: backtracking is
                                // one projection per halving, so start near
                                // the last accepted step
    for (int it = 0; it < max_iters; ++it) {
        Vec g = grad(out.x);
        Vec probe = project(axpy(-step0, g, out.x));
        residual = norm2(sub(out.x, probe)) / step0;
        out.iters = it;
        out.residual = residual;
        if (residual <= tol) return out;

        double step = step_start;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            Vec y = (step == step0 && bt == 0) ? probe
                                               : project(axpy(-step, g, out.x));
            double fy = obj(y);
            Vec d = sub(y, out.x);
            if (std::isfinite(fy) && fy <= fx - 1e-4 / step * dot(d, d)) {
                out.x = std::move(y);
                fx = fy;
                moved = true;
                step_start = std::min(step0, step * 2.0);
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            out.stalled = true;
            return out;
        }
    }
    // recompute final residual
    Vec g = grad(out.x);
    Vec probe = project(axpy(-step0, g, out.x));
    out.residual = norm2(sub(out.x, probe)) / step0;
    out.iters = max_iters;
    if (out.residual > tol) out.stalled = true;
    return out;
}

}  // namespace

PrimalStepResult primal_step(const RoundProblem& problem_prev,
                             const std::function<Vec(const Vec&)>& project_now,
                             const Vec& x_prev, const DualPair& duals,
                             const SolverConfig& config) {
    if (duals.lambda1 < 0 || duals.lambda2 < 0)
        throw InvalidValueError("primal_step: negative dual");
    if (!all_finite(x_prev)) throw InvalidValueError("primal_step: non-finite x_prev");

    Vec grad_prev(x_prev.size(), 0.0);
    problem_prev.cost(x_prev, &grad_prev);
    const double lam = duals.lambda1 - duals.lambda2;
    const double alpha = config.alpha;

    auto obj = [&](const Vec& x) {
        Vec d = sub(x, x_prev);
        return dot(grad_prev, d) + lam * problem_prev.gap(x) + dot(d, d) / (2.0 * alpha);
    };
    auto grad = [&](const Vec& x) {
        Vec g = problem_prev.gap_grad(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = grad_prev[i] + lam * g[i] + (x[i] - x_prev[i]) / alpha;
        return g;
    };

    PgdResult r = pgd_minimize(obj, grad, project_now, x_prev, alpha,
                               config.inner_max_iters, config.inner_tol);
    if (!all_finite(r.x)) throw InvalidValueError("primal_step: non-finite iterate");
    return {std::move(r.x), r.iters, r.residual, r.stalled};
}

DualPair dual_step(const DualPair& duals, double g_val, double mu) {
    return {std::max(0.0, duals.lambda1 + mu * g_val),
            std::max(0.0, duals.lambda2 - mu * g_val)};
}

Trace lotfair_run(const std::vector<RoundProblem>& stream, const SolverConfig& config,
                  const Vec& x_init) {
    if (stream.empty()) throw InvalidValueError("lotfair_run: empty stream");
    Trace trace;
    trace.records.reserve(stream.size());
    DualPair duals{0.0, 0.0};
    Vec x = stream.front().project(x_init);
    for (int t = 1; t <= int(stream.size()); ++t) {
        // Round 1 warms up on its own cost oracle (no round 0 exists); from
        // t=2 on, only information revealed through round t-1 is used.
        const RoundProblem& prev = stream[std::size_t(std::max(t - 2, 0))];
        const RoundProblem& now = stream[std::size_t(t - 1)];
        PrimalStepResult step = primal_step(prev, now.project, x, duals, config);
        x = step.x;

        double f_val = now.cost_value(x);
        double g_val = now.gap(x);
        if (!std::isfinite(f_val) || !std::isfinite(g_val))
            throw InvalidValueError("lotfair_run: non-finite cost/gap at t=" +
                                    std::to_string(t));
        TraceRecord rec;
        rec.t = t;
        rec.x = x;
        rec.cost = f_val;
        rec.gap = g_val;
        rec.lambda1 = duals.lambda1;
        rec.lambda2 = duals.lambda2;
        rec.inner_iters = step.inner_iters;
        rec.inner_residual = step.inner_residual;
        rec.inner_stalled = step.stalled;
        trace.records.push_back(std::move(rec));

        duals = dual_step(duals, g_val, config.mu_at(t));
    }
    return trace;
}

Vec sgd_baseline_step(const RoundProblem& problem_prev, const Vec& x_prev, double alpha) {
    Vec grad(x_prev.size(), 0.0);
    problem_prev.cost(x_prev, &grad);
    return problem_prev.project(axpy(-alpha, grad, x_prev));
}

InstantaneousResult instantaneous_step(const RoundProblem& problem_now, double kappa,
                                       double tau, const Vec& x_warm,
                                       const SolverConfig& config) {
    // augmented Lagrangian on the scalar inequality g(x)^2 - threshold <= 0,
    // penalty escalated when the violation stops shrinking
    auto solve_with = [&](double threshold, const Vec& start) {
        Vec x = problem_now.project(start);
        double nu = 0.0;
        double rho = 10.0;
        double prev_viol = std::numeric_limits<double>::infinity();
        Vec x_last_outer = x;
        int plateau = 0;
        for (int outer = 0; outer < 40; ++outer) {
            auto penalty_slope = [&](double c) { return std::max(0.0, nu + rho * c); };
            auto obj = [&](const Vec& y) {
                double g = problem_now.gap(y);
                double s = penalty_slope(g * g - threshold);
                return problem_now.cost_value(y) + (s * s - nu * nu) / (2.0 * rho);
            };
            auto grad = [&](const Vec& y) {
                Vec gf(y.size(), 0.0);
                problem_now.cost(y, &gf);
                double g = problem_now.gap(y);
                double s = penalty_slope(g * g - threshold);
                if (s > 0.0) {
                    Vec gg = problem_now.gap_grad(y);
                    double c = s * 2.0 * g;
                    for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += c * gg[i];
                }
                return gf;
            };
            PgdResult r = pgd_minimize(obj, grad, problem_now.project, x, config.alpha,
                                       config.inner_max_iters, config.inner_tol);
            x = std::move(r.x);
            double g = problem_now.gap(x);
            double c = g * g - threshold;
            nu = std::max(0.0, nu + rho * c);
            double viol = std::max(0.0, c);
            if (viol <= config.feas_tol) break;
            // penalty saturated: further outers just re-solve the same point
            double moved = norm2(sub(x, x_last_outer));
            if (outer > 0 && moved <= 1e-7 * std::max(1.0, norm2(x))) break;
            x_last_outer = x;
            // a violation that escalation cannot dent means the threshold is
            // unreachable inside X_t; stop instead of stiffening forever
            plateau = (viol > 0.9 * prev_viol) ? plateau + 1 : 0;
            if (plateau >= 3) break;
            if (viol > 0.25 * prev_viol) rho *= 10.0;
            prev_viol = viol;
        }
        return x;
    };

    InstantaneousResult out;
    out.x = solve_with(kappa, x_warm);
    double g = problem_now.gap(out.x);
    if (g * g <= kappa + config.feas_tol) {
        out.constraint_residual = std::max(0.0, g * g - kappa);
        return out;
    }
    // time-varying fallback: relax the threshold to tau
    out.relaxed = true;
    out.x = solve_with(tau, out.x);
    g = problem_now.gap(out.x);
    out.constraint_residual = std::max(0.0, g * g - tau);
    out.infeasible = out.constraint_residual > config.feas_tol;
    return out;
}

OfflineResult offline_solve(const std::vector<RoundProblem>& stream,
                            const SolverConfig& config, const Vec& x_init,
                            int outer_max_iters, double coupling_tol) {
    const std::size_t T = stream.size();
    OfflineResult out;
    out.decisions.resize(T);
    std::vector<double> gaps(T, 0.0);
    double coupling = 0.0;

    for (std::size_t t = 0; t < T; ++t) {
        out.decisions[t] = stream[t].project(x_init);
        gaps[t] = stream[t].gap(out.decisions[t]);
        coupling += gaps[t];
    }

    // The coupling constraint is a single scalar, so dualize it: for a fixed
    // multiplier m the blocks decouple into independent solves of
    // min f_t + m g_t over X_t, and h(m) = sum_t g_t(x_t(m)) is nonincreasing
    // in m (convex costs). Root-find h(m) = 0 by bracketing and bisection;
    // each evaluation is one pass of warm-started block solves. This avoids
    // the Gauss-Seidel staleness and stiffness of a penalty formulation.
    auto eval = [&](double m) {
        coupling = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const RoundProblem& rp = stream[t];
            auto obj = [&](const Vec& y) { return rp.cost_value(y) + m * rp.gap(y); };
            auto grad = [&](const Vec& y) {
                Vec gf(y.size(), 0.0);
                rp.cost(y, &gf);
                Vec gg = rp.gap_grad(y);
                for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += m * gg[i];
                return gf;
            };
            PgdResult r = pgd_minimize(obj, grad, rp.project, out.decisions[t],
                                       config.alpha, config.inner_max_iters,
                                       config.inner_tol);
            out.decisions[t] = std::move(r.x);
            gaps[t] = rp.gap(out.decisions[t]);
            coupling += gaps[t];
        }
        return coupling;
    };

    int evals_left = outer_max_iters;
    double m_lo = 0.0, m_hi = 0.0;
    double h = eval(0.0);
    --evals_left;
    double best_m = 0.0, best_h = h;
    if (std::abs(h) > coupling_tol) {
        // expand one side until h changes sign (h is nonincreasing in m)
        double step = 1.0;
        bool bracketed = false;
        while (evals_left > 0 && step <= 1e9) {
            double m = (h > 0 ? step : -step);
            double hm = eval(m);
            --evals_left;
            if (std::abs(hm) < std::abs(best_h)) best_h = hm, best_m = m;
            if ((h > 0) != (hm > 0) || hm == 0.0) {
                m_lo = std::min(0.0, m);
                m_hi = std::max(0.0, m);
                bracketed = true;
                break;
            }
            step *= 4.0;
        }
        while (bracketed && evals_left > 0 && std::abs(best_h) > coupling_tol) {
            double m = 0.5 * (m_lo + m_hi);
            double hm = eval(m);
            --evals_left;
            if (std::abs(hm) < std::abs(best_h)) best_h = hm, best_m = m;
            if (hm > 0)
                m_lo = m;
            else
                m_hi = m;
            if (m_hi - m_lo <= 1e-4 * std::max(1.0, std::abs(m))) break;
        }
        if (bracketed && std::abs(best_h) > coupling_tol) {
            // with affine per-round costs h is a step function and the root
            // can sit inside a jump, where no single multiplier meets the
            // tolerance; finish with augmented-Lagrangian sweeps started at
            // the localized multiplier, whose quadratic term lets the blocks
            // split the residual across the jump
            double nu = 0.5 * (m_lo + m_hi);
            double beta = 1.0;
            auto sweep = [&]() {
                double moved = 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    const RoundProblem& rp = stream[t];
                    const double rest = coupling - gaps[t];
                    auto obj = [&](const Vec& y) {
                        double c = rest + rp.gap(y);
                        return rp.cost_value(y) + nu * c + 0.5 * beta * c * c;
                    };
                    auto grad = [&](const Vec& y) {
                        Vec gf(y.size(), 0.0);
                        rp.cost(y, &gf);
                        double mult = nu + beta * (rest + rp.gap(y));
                        Vec gg = rp.gap_grad(y);
                        for (std::size_t i = 0; i < gf.size(); ++i)
                            gf[i] += mult * gg[i];
                        return gf;
                    };
                    PgdResult r = pgd_minimize(obj, grad, rp.project,
                                               out.decisions[t], config.alpha,
                                               config.inner_max_iters,
                                               config.inner_tol);
                    moved = std::max(moved, norm2(sub(r.x, out.decisions[t])));
                    out.decisions[t] = std::move(r.x);
                    gaps[t] = rp.gap(out.decisions[t]);
                    coupling = rest + gaps[t];
                }
                return moved;
            };
            // flat cost directions keep the decisions wandering even once the
            // coupling has settled, so stop on a stable coupling rather than
            // on the movement
            double prev = std::numeric_limits<double>::infinity();
            int stable = 0;
            while (evals_left-- > 0) {
                sweep();
                nu += beta * coupling;
                stable = (std::abs(coupling) <= coupling_tol) ? stable + 1 : 0;
                if (stable >= 3) break;
                if (std::abs(coupling) > 0.5 * prev && beta < 64.0) beta *= 2.0;
                prev = std::abs(coupling);
            }
        } else {
            // leave the decisions at the best multiplier seen
            eval(best_m);
        }
    }
    out.coupling_residual = std::abs(coupling);
    out.converged = out.coupling_residual <= coupling_tol;
    return out;
}

}  // namespace lotfair
