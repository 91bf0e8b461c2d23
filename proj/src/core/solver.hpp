#pragma once

#include "core/types.hpp"

namespace lotfair {

// f_val + lambda1*g_val + lambda2*(-g_val)
double lagrangian_value(const DualPair& duals, double f_val, double g_val);

// grad_prev^T (x - x_prev) + (lambda1 - lambda2) * g_prev(x) + ||x - x_prev||^2 / (2 alpha)
double proximal_objective(const Vec& x, const Vec& x_prev, const Vec& grad_prev,
                          const DualPair& duals,
                          const std::function<double(const Vec&)>& gap_prev,
                          double alpha);

struct PrimalStepResult {
    Vec x;
    int inner_iters = 0;
    double inner_residual = 0.0;
    bool stalled = false;
};

// Minimizes the proximal objective over the current feasible set by projected
// gradient descent with backtracking, warm-started at project(x_prev).
PrimalStepResult primal_step(const RoundProblem& problem_prev,
                             const std::function<Vec(const Vec&)>& project_now,
                             const Vec& x_prev, const DualPair& duals,
                             const SolverConfig& config);

// (max(0, l1 + mu*g), max(0, l2 - mu*g))
DualPair dual_step(const DualPair& duals, double g_val, double mu);

// Algorithm: duals start at (0,0); x_t is chosen from round t-1 information
// (round 1 reuses the first round's cost oracle as its warm-up gradient).
Trace lotfair_run(const std::vector<RoundProblem>& stream, const SolverConfig& config,
                  const Vec& x_init);

// project(x_prev - alpha * grad f_prev(x_prev))
Vec sgd_baseline_step(const RoundProblem& problem_prev, const Vec& x_prev, double alpha);

struct InstantaneousResult {
    Vec x;
    double constraint_residual = 0.0;  // max(0, g^2 - threshold actually used)
    bool relaxed = false;              // fell back to tau
    bool infeasible = false;           // still violating after relaxation
};

// min f_t(x) over X_t subject to g_t(x)^2 <= kappa, by an augmented-Lagrangian
// projected gradient scheme; retries with the relaxed threshold tau when kappa
// fails.
InstantaneousResult instantaneous_step(const RoundProblem& problem_now, double kappa,
                                       double tau, const Vec& x_warm,
                                       const SolverConfig& config);

struct OfflineResult {
    std::vector<Vec> decisions;
    double coupling_residual = 0.0;  // |sum_t g_t(x_t)|
    bool converged = false;
};

// min sum f_t(x_t) s.t. sum g_t(x_t) = 0, x_t in X_t. Augmented Lagrangian on
// the scalar coupling constraint with block-coordinate projected gradient.
OfflineResult offline_solve(const std::vector<RoundProblem>& stream,
                            const SolverConfig& config, const Vec& x_init,
                            int outer_max_iters = 200, double coupling_tol = 1e-4);

}  // namespace lotfair
