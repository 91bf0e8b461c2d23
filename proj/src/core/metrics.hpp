#pragma once

#include "core/solver.hpp"
#include "core/types.hpp"

namespace lotfair {

// Constants feeding the closed-form multiplier/fairness/regret bounds.
struct BoundConstants {
    double G = 0.0;        // gradient bound of the costs
    double M = 0.0;        // bound on |g_t|
    double R = 0.0;        // feasible-set radius
    double epsilon = 0.0;  // interior-point margin
    double vbar_g = 0.0;   // point-wise maximum constraint variation

    bool vacuous() const { return epsilon <= vbar_g; }
};

struct VariationStats {
    double v_xstar = 0.0;  // sum ||x*_t - x*_{t-1}||
    double v_gbar = 0.0;   // sum max_x ||gbar_{t+1}(x) - gbar_t(x)||
};

enum class Comparator { Star, Offline };

// sum_t g_t(x_t)
double dynamic_fairness(const Trace& trace);

// sum_t f_t(x_t) - sum_t f_t(comparator_t); throws when that comparator
// sequence is absent from the trace.
double dynamic_regret(const Trace& trace, Comparator which);

// (1/T) sum |g_t(x_t)|
double mean_abs_violation(const Trace& trace);

struct ComparatorResult {
    std::vector<Vec> points;
    std::vector<bool> ok;  // per-round convergence of the equality-constrained solve
};

// Per round: min f_t(x) s.t. g_t(x) = 0, x in X_t (single-round offline solve).
ComparatorResult per_round_comparator(const std::vector<RoundProblem>& stream,
                                      const SolverConfig& config, const Vec& x_init,
                                      double coupling_tol = 1e-4);

// v_gbar's inner max over the feasible set is approximated by sampling
// n_samples projected points per round pair.
VariationStats variation_stats(const std::vector<RoundProblem>& stream,
                               const std::vector<Vec>& comparator_points,
                               int n_samples = 1024, std::uint64_t seed = 0,
                               double sample_radius = 1.0);

// 2 mu M + (2GR + R^2/(2 alpha) + mu M^2) / (epsilon - vbar_g)
double lambda_bar(const BoundConstants& c, double alpha, double mu);

// 2M + (2GR/mu + R^2/(2 mu alpha) + M^2) / (epsilon - vbar_g); equals
// lambda_bar / mu.
double fairness_bound(const BoundConstants& c, double alpha, double mu);

// (R/alpha) v_xstar + R^2/(2 alpha) + lambda_bar * v_gbar + mu M^2 T
//   + alpha G^2 T / 2 + mu M^2 / 2
double regret_bound(const BoundConstants& c, double alpha, double mu,
                    const VariationStats& v, int T);

struct StepsizePlan {
    double alpha = 0.0;
    double mu = 0.0;
};

// Without variations: alpha = mu = T^(-1/3). With variations:
// alpha = mu = sqrt(max(v_xstar, v_gbar) / T), floored at plan_floor.
StepsizePlan stepsize_plan(int T, const VariationStats* v = nullptr,
                           double plan_floor = 1e-4);

}  // namespace lotfair
