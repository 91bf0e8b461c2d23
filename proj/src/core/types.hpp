#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lotfair {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec axpy(double c, const Vec& x, const Vec& y) {
    Vec r(y);
    for (std::size_t i = 0; i < x.size(); ++i) r[i] += c * x[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
    return r;
}

inline bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

struct InvalidValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Nonnegative multipliers of the two-sided long-term constraint.
struct DualPair {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

// One time slot: cost oracle, gap oracle, and the feasible-set projector.
// Oracles must be pure; a RoundProblem is shared read-only across solvers.
struct RoundProblem {
    // returns f(x); fills *grad when non-null
    std::function<double(const Vec&, Vec*)> cost;
    std::function<double(const Vec&)> gap;
    std::function<Vec(const Vec&)> gap_grad;
    std::function<Vec(const Vec&)> project;

    double cost_value(const Vec& x) const { return cost(x, nullptr); }
    bool feasible(const Vec& x, double tol) const {
        return norm2(sub(project(x), x)) <= tol;
    }
};

enum class MuSchedule { Constant, InverseCubeRoot, Custom };

struct SolverConfig {
    double alpha = 0.1;         // primal step size
    double mu = 0.1;            // dual step size (base value)
    MuSchedule mu_schedule = MuSchedule::Constant;
    std::vector<double> mu_custom;  // used when mu_schedule == Custom
    int inner_max_iters = 500;
    double inner_tol = 1e-8;
    double feas_tol = 1e-6;
    std::uint64_t seed = 0;

    // mu at round t (1-based)
    double mu_at(int t) const {
        switch (mu_schedule) {
            case MuSchedule::Constant: return mu;
            case MuSchedule::InverseCubeRoot: return mu * std::pow(double(t), -1.0 / 3.0);
            case MuSchedule::Custom:
                return mu_custom.at(std::size_t(t - 1));
        }
        return mu;
    }
};

struct TraceRecord {
    int t = 0;
    Vec x;
    double cost = 0.0;
    double gap = 0.0;
    double lambda1 = 0.0;  // multipliers used to produce x
    double lambda2 = 0.0;
    int inner_iters = 0;
    double inner_residual = 0.0;
    bool inner_stalled = false;
};

struct Trace {
    std::vector<TraceRecord> records;
    std::optional<std::vector<double>> comparator_costs_star;
    std::optional<std::vector<double>> comparator_costs_off;
};

}  // namespace lotfair
