#include "core/metrics.hpp"

#include <algorithm>
#include <random>

namespace lotfair {

double dynamic_fairness(const Trace& trace) {
    double s = 0.0;
    for (const auto& r : trace.records) s += r.gap;
    return s;
}

double dynamic_regret(const Trace& trace, Comparator which) {
    const auto& cmp = which == Comparator::Star ? trace.comparator_costs_star
                                                : trace.comparator_costs_off;
    if (!cmp) throw InvalidValueError("dynamic_regret: comparator sequence missing");
    if (cmp->size() != trace.records.size())
        throw InvalidValueError("dynamic_regret: comparator length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < trace.records.size(); ++i)
        s += trace.records[i].cost - (*cmp)[i];
    return s;
}

double mean_abs_violation(const Trace& trace) {
    if (trace.records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : trace.records) s += std::abs(r.gap);
    return s / double(trace.records.size());
}

ComparatorResult per_round_comparator(const std::vector<RoundProblem>& stream,
                                      const SolverConfig& config, const Vec& x_init,
                                      double coupling_tol) {
    ComparatorResult out;
    out.points.reserve(stream.size());
    out.ok.reserve(stream.size());
    for (const auto& rp : stream) {
        OfflineResult r = offline_solve({rp}, config, x_init, 200, coupling_tol);
        out.points.push_back(std::move(r.decisions.front()));
        out.ok.push_back(r.converged);
    }
    return out;
}

VariationStats variation_stats(const std::vector<RoundProblem>& stream,
                               const std::vector<Vec>& comparator_points,
                               int n_samples, std::uint64_t seed,
                               double sample_radius) {
    VariationStats v;
    for (std::size_t t = 1; t < comparator_points.size(); ++t)
        v.v_xstar += norm2(sub(comparator_points[t], comparator_points[t - 1]));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-sample_radius, sample_radius);
    const std::size_t dim = comparator_points.empty() ? 1 : comparator_points[0].size();
    for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
        double worst = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            Vec x(dim);
            for (auto& xi : x) xi = unif(rng);
            x = stream[t].project(x);
            double d = stream[t + 1].gap(x) - stream[t].gap(x);
            // gbar = [g, -g], so the pointwise difference norm is sqrt(2)|dg|
            worst = std::max(worst, std::sqrt(2.0) * std::abs(d));
        }
        v.v_gbar += worst;
    }
    return v;
}

double lambda_bar(const BoundConstants& c, double alpha, double mu) {
    if (c.vacuous()) throw InvalidValueError("lambda_bar: epsilon <= vbar_g, bound vacuous");
    return 2.0 * mu * c.M +
           (2.0 * c.G * c.R + c.R * c.R / (2.0 * alpha) + mu * c.M * c.M) /
               (c.epsilon - c.vbar_g);
}

double fairness_bound(const BoundConstants& c, double alpha, double mu) {
    if (c.vacuous())
        throw InvalidValueError("fairness_bound: epsilon <= vbar_g, bound vacuous");
    return 2.0 * c.M +
           (2.0 * c.G * c.R / mu + c.R * c.R / (2.0 * mu * alpha) + c.M * c.M) /
               (c.epsilon - c.vbar_g);
}

double regret_bound(const BoundConstants& c, double alpha, double mu,
                    const VariationStats& v, int T) {
    double lbar = lambda_bar(c, alpha, mu);
    return (c.R / alpha) * v.v_xstar + c.R * c.R / (2.0 * alpha) + lbar * v.v_gbar +
           mu * c.M * c.M * T + alpha * c.G * c.G * T / 2.0 + mu * c.M * c.M / 2.0;
}

StepsizePlan stepsize_plan(int T, const VariationStats* v, double plan_floor) {
    double s;
    if (v == nullptr) {
        s = std::pow(double(T), -1.0 / 3.0);
    } else {
        s = std::sqrt(std::max(v->v_xstar, v->v_gbar) / double(T));
    }
    s = std::max(s, plan_floor);
    return {s, s};
}

}  // namespace lotfair
