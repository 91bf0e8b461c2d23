#include <random>

#include "core/solver.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace lotfair;

namespace {

// 1-D quadratic cost (x-a)^2 with affine gap s*x + b over a box [lo, hi]
RoundProblem quad_round(double a, double gap_slope, double gap_off, double lo,
                        double hi) {
    RoundProblem rp;
    rp.cost = [a](const Vec& x, Vec* grad) {
        double d = x[0] - a;
        if (grad) *grad = {2.0 * d};
        return d * d;
    };
    rp.gap = [gap_slope, gap_off](const Vec& x) { return gap_slope * x[0] + gap_off; };
    rp.gap_grad = [gap_slope](const Vec&) { return Vec{gap_slope}; };
    rp.project = [lo, hi](const Vec& x) { return Vec{std::clamp(x[0], lo, hi)}; };
    return rp;
}

const double kInf = 1e100;

}  // namespace

TEST_CASE("lagrangian_value") {
    CHECK(lagrangian_value({1.0, 0.5}, 2.0, 0.4) == doctest::Approx(2.2));
    CHECK(lagrangian_value({3.7, 3.7}, 5.0, 0.7) == doctest::Approx(5.0));
    CHECK(lagrangian_value({0.0, 0.0}, 0.0, 9.9) == doctest::Approx(0.0));
    CHECK_THROWS_AS(lagrangian_value({1.0, 0.0}, std::nan(""), 0.0), InvalidValueError);
}

TEST_CASE("proximal_objective") {
    auto gap_id = [](const Vec& x) { return x[0]; };
    // anchor point with zero gap
    CHECK(proximal_objective({0.0}, {0.0}, {1.0}, {2.0, 3.0}, gap_id, 0.5) ==
          doctest::Approx(0.0));
    // hand arithmetic: (1)(-1) + (2-1)(-1) + 1/(2*0.5) = -1
    CHECK(proximal_objective({-1.0}, {0.0}, {1.0}, {2.0, 1.0}, gap_id, 0.5) ==
          doctest::Approx(-1.0));
    // scalar evaluation cross-check at another point
    double x = 0.7, xp = 0.2, g = 1.3, l1 = 0.4, l2 = 0.9, al = 0.25;
    double expect = g * (x - xp) + (l1 - l2) * x + (x - xp) * (x - xp) / (2 * al);
    CHECK(proximal_objective({x}, {xp}, {g}, {l1, l2}, gap_id, al) ==
          doctest::Approx(expect));
}

TEST_CASE("primal_step closed form, unconstrained linear gap") {
    // x_t = x_prev - alpha (grad + (l1 - l2) a) = 0 - 0.5 (1 + 1) = -1
    RoundProblem prev = quad_round(0.0, 1.0, 0.0, -kInf, kInf);
    prev.cost = [](const Vec& x, Vec* grad) {
        if (grad) *grad = {1.0};
        return x[0];
    };
    SolverConfig cfg;
    cfg.alpha = 0.5;
    auto r = primal_step(prev, prev.project, {0.0}, {2.0, 1.0}, cfg);
    CHECK(r.x[0] == doctest::Approx(-1.0).epsilon(1e-6));

    // grid-search oracle on the proximal objective
    auto obj = [&](double x) {
        return 1.0 * (x - 0.0) + (2.0 - 1.0) * x + x * x / (2 * 0.5);
    };
    double xo = oracles::grid_search_1d(obj, -10, 10, 1e-4);
    CHECK(std::abs(r.x[0] - xo) < 1e-3);
}

TEST_CASE("primal_step with equal duals reduces to proximal gradient") {
    RoundProblem prev = quad_round(2.0, 1.0, -0.3, 0.0, 1.0);
    SolverConfig cfg;
    cfg.alpha = 0.1;
    Vec xp{0.5};
    Vec grad;
    prev.cost(xp, &grad);
    auto r = primal_step(prev, prev.project, xp, {0.7, 0.7}, cfg);
    Vec plain = prev.project(axpy(-cfg.alpha, grad, xp));
    CHECK(r.x[0] == doctest::Approx(plain[0]).epsilon(1e-6));
}

TEST_CASE("primal_step box projection") {
    // X = [0,1], x_prev = 0, grad f = 1, duals 0, alpha = 0.5 -> 0
    RoundProblem prev = quad_round(0.0, 1.0, 0.0, 0.0, 1.0);
    prev.cost = [](const Vec& x, Vec* grad) {
        if (grad) *grad = {1.0};
        return x[0];
    };
    SolverConfig cfg;
    cfg.alpha = 0.5;
    auto r = primal_step(prev, prev.project, {0.0}, {0.0, 0.0}, cfg);
    CHECK(r.x[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("primal_step non-increase vs warm start") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        double a = u(rng), slope = u(rng), off = u(rng);
        RoundProblem prev = quad_round(a, slope, off, -1.0, 1.0);
        SolverConfig cfg;
        cfg.alpha = 0.2;
        Vec xp{u(rng)};
        DualPair duals{std::abs(u(rng)), std::abs(u(rng))};
        Vec grad;
        prev.cost(xp, &grad);
        auto r = primal_step(prev, prev.project, xp, duals, cfg);
        double at_warm = proximal_objective(prev.project(xp), xp, grad, duals,
                                            prev.gap, cfg.alpha);
        double at_result =
            proximal_objective(r.x, xp, grad, duals, prev.gap, cfg.alpha);
        CHECK(at_result <= at_warm + cfg.inner_tol);
    }
}

TEST_CASE("dual_step") {
    auto r = dual_step({0.2, 0.0}, 0.5, 0.1);
    CHECK(r.lambda1 == doctest::Approx(0.25));
    CHECK(r.lambda2 == doctest::Approx(0.0));
    r = dual_step({1.0, 0.0}, -3.0, 0.5);
    CHECK(r.lambda1 == doctest::Approx(0.0));
    CHECK(r.lambda2 == doctest::Approx(1.5));
    r = dual_step({0.3, 0.8}, 0.0, 0.7);
    CHECK(r.lambda1 == doctest::Approx(0.3));
    CHECK(r.lambda2 == doctest::Approx(0.8));
}

TEST_CASE("lotfair_run zero gap keeps duals at zero") {
    std::vector<RoundProblem> stream;
    for (int t = 0; t < 10; ++t) stream.push_back(quad_round(0.0, 0.0, 0.0, -5, 5));
    SolverConfig cfg;
    Trace tr = lotfair_run(stream, cfg, {2.0});
    for (const auto& r : tr.records) {
        CHECK(r.lambda1 == 0.0);
        CHECK(r.lambda2 == 0.0);
    }
}

TEST_CASE("lotfair_run T=1 is a plain proximal-gradient step") {
    std::vector<RoundProblem> stream{quad_round(1.5, 1.0, 0.0, 0.0, 1.0)};
    SolverConfig cfg;
    cfg.alpha = 0.2;
    Vec x_init{0.3};
    Trace tr = lotfair_run(stream, cfg, x_init);
    Vec grad;
    stream[0].cost(x_init, &grad);
    Vec plain = stream[0].project(axpy(-cfg.alpha, grad, x_init));
    CHECK(tr.records.size() == 1);
    CHECK(tr.records[0].x[0] == doctest::Approx(plain[0]).epsilon(1e-6));
}

TEST_CASE("lotfair_run keeps cumulative gap bounded where sgd grows linearly") {
    const int T = 2000;
    std::vector<RoundProblem> stream;
    for (int t = 0; t < T; ++t) stream.push_back(quad_round(1.0, 1.0, -0.5, 0.0, 1.0));
    SolverConfig cfg;
    cfg.alpha = 0.05;
    cfg.mu = 0.05;
    Trace tr = lotfair_run(stream, cfg, {0.5});
    double cum = 0.0, cum_half = 0.0;
    for (const auto& r : tr.records) {
        cum += r.gap;
        if (r.t == T / 2) cum_half = cum;
    }
    // the equilibrium multiplier pins |sum g| near (lambda1-lambda2)/mu = 20:
    // bounded, and flat over the second half of the horizon
    CHECK(std::abs(cum) < 25.0);
    CHECK(std::abs(cum - cum_half) < 1.0);

    // unconstrained baseline converges to x=1 with gap 0.5 per round
    Vec x{0.5};
    double cum_sgd = 0.0;
    for (int t = 0; t < T; ++t) {
        x = sgd_baseline_step(stream[std::size_t(std::max(t - 1, 0))], x, cfg.alpha);
        cum_sgd += stream[std::size_t(t)].gap(x);
    }
    CHECK(cum_sgd == doctest::Approx(0.5 * T).epsilon(0.02));
}

TEST_CASE("lotfair_run invariants: nonnegative duals, Lipschitz dual step, Lemma 2") {
    std::vector<RoundProblem> stream;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int T = 200;
    for (int t = 0; t < T; ++t)
        stream.push_back(quad_round(u(rng), 1.0, 0.3 * u(rng), 0.0, 1.0));
    SolverConfig cfg;
    cfg.alpha = 0.1;
    cfg.mu = 0.2;
    Trace tr = lotfair_run(stream, cfg, {0.2});

    double max_l1 = 0.0, max_l2 = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < tr.records.size(); ++i) {
        const auto& r = tr.records[i];
        CHECK(r.lambda1 >= 0.0);
        CHECK(r.lambda2 >= 0.0);
        CHECK(r.t == int(i) + 1);
        if (i + 1 < tr.records.size()) {
            const auto& nx = tr.records[i + 1];
            double bound = cfg.mu_at(r.t) * std::abs(r.gap) + 1e-15;
            CHECK(std::abs(nx.lambda1 - r.lambda1) <= bound);
            CHECK(std::abs(nx.lambda2 - r.lambda2) <= bound);
        }
        max_l1 = std::max(max_l1, r.lambda1);
        max_l2 = std::max(max_l2, r.lambda2);
        max_diff = std::max(max_diff, std::abs(r.lambda1 - r.lambda2));
    }
    // Lemma 2 equality is exact over stored values
    CHECK(max_diff == std::max(max_l1, max_l2));
}

TEST_CASE("lotfair_run causality: permuting future rounds leaves prefix bit-identical") {
    std::vector<RoundProblem> stream;
    for (int t = 0; t < 12; ++t)
        stream.push_back(quad_round(0.1 * t, 1.0, -0.05 * t, 0.0, 1.0));
    SolverConfig cfg;
    cfg.alpha = 0.1;
    cfg.mu = 0.1;
    Trace a = lotfair_run(stream, cfg, {0.0});
    const int keep = 6;
    std::reverse(stream.begin() + keep, stream.end());
    Trace b = lotfair_run(stream, cfg, {0.0});
    for (int t = 0; t < keep; ++t)
        CHECK(a.records[std::size_t(t)].x[0] == b.records[std::size_t(t)].x[0]);
}

TEST_CASE("lotfair_run aborts on non-finite oracle output") {
    RoundProblem bad = quad_round(0.0, 1.0, 0.0, -1, 1);
    bad.cost = [](const Vec&, Vec* grad) {
        if (grad) *grad = {0.0};
        return std::numeric_limits<double>::quiet_NaN();
    };
    SolverConfig cfg;
    CHECK_THROWS_AS(lotfair_run({bad}, cfg, {0.0}), InvalidValueError);
}

TEST_CASE("sgd_baseline_step") {
    RoundProblem rp = quad_round(0.0, 0.0, 0.0, -kInf, kInf);
    rp.cost = [](const Vec& x, Vec* grad) {
        if (grad) *grad = {0.0};
        return 0.0;
    };
    CHECK(sgd_baseline_step(rp, {0.7}, 0.5)[0] == doctest::Approx(0.7));

    rp.cost = [](const Vec& x, Vec* grad) {
        if (grad) *grad = {1.0};
        return x[0];
    };
    CHECK(sgd_baseline_step(rp, {2.0}, 0.5)[0] == doctest::Approx(1.5));

    rp.project = [](const Vec& x) { return Vec{std::clamp(x[0], 0.0, 1.0)}; };
    CHECK(sgd_baseline_step(rp, {0.1}, 0.5)[0] == doctest::Approx(0.0));
}

TEST_CASE("instantaneous_step") {
    SolverConfig cfg;
    cfg.alpha = 0.2;

    // inactive constraint: unconstrained minimizer already inside
    RoundProblem rp = quad_round(0.01, 1.0, 0.0, -1.0, 1.0);
    auto r = instantaneous_step(rp, 0.04 * 0.04, 10 * 0.04 * 0.04, {0.5}, cfg);
    CHECK(r.x[0] == doctest::Approx(0.01).epsilon(1e-4));
    CHECK_FALSE(r.relaxed);

    // f = (x-1)^2, g = x, kappa = 0.04^2 -> x = 0.04
    rp = quad_round(1.0, 1.0, 0.0, -1.0, 1.0);
    r = instantaneous_step(rp, 0.04 * 0.04, 10 * 0.04 * 0.04, {0.5}, cfg);
    auto obj = [](double x) { return (x - 1) * (x - 1); };
    // grid-search oracle over the feasible slice |x| <= 0.04
    double xo = oracles::grid_search_1d(obj, -0.04, 0.04, 1e-5);
    CHECK(std::abs(r.x[0] - xo) < 1e-3);

    // vacuous constraint: same as per-round minimization
    r = instantaneous_step(rp, 1e30, 1e31, {0.5}, cfg);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("offline_solve") {
    SolverConfig cfg;
    cfg.alpha = 0.2;

    SUBCASE("coupling inactive when per-round minimizers already have zero gap") {
        std::vector<RoundProblem> stream{quad_round(0.4, 1.0, -0.4, -2, 2),
                                         quad_round(-0.3, 1.0, 0.3, -2, 2)};
        auto r = offline_solve(stream, cfg, {0.0});
        CHECK(r.decisions[0][0] == doctest::Approx(0.4).epsilon(1e-3));
        CHECK(r.decisions[1][0] == doctest::Approx(-0.3).epsilon(1e-3));
        CHECK(r.coupling_residual <= 1e-4);
    }

    SUBCASE("two-round coupled: (1, -1)") {
        std::vector<RoundProblem> stream{quad_round(1.0, 1.0, 0.0, -2, 2),
                                         quad_round(-1.0, 1.0, 0.0, -2, 2)};
        auto r = offline_solve(stream, cfg, {0.0});
        CHECK(r.coupling_residual <= 1e-4);
        // grid-search oracle over [-2,2]^2 restricted to x1 + x2 = 0
        auto [x1, x2] = oracles::grid_search_2d(
            [](double a, double b) {
                double pen = (a + b) * (a + b) * 1e6;
                return (a - 1) * (a - 1) + (b + 1) * (b + 1) + pen;
            },
            -2, 2, 1e-3);
        CHECK(std::abs(r.decisions[0][0] - x1) < 2e-3);
        CHECK(std::abs(r.decisions[1][0] - x2) < 2e-3);
    }

    SUBCASE("single round equality: f=(x-1)^2 s.t. x=0") {
        std::vector<RoundProblem> stream{quad_round(1.0, 1.0, 0.0, -2, 2)};
        auto r = offline_solve(stream, cfg, {0.5});
        CHECK(std::abs(r.decisions[0][0]) <= 2e-4);
    }
}

TEST_CASE("projection idempotence on sample projectors") {
    RoundProblem rp = quad_round(0.0, 1.0, 0.0, -0.3, 0.8);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        Vec x{u(rng)};
        Vec p = rp.project(x);
        Vec pp = rp.project(p);
        CHECK(norm2(sub(pp, p)) <= 1e-12);
    }
}
