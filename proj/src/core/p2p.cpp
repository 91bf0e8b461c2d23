#include "core/p2p.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace lotfair::p2p {

Eigen::MatrixXd isf_matrix(const GridModel& grid) {
    const int n = grid.n_nodes;
    const int nl = int(grid.lines.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nl, n);
    Eigen::VectorXd b(nl);
    for (int l = 0; l < nl; ++l) {
        const Line& ln = grid.lines[std::size_t(l)];
        A(l, ln.from) = 1.0;
        A(l, ln.to) = -1.0;
        b[l] = ln.susceptance;
    }
    Eigen::MatrixXd C = A.transpose() * b.asDiagonal() * A;

    // delete slack row/column
    const int s = grid.slack_node;
    Eigen::MatrixXd Cr(n - 1, n - 1);
    for (int i = 0, ri = 0; i < n; ++i) {
        if (i == s) continue;
        for (int j = 0, rj = 0; j < n; ++j) {
            if (j == s) continue;
            Cr(ri, rj) = C(i, j);
            ++rj;
        }
        ++ri;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Cr);
    if (!lu.isInvertible())
        throw InvalidValueError("isf_matrix: reduced susceptance matrix singular (grid disconnected?)");

    Eigen::MatrixXd Ar(nl, n - 1);
    for (int j = 0, rj = 0; j < n; ++j) {
        if (j == s) continue;
        Ar.col(rj++) = A.col(j);
    }
    Eigen::MatrixXd phi_r = b.asDiagonal() * Ar * lu.inverse();

    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(nl, n);
    for (int j = 0, rj = 0; j < n; ++j) {
        if (j == s) continue;
        phi.col(j) = phi_r.col(rj++);
    }
    return phi;
}

Eigen::VectorXd ptdf(const Eigen::MatrixXd& phi, int i, int j) {
    return phi.col(i) - phi.col(j);
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& phi) {
    const int n = int(phi.cols());
    Eigen::MatrixXd D(n, n);
    Eigen::VectorXd colsum = phi.colwise().sum();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D(i, j) = colsum[i] - colsum[j];
    return D;
}

Eigen::MatrixXd unflatten(const Vec& x, int n) {
    Eigen::MatrixXd X(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = x[std::size_t(i * n + j)];
    return X;
}

Vec flatten(const Eigen::MatrixXd& X) {
    const int n = int(X.rows());
    Vec x(std::size_t(n) * std::size_t(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) x[std::size_t(i * n + j)] = X(i, j);
    return x;
}

Eigen::VectorXd line_flows(const Eigen::MatrixXd& X, const MarketRound& round,
                           const Eigen::MatrixXd& phi) {
    const int n = int(X.rows());
    Eigen::VectorXd flows = Eigen::VectorXd::Zero(phi.rows());
    for (int i = 0; i < n; ++i) {
        if (!round.is_producer(i)) continue;
        for (int j = 0; j < n; ++j) {
            if (round.is_producer(j)) continue;
            if (X(i, j) == 0.0) continue;
            flows += (phi.col(i) - phi.col(j)) * X(i, j);
        }
    }
    return flows;
}

double market_cost(const Eigen::MatrixXd& X, const MarketRound& round,
                   const Eigen::MatrixXd& dist, Vec* grad) {
    const int n = int(X.rows());
    std::vector<int> wc = round.consumers();
    if (grad) grad->assign(std::size_t(n) * std::size_t(n), 0.0);
    if (wc.empty()) return 0.0;  // no consumers this round

    const double p = round.utility_price;
    const double gamma = round.wheeling_rate;
    const double inv = 1.0 / double(wc.size());
    double value = 0.0;
    for (int i : wc) {
        double rowsum = X.row(i).sum();
        double peer = 0.0;
        for (int j = 0; j < n; ++j) peer += round.peer_prices(i, j) * X(i, j);
        value -= (round.surplus[i] - rowsum) * p + peer;
        for (int j = 0; j < n; ++j) {
            double fee = gamma * dist(i, j);
            value -= fee * X(i, j);
            if (grad)
                (*grad)[std::size_t(i * n + j)] +=
                    inv * (p - round.peer_prices(i, j) - fee);
        }
    }
    return value * inv;
}

double satisfaction_gap(const Eigen::MatrixXd& X, const MarketRound& round,
                        const std::vector<int>& groups, Vec* grad,
                        const GapOptions& opts) {
    const int n = int(X.rows());
    if (grad) grad->assign(std::size_t(n) * std::size_t(n), 0.0);
    double denom[2] = {0.0, 0.0};
    if (opts.consumer_subset_denominator) {
        for (int i = 0; i < n; ++i)
            if (!round.is_producer(i)) denom[groups[std::size_t(i)]] += 1.0;
    } else {
        for (int i = 0; i < n; ++i) denom[groups[std::size_t(i)]] += 1.0;
    }
    if (denom[0] <= 0.0 || denom[1] <= 0.0)
        throw InvalidValueError("satisfaction_gap: empty group");

    double g = 0.0;
    for (int i = 0; i < n; ++i) {
        if (round.is_producer(i)) continue;
        if (round.demand[i] <= 0.0)
            throw InvalidValueError("satisfaction_gap: consumer with nonpositive demand");
        double sign = groups[std::size_t(i)] == 0 ? 1.0 : -1.0;
        double w = sign / denom[groups[std::size_t(i)]];
        double deficit = round.surplus[i] - X.row(i).sum();
        g += w * deficit / round.demand[i];
        if (grad) {
            double c = -w / round.demand[i];
            for (int j = 0; j < n; ++j) (*grad)[std::size_t(i * n + j)] = c;
        }
    }
    return g;
}

namespace {

struct AffineBand {
    Eigen::MatrixXd coeff;  // inner product coefficients over X
    double offset = 0.0;    // band is |coeff . X + offset| <= hi
    double hi = 0.0;
    double norm_sq = 0.0;
};

void project_band(Eigen::MatrixXd& X, const AffineBand& band) {
    if (band.norm_sq <= 0.0) return;
    double v = band.coeff.cwiseProduct(X).sum() + band.offset;
    double excess = 0.0;
    if (v > band.hi)
        excess = v - band.hi;
    else if (v < -band.hi)
        excess = v + band.hi;
    if (excess != 0.0) X -= (excess / band.norm_sq) * band.coeff;
}

void project_box(Eigen::MatrixXd& X, const MarketRound& round) {
    const int n = int(X.rows());
    for (int i = 0; i < n; ++i) {
        double lo = round.is_producer(i) ? 0.0 : round.surplus[i];
        double hi = round.is_producer(i) ? round.surplus[i] : 0.0;
        for (int j = 0; j < n; ++j)
            X(i, j) = (i == j) ? 0.0 : std::clamp(X(i, j), lo, hi);
    }
}

void project_row_budget(Eigen::MatrixXd& X, const MarketRound& round) {
    const int n = int(X.rows());
    for (int i = 0; i < n; ++i) {
        double lo = round.is_producer(i) ? 0.0 : round.surplus[i];
        double hi = round.is_producer(i) ? round.surplus[i] : 0.0;
        double s = X.row(i).sum();
        double shift = 0.0;
        if (s > hi)
            shift = (s - hi) / double(n);
        else if (s < lo)
            shift = (s - lo) / double(n);
        if (shift != 0.0) X.row(i).array() -= shift;
    }
}

std::vector<AffineBand> line_bands(const MarketRound& round, const GridModel& grid,
                                   const Eigen::MatrixXd& phi) {
    const int n = grid.n_nodes;
    std::vector<AffineBand> bands;
    bands.reserve(grid.lines.size());
    for (int l = 0; l < int(grid.lines.size()); ++l) {
        AffineBand b;
        b.coeff = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            if (!round.is_producer(i)) continue;
            for (int j = 0; j < n; ++j) {
                if (round.is_producer(j)) continue;
                b.coeff(i, j) = phi(l, i) - phi(l, j);
            }
        }
        b.hi = grid.lines[std::size_t(l)].limit;
        b.norm_sq = b.coeff.squaredNorm();
        bands.push_back(std::move(b));
    }
    return bands;
}

AffineBand fairness_band(const MarketRound& round, const GridModel& grid,
                         double kappa, double tau) {
    const int n = grid.n_nodes;
    AffineBand b;
    Vec g;
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    b.offset = satisfaction_gap(zero, round, grid.groups, &g);
    b.coeff = unflatten(g, n);
    b.hi = std::sqrt(kappa + tau);  // (13h): g^2 - kappa <= tau
    b.norm_sq = b.coeff.squaredNorm();
    return b;
}

}  // namespace

Eigen::MatrixXd feasible_project(const Eigen::MatrixXd& X0, const MarketRound& round,
                                 const GridModel& grid, const Eigen::MatrixXd& phi,
                                 const ProjectOptions& opts) {
    const int n = grid.n_nodes;
    std::vector<AffineBand> lines = line_bands(round, grid, phi);
    AffineBand fair;
    if (opts.fairness_cap) fair = fairness_band(round, grid, opts.kappa, opts.tau);

    auto dykstra = [&](Eigen::MatrixXd X, bool with_fair, int max_sweeps) {
        const std::size_t n_blocks = 2 + lines.size() + (with_fair ? 1 : 0) + 1;
        std::vector<Eigen::MatrixXd> corr(n_blocks, Eigen::MatrixXd::Zero(n, n));
        double best_res = std::numeric_limits<double>::infinity();
        int since_improved = 0;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            Eigen::MatrixXd before = X;
            std::size_t k = 0;
            auto apply = [&](auto&& proj) {
                Eigen::MatrixXd y = X + corr[k];
                Eigen::MatrixXd z = y;
                proj(z);
                corr[k] = y - z;
                X = std::move(z);
                ++k;
            };
            apply([&](Eigen::MatrixXd& Z) { project_box(Z, round); });
            apply([&](Eigen::MatrixXd& Z) { project_row_budget(Z, round); });
            for (const auto& band : lines)
                apply([&](Eigen::MatrixXd& Z) { project_band(Z, band); });
            if (with_fair)
                apply([&](Eigen::MatrixXd& Z) { project_band(Z, fair); });
            // antisymmetry last so (13f) holds tightest
            apply([&](Eigen::MatrixXd& Z) { Z = 0.5 * (Z - Z.transpose().eval()); });

            FeasReport rep = feasibility_report(X, round, grid, phi, opts);
            double res = rep.max_residual();
            if (with_fair) res = std::max(res, rep.fairness);
            if (res <= opts.feas_tol && (X - before).norm() <= opts.feas_tol) break;
            // an empty intersection (unreachable fairness band) leaves the
            // residual flat; bail out instead of burning the sweep budget
            if (res < best_res * (1.0 - 1e-3)) {
                best_res = res;
                since_improved = 0;
            } else if (++since_improved >= 15) {
                break;
            }
        }
        return X;
    };

    Eigen::MatrixXd X = dykstra(X0, opts.fairness_cap, opts.max_sweeps);
    if (opts.fairness_cap &&
        feasibility_report(X, round, grid, phi, opts).max_residual() > opts.feas_tol) {
        // an unreachable fairness band (13h) can leave the cycle stalled; the
        // hard blocks (13a)-(13g) always intersect (X = 0), so finish on them
        // alone and let the caller read the fairness residual off the report
        X = dykstra(X, false, opts.max_sweeps);
    }
    return X;
}

FeasReport feasibility_report(const Eigen::MatrixXd& X, const MarketRound& round,
                              const GridModel& grid, const Eigen::MatrixXd& phi,
                              const ProjectOptions& opts) {
    const int n = grid.n_nodes;
    FeasReport rep;
    for (int i = 0; i < n; ++i) {
        double lo = round.is_producer(i) ? 0.0 : round.surplus[i];
        double hi = round.is_producer(i) ? round.surplus[i] : 0.0;
        for (int j = 0; j < n; ++j) {
            double v = X(i, j);
            if (i == j)
                rep.box = std::max(rep.box, std::abs(v));
            else
                rep.box = std::max({rep.box, lo - v, v - hi});
        }
        double s = X.row(i).sum();
        rep.row_budget = std::max({rep.row_budget, lo - s, s - hi});
    }
    rep.antisym = (X + X.transpose()).cwiseAbs().maxCoeff();
    Eigen::VectorXd flows = line_flows(X, round, phi);
    for (int l = 0; l < int(grid.lines.size()); ++l)
        rep.line = std::max(rep.line,
                            std::abs(flows[l]) - grid.lines[std::size_t(l)].limit);
    rep.line = std::max(rep.line, 0.0);
    double g = satisfaction_gap(X, round, grid.groups, nullptr);
    rep.fairness = std::max(0.0, g * g - opts.kappa - opts.tau);
    return rep;
}

namespace {

std::mt19937_64 round_rng(std::uint64_t seed, int t) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                      std::uint32_t(t), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

Eigen::MatrixXd gen_prices(std::mt19937_64& rng, const GenParams& p,
                           const GridModel& grid) {
    const int n = grid.n_nodes;
    std::uniform_real_distribution<double> jitter(-p.price_spread, p.price_spread);
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double base = p.price_base + jitter(rng);
            if (grid.groups[std::size_t(i)] == grid.groups[std::size_t(j)])
                base *= 1.0 - p.intra_discount;
            e(i, j) = base;
        }
    }
    return e;
}

}  // namespace

MarketRound gen_random_round(const GenParams& params, const GridModel& grid,
                             std::uint64_t seed, int t) {
    const int n = grid.n_nodes;
    auto rng = round_rng(seed, t);
    std::normal_distribution<double> solar(params.solar_mean, params.solar_std);
    std::uniform_real_distribution<double> wind(params.wind_lo, params.wind_hi);
    std::normal_distribution<double> dem(params.demand_mean, params.demand_std);

    MarketRound r;
    r.t = t;
    r.demand.resize(n);
    r.surplus.resize(n);
    for (int i = 0; i < n; ++i) {
        double supply = std::max(0.0, solar(rng)) + wind(rng);
        double d = std::max(params.demand_min, dem(rng));
        r.demand[i] = d;
        r.surplus[i] = supply - d;
    }
    r.peer_prices = gen_prices(rng, params, grid);
    r.utility_price = params.utility_price;
    r.wheeling_rate = params.wheeling_rate;
    return r;
}

MarketRound gen_timevarying_round(const GenParams& params, const GridModel& grid,
                                  std::uint64_t seed, int t) {
    const int n = grid.n_nodes;
    auto rng = round_rng(seed, t);
    std::normal_distribution<double> noise(0.0, params.cos_noise_std);

    MarketRound r;
    r.t = t;
    r.demand.resize(n);
    r.surplus.resize(n);
    double c = std::cos(params.angular_freq * double(t));
    for (int i = 0; i < n; ++i) {
        // node-dependent amplitude; group 0 leans to net deficit
        double a = params.cos_a * (1.0 + 0.1 * double(i % 3));
        double b = params.cos_b * (i % 2 == 0 ? 1.0 : -1.0);
        double supply = std::max(0.0, a + b * c + noise(rng));
        double bias = grid.groups[std::size_t(i)] == 0 ? 0.4 : -0.4;
        double d = std::max(params.demand_min,
                            params.demand_mean + bias + noise(rng));
        r.demand[i] = d;
        r.surplus[i] = supply - d;
    }
    r.peer_prices = gen_prices(rng, params, grid);
    r.utility_price = params.utility_price;
    r.wheeling_rate = params.wheeling_rate;
    return r;
}

std::vector<MarketRound> oasis_ingest(const std::string& path, const GridModel& grid,
                                      const OasisOptions& opts) {
    std::ifstream in(path);
    if (!in) throw InvalidValueError("oasis_ingest: cannot open " + path);
    const int n = grid.n_nodes;
    std::vector<MarketRound> out;
    std::string line;
    int t = 0;
    int skipped = 0;
    std::mt19937_64 rng(opts.seed);
    std::gamma_distribution<double> gamma_draw(opts.dirichlet_conc, 1.0);
    auto dirichlet = [&]() {
        Eigen::VectorXd w(n);
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            w[i] = gamma_draw(rng);
            s += w[i];
        }
        return Eigen::VectorXd(w / s);
    };
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string ts, f1, f2, f3, f4;
        if (!std::getline(ss, ts, ',') || !std::getline(ss, f1, ',') ||
            !std::getline(ss, f2, ',') || !std::getline(ss, f3, ',') ||
            !std::getline(ss, f4)) {
            ++skipped;
            continue;
        }
        double total_demand, solar, wind, price;
        try {
            total_demand = std::stod(f1);
            solar = std::stod(f2);
            wind = std::stod(f3);
            price = std::stod(f4);
        } catch (const std::exception&) {
            if (first) { first = false; continue; }  // header row
            ++skipped;
            continue;
        }
        first = false;

        MarketRound r;
        r.t = ++t;
        Eigen::VectorXd wd = dirichlet(), ws = dirichlet(), ww = dirichlet();
        r.demand = wd * (total_demand * opts.frac);
        Eigen::VectorXd supply = ws * solar + ww * wind;
        r.surplus = supply - r.demand;
        r.peer_prices = gen_prices(rng, opts.prices, grid);
        r.utility_price = price;
        r.wheeling_rate = opts.prices.wheeling_rate;
        out.push_back(std::move(r));
    }
    if (out.size() < 2) throw InvalidValueError("oasis_ingest: fewer than 2 usable rows");
    return out;
}

GridModel load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidValueError("load_grid: cannot open " + path);
    GridModel g;
    std::string line;
    int max_node = -1;
    std::vector<std::pair<int, int>> group_entries;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "slack") {
            ss >> g.slack_node;
        } else if (tok == "group") {
            int node, grp;
            ss >> node >> grp;
            group_entries.emplace_back(node, grp);
            max_node = std::max(max_node, node);
        } else {
            std::stringstream ls(line);
            Line ln;
            char comma;
            if (ls >> ln.from >> comma >> ln.to >> comma >> ln.susceptance >> comma >>
                ln.limit) {
                g.lines.push_back(ln);
                max_node = std::max({max_node, ln.from, ln.to});
            }
        }
    }
    g.n_nodes = max_node + 1;
    g.groups.assign(std::size_t(g.n_nodes), 0);
    for (auto [node, grp] : group_entries) g.groups[std::size_t(node)] = grp;
    if (group_entries.empty())
        for (int i = 0; i < g.n_nodes; ++i) g.groups[std::size_t(i)] = i % 2;
    return g;
}

GridModel grid14(double line_limit) {
    // standard 14-bus topology (0-based), susceptance = 1/x
    static const double x[20] = {
        0.05917, 0.22304, 0.19797, 0.17632, 0.17388, 0.17103, 0.04211,
        0.20912, 0.55618, 0.25202, 0.19890, 0.25581, 0.13027, 0.17615,
        0.11001, 0.08450, 0.27038, 0.19207, 0.19988, 0.34802};
    static const int from[20] = {0, 0, 1, 1, 1, 2, 3, 3, 3, 4, 5, 5, 5, 6, 6, 8, 8, 9, 11, 12};
    static const int to[20] = {1, 4, 2, 3, 4, 3, 4, 6, 8, 5, 10, 11, 12, 7, 8, 9, 13, 10, 12, 13};
    GridModel g;
    g.n_nodes = 14;
    g.slack_node = 0;
    for (int l = 0; l < 20; ++l)
        g.lines.push_back({from[l], to[l], 1.0 / x[l], line_limit});
    g.groups.resize(14);
    for (int i = 0; i < 14; ++i) g.groups[std::size_t(i)] = i % 2;
    return g;
}

RoundProblem make_round(const MarketRound& round, const GridModel& grid,
                        const Eigen::MatrixXd& phi, const Eigen::MatrixXd& dist,
                        const ProjectOptions& popts, const GapOptions& gopts) {
    const int n = grid.n_nodes;
    RoundProblem rp;
    rp.cost = [round, dist, n](const Vec& x, Vec* grad) {
        return market_cost(unflatten(x, n), round, dist, grad);
    };
    rp.gap = [round, grid, n, gopts](const Vec& x) {
        return satisfaction_gap(unflatten(x, n), round, grid.groups, nullptr, gopts);
    };
    rp.gap_grad = [round, grid, n, gopts](const Vec& x) {
        Vec g;
        satisfaction_gap(unflatten(x, n), round, grid.groups, &g, gopts);
        return g;
    };
    rp.project = [round, grid, phi, popts, n](const Vec& x) {
        return flatten(feasible_project(unflatten(x, n), round, grid, phi, popts));
    };
    return rp;
}

}  // namespace lotfair::p2p
