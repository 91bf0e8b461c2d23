#pragma once

#include <Eigen/Dense>

#include "core/types.hpp"

namespace lotfair::p2p {

struct Line {
    int from = 0;
    int to = 0;
    double susceptance = 1.0;
    double limit = 1.0;  // rho_max
};

struct GridModel {
    int n_nodes = 0;
    std::vector<Line> lines;
    int slack_node = 0;
    std::vector<int> groups;  // node -> {0,1}
};

// ISF matrix Phi (n_lines x n_nodes): Phi = B' A C^-1 on non-slack columns,
// slack column zero. Throws on a disconnected grid.
Eigen::MatrixXd isf_matrix(const GridModel& grid);

// Column i minus column j of Phi.
Eigen::VectorXd ptdf(const Eigen::MatrixXd& phi, int i, int j);

// D_ij = sum_l phi^ij_l
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& phi);

struct MarketRound {
    Eigen::VectorXd surplus;      // h_i = s_i - d_i
    Eigen::VectorXd demand;       // d_i >= 0
    Eigen::MatrixXd peer_prices;  // e_ij
    double utility_price = 1.0;   // p
    double wheeling_rate = 0.01;  // gamma
    int t = 0;

    bool is_producer(int i) const { return surplus[i] >= 0.0; }
    std::vector<int> consumers() const {
        std::vector<int> out;
        for (int i = 0; i < surplus.size(); ++i)
            if (surplus[i] < 0.0) out.push_back(i);
        return out;
    }
};

// Trade matrices travel through the solver as row-major flattened N x N vectors.
Eigen::MatrixXd unflatten(const Vec& x, int n);
Vec flatten(const Eigen::MatrixXd& X);

// rho_l = sum_{i in producers} sum_{j in consumers} phi^ij_l X_ij
Eigen::VectorXd line_flows(const Eigen::MatrixXd& X, const MarketRound& round,
                           const Eigen::MatrixXd& phi);

// Affine market cost; fills *grad (flattened) when non-null.
double market_cost(const Eigen::MatrixXd& X, const MarketRound& round,
                   const Eigen::MatrixXd& dist, Vec* grad);

struct GapOptions {
    // Paper formula divides by full group sizes; the alternative uses the
    // consumer-subset sizes.
    bool consumer_subset_denominator = false;
};

// Affine satisfaction gap between the two groups' relative post-trade deficits.
double satisfaction_gap(const Eigen::MatrixXd& X, const MarketRound& round,
                        const std::vector<int>& groups, Vec* grad,
                        const GapOptions& opts = {});

struct ProjectOptions {
    double kappa = 0.0016;
    double tau = 0.016;
    int max_sweeps = 200;
    double feas_tol = 1e-6;
    bool fairness_cap = true;  // include block (13h)
};

struct FeasReport {
    double box = 0.0;          // 13b/13c + zero diagonal
    double row_budget = 0.0;   // 13d/13e
    double antisym = 0.0;      // 13f
    double line = 0.0;         // 13g
    double fairness = 0.0;     // 13h residual (g^2 - tau)+
    double max_residual() const {
        return std::max({box, row_budget, antisym, line});
    }
};

// Dykstra-style cyclic projection onto the constraint blocks (13a)-(13h);
// antisymmetry applied last each sweep.
Eigen::MatrixXd feasible_project(const Eigen::MatrixXd& X, const MarketRound& round,
                                 const GridModel& grid, const Eigen::MatrixXd& phi,
                                 const ProjectOptions& opts);

FeasReport feasibility_report(const Eigen::MatrixXd& X, const MarketRound& round,
                              const GridModel& grid, const Eigen::MatrixXd& phi,
                              const ProjectOptions& opts);

struct GenParams {
    double solar_mean = 2.0;
    double solar_std = 0.5;
    double wind_lo = 0.0;
    double wind_hi = 1.0;
    double demand_mean = 2.5;
    double demand_std = 0.5;
    double demand_min = 0.1;
    double price_base = 0.8;        // mean peer price
    double price_spread = 0.05;     // uniform jitter
    double intra_discount = 0.1;    // intra-group prices 10% below inter-group
    double utility_price = 1.0;
    double wheeling_rate = 0.01;
    // time-varying setting: s_t = a + b cos(pi t) + noise
    double cos_a = 2.0;
    double cos_b = 1.0;
    double cos_noise_std = 0.05;
    double angular_freq = 3.14159265358979323846;  // cos(freq * t)
};

MarketRound gen_random_round(const GenParams& params, const GridModel& grid,
                             std::uint64_t seed, int t);

MarketRound gen_timevarying_round(const GenParams& params, const GridModel& grid,
                                  std::uint64_t seed, int t);

struct OasisOptions {
    double frac = 0.15;           // share of total demand entering the P2P market
    double dirichlet_conc = 1.0;  // concentration of the allocation draws
    std::uint64_t seed = 0;
    GenParams prices;             // peer-price generation parameters
};

// Hourly rows (timestamp,total_demand,solar_supply,wind_supply,price); demand
// scaled by frac, totals allocated to nodes by Dirichlet weights.
std::vector<MarketRound> oasis_ingest(const std::string& path, const GridModel& grid,
                                      const OasisOptions& opts);

// Grid file: "slack <i>" / "group <i> <0|1>" header lines, then
// "from,to,susceptance,limit" per line (0-based node ids).
GridModel load_grid(const std::string& path);

// The standard 14-bus test topology (20 lines) with uniform limits and
// node-parity group split.
GridModel grid14(double line_limit = 5.0);

// Wraps a round as a RoundProblem over the flattened trade matrix.
RoundProblem make_round(const MarketRound& round, const GridModel& grid,
                        const Eigen::MatrixXd& phi, const Eigen::MatrixXd& dist,
                        const ProjectOptions& popts, const GapOptions& gopts = {});

}  // namespace lotfair::p2p
