#include "core/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/classify.hpp"
#include "core/p2p.hpp"
#include "json.hpp"

namespace lotfair::harness {

namespace {

const std::vector<std::string> kKnownKeys = {
    "app", "T", "seed", "output_dir", "baselines",
    "solver.alpha", "solver.mu", "solver.mu_schedule", "solver.inner_max_iters",
    "solver.inner_tol", "solver.feas_tol",
    "classify.batch_size", "classify.sensitive_attr", "classify.kappa",
    "classify.path", "classify.bias_strength", "classify.n_features",
    "classify.mean_reduction",
    "p2p.setting", "p2p.kappa", "p2p.tau", "p2p.gamma", "p2p.utility_price",
    "p2p.frac", "p2p.line_limit", "p2p.grid_path", "p2p.path",
    "toy.center", "toy.amplitude",
    "bounds.G", "bounds.M", "bounds.R", "bounds.epsilon", "bounds.vbar_g",
};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidValueError("config line " + std::to_string(lineno) +
                                    ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
            throw InvalidValueError("config: unknown key '" + key + "'");
        if (kv.count(key))
            throw InvalidValueError("config: duplicate key '" + key + "'");
        kv[key] = val;
    }

    ExperimentConfig c;
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto getd = [&](const std::string& k, double& out) {
        if (auto v = get(k)) out = std::stod(*v);
    };
    auto geti = [&](const std::string& k, int& out) {
        if (auto v = get(k)) out = std::stoi(*v);
    };
    auto gets = [&](const std::string& k, std::string& out) {
        if (auto v = get(k)) out = *v;
    };

    gets("app", c.app);
    if (c.app != "toy" && c.app != "classify" && c.app != "p2p")
        throw InvalidValueError("config: app must be toy|classify|p2p");
    geti("T", c.T);
    if (c.T < 1) throw InvalidValueError("config: T must be >= 1");
    if (auto v = get("seed")) c.seed = std::stoull(*v);
    c.solver.seed = c.seed;
    gets("output_dir", c.output_dir);
    if (auto v = get("baselines")) {
        std::stringstream bs(*v);
        std::string b;
        while (std::getline(bs, b, ',')) {
            b = trim(b);
            if (b.empty()) continue;
            if (b != "sgd" && b != "instantaneous" && b != "offline" && b != "star")
                throw InvalidValueError("config: unknown baseline '" + b + "'");
            c.baselines.push_back(b);
        }
    }
    getd("solver.alpha", c.solver.alpha);
    getd("solver.mu", c.solver.mu);
    if (auto v = get("solver.mu_schedule")) {
        if (*v == "constant")
            c.solver.mu_schedule = MuSchedule::Constant;
        else if (*v == "inverse_cuberoot")
            c.solver.mu_schedule = MuSchedule::InverseCubeRoot;
        else
            throw InvalidValueError("config: solver.mu_schedule must be constant|inverse_cuberoot");
    }
    geti("solver.inner_max_iters", c.solver.inner_max_iters);
    getd("solver.inner_tol", c.solver.inner_tol);
    getd("solver.feas_tol", c.solver.feas_tol);
    if (c.solver.alpha <= 0.0 || c.solver.mu <= 0.0)
        throw InvalidValueError("config: step sizes must be positive");

    geti("classify.batch_size", c.classify.batch_size);
    gets("classify.sensitive_attr", c.classify.sensitive_attr);
    if (c.classify.sensitive_attr != "sex" && c.classify.sensitive_attr != "race")
        throw InvalidValueError("config: classify.sensitive_attr must be sex|race");
    getd("classify.kappa", c.classify.kappa);
    gets("classify.path", c.classify.path);
    getd("classify.bias_strength", c.classify.bias_strength);
    geti("classify.n_features", c.classify.n_features);
    if (auto v = get("classify.mean_reduction"))
        c.classify.mean_reduction = (*v == "true" || *v == "1");

    gets("p2p.setting", c.p2p.setting);
    if (c.p2p.setting != "random" && c.p2p.setting != "timevarying" &&
        c.p2p.setting != "oasis")
        throw InvalidValueError("config: p2p.setting must be random|timevarying|oasis");
    getd("p2p.kappa", c.p2p.kappa);
    getd("p2p.tau", c.p2p.tau);
    getd("p2p.gamma", c.p2p.gamma);
    getd("p2p.utility_price", c.p2p.utility_price);
    getd("p2p.frac", c.p2p.frac);
    getd("p2p.line_limit", c.p2p.line_limit);
    gets("p2p.grid_path", c.p2p.grid_path);
    gets("p2p.path", c.p2p.path);
    if (c.p2p.tau <= c.p2p.kappa)
        throw InvalidValueError("config: p2p.tau must exceed p2p.kappa");

    getd("toy.center", c.toy.center);
    getd("toy.amplitude", c.toy.amplitude);

    int have_bounds = 0;
    getd("bounds.G", c.bounds.constants.G);
    getd("bounds.M", c.bounds.constants.M);
    getd("bounds.R", c.bounds.constants.R);
    getd("bounds.epsilon", c.bounds.constants.epsilon);
    getd("bounds.vbar_g", c.bounds.constants.vbar_g);
    for (const char* k : {"bounds.G", "bounds.M", "bounds.R", "bounds.epsilon"})
        if (kv.count(k)) ++have_bounds;
    if (have_bounds > 0 && have_bounds < 4)
        throw InvalidValueError("config: bounds.G/M/R/epsilon must be given together");
    c.bounds.present = have_bounds == 4;

    if (const char* env = std::getenv("LOTFAIR_OUTPUT_DIR")) c.output_dir = env;
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidValueError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

RoundProblem make_toy_round(const ToyConfig& toy, int t, int T) {
    double c = toy.center + toy.amplitude * std::cos(2.0 * M_PI * double(t) / double(T));
    RoundProblem rp;
    rp.cost = [c](const Vec& x, Vec* grad) {
        double d = x[0] - c;
        if (grad) (*grad) = {2.0 * d};
        return d * d;
    };
    rp.gap = [c](const Vec& x) { return x[0] - c; };
    rp.gap_grad = [](const Vec& x) { return Vec{1.0}; };
    rp.project = [](const Vec& x) { return Vec{std::clamp(x[0], 0.0, 1.0)}; };
    return rp;
}

struct StreamBundle {
    std::vector<RoundProblem> rounds;
    Vec x_init;
    double kappa = 0.0016;
    double tau = 0.016;
};

StreamBundle build(const ExperimentConfig& config) {
    StreamBundle sb;
    if (config.app == "toy") {
        for (int t = 1; t <= config.T; ++t)
            sb.rounds.push_back(make_toy_round(config.toy, t, config.T));
        sb.x_init = {0.0};
        sb.kappa = 0.0016;
        sb.tau = 0.016;
    } else if (config.app == "classify") {
        std::vector<classify::Batch> batches;
        if (config.classify.path.empty()) {
            classify::SyntheticParams sp;
            sp.T = config.T;
            sp.n_features = config.classify.n_features;
            sp.batch_size = config.classify.batch_size;
            sp.bias_strength = config.classify.bias_strength;
            sp.seed = config.seed;
            batches = classify::synthetic_biased_stream(sp);
        } else {
            classify::IngestOptions io;
            io.batch_size = config.classify.batch_size;
            io.sensitive_attr = config.classify.sensitive_attr;
            io.seed = config.seed;
            batches = classify::adult_ingest(config.classify.path, io);
            if (int(batches.size()) > config.T) batches.resize(std::size_t(config.T));
        }
        const bool mean_red = config.classify.mean_reduction;
        for (const auto& b : batches) {
            RoundProblem rp = classify::make_round(b);
            if (mean_red) {
                double inv = 1.0 / double(b.samples.size());
                auto base = rp.cost;
                rp.cost = [base, inv](const Vec& x, Vec* grad) {
                    double v = base(x, grad) * inv;
                    if (grad)
                        for (auto& g : *grad) g *= inv;
                    return v;
                };
            }
            sb.rounds.push_back(std::move(rp));
        }
        std::size_t dim = batches.front().samples.front().features.size();
        sb.x_init.assign(dim, 0.0);
        sb.kappa = config.classify.kappa;
        sb.tau = 10.0 * config.classify.kappa;
    } else {  // p2p
        p2p::GridModel grid = config.p2p.grid_path.empty()
                                  ? p2p::grid14(config.p2p.line_limit)
                                  : p2p::load_grid(config.p2p.grid_path);
        Eigen::MatrixXd phi = p2p::isf_matrix(grid);
        Eigen::MatrixXd dist = p2p::distance_matrix(phi);
        p2p::ProjectOptions popts;
        popts.kappa = config.p2p.kappa;
        popts.tau = config.p2p.tau;
        popts.feas_tol = config.solver.feas_tol;

        std::vector<p2p::MarketRound> rounds;
        if (config.p2p.setting == "oasis") {
            p2p::OasisOptions oo;
            oo.frac = config.p2p.frac;
            oo.seed = config.seed;
            oo.prices.wheeling_rate = config.p2p.gamma;
            rounds = p2p::oasis_ingest(config.p2p.path, grid, oo);
            if (int(rounds.size()) > config.T) rounds.resize(std::size_t(config.T));
        } else {
            p2p::GenParams gp;
            gp.utility_price = config.p2p.utility_price;
            gp.wheeling_rate = config.p2p.gamma;
            for (int t = 1; t <= config.T; ++t)
                rounds.push_back(config.p2p.setting == "random"
                                     ? p2p::gen_random_round(gp, grid, config.seed, t)
                                     : p2p::gen_timevarying_round(gp, grid, config.seed, t));
        }
        for (const auto& r : rounds)
            sb.rounds.push_back(p2p::make_round(r, grid, phi, dist, popts));
        sb.x_init.assign(std::size_t(grid.n_nodes) * std::size_t(grid.n_nodes), 0.0);
        sb.kappa = config.p2p.kappa;
        sb.tau = config.p2p.kappa + config.p2p.tau;
    }
    return sb;
}

Trace run_sgd(const StreamBundle& sb, const SolverConfig& sc) {
    Trace trace;
    Vec x = sb.rounds.front().project(sb.x_init);
    for (int t = 1; t <= int(sb.rounds.size()); ++t) {
        const RoundProblem& prev = sb.rounds[std::size_t(std::max(t - 2, 0))];
        const RoundProblem& now = sb.rounds[std::size_t(t - 1)];
        x = now.project(sgd_baseline_step(prev, x, sc.alpha));
        TraceRecord rec;
        rec.t = t;
        rec.x = x;
        rec.cost = now.cost_value(x);
        rec.gap = now.gap(x);
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

Trace run_instantaneous(const StreamBundle& sb, const SolverConfig& sc) {
    Trace trace;
    Vec x = sb.rounds.front().project(sb.x_init);
    for (int t = 1; t <= int(sb.rounds.size()); ++t) {
        const RoundProblem& now = sb.rounds[std::size_t(t - 1)];
        InstantaneousResult r = instantaneous_step(now, sb.kappa, sb.tau, x, sc);
        x = r.x;
        TraceRecord rec;
        rec.t = t;
        rec.x = x;
        rec.cost = now.cost_value(x);
        rec.gap = now.gap(x);
        rec.inner_residual = r.constraint_residual;
        rec.inner_stalled = r.infeasible;
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

Trace run_offline(const StreamBundle& sb, const SolverConfig& sc) {
    OfflineResult r = offline_solve(sb.rounds, sc, sb.x_init);
    Trace trace;
    for (int t = 1; t <= int(sb.rounds.size()); ++t) {
        const RoundProblem& now = sb.rounds[std::size_t(t - 1)];
        const Vec& x = r.decisions[std::size_t(t - 1)];
        TraceRecord rec;
        rec.t = t;
        rec.x = x;
        rec.cost = now.cost_value(x);
        rec.gap = now.gap(x);
        rec.inner_residual = r.coupling_residual;
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_fingerprint(const ExperimentConfig& c) {
    std::ostringstream os;
    os << c.app << '|' << c.T << '|' << c.seed << '|' << c.solver.alpha << '|'
       << c.solver.mu << '|' << int(c.solver.mu_schedule);
    for (const auto& b : c.baselines) os << '|' << b;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

}  // namespace

std::vector<RoundProblem> build_stream(const ExperimentConfig& config) {
    return build(config).rounds;
}

Vec initial_decision(const ExperimentConfig& config) { return build(config).x_init; }

void validate(const ExperimentConfig& config) {
    StreamBundle sb = build(config);
    if (sb.rounds.empty()) throw InvalidValueError("validate: empty stream");
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    fs::path probe = fs::path(config.output_dir) / ".preflight";
    std::ofstream out(probe);
    if (!out) throw InvalidValueError("validate: output_dir not writable: " + config.output_dir);
    out.close();
    fs::remove(probe);
}

std::string bounds_json(const ExperimentConfig& config) {
    if (!config.bounds.present)
        throw InvalidValueError("bounds: configure bounds.G/M/R/epsilon (and bounds.vbar_g)");
    const BoundConstants& c = config.bounds.constants;
    nlohmann::json j;
    j["lambda_bar"] = lambda_bar(c, config.solver.alpha, config.solver.mu);
    j["fairness_bound"] = fairness_bound(c, config.solver.alpha, config.solver.mu);
    VariationStats v{};  // variation-free regret bound at the configured horizon
    j["regret_bound_zero_variation"] =
        regret_bound(c, config.solver.alpha, config.solver.mu, v, config.T);
    StepsizePlan plan = stepsize_plan(config.T);
    j["stepsize_plan_alpha"] = plan.alpha;
    j["stepsize_plan_mu"] = plan.mu;
    return j.dump(2);
}

RunResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    RunResult result;

    auto run_isolated = [&](const std::string& name, auto&& fn) {
        MethodRun mr;
        try {
            mr.trace = fn();
            mr.ok = true;
        } catch (const std::exception& e) {
            mr.error = e.what();
        }
        result.methods[name] = std::move(mr);
    };

    run_isolated("lotfair", [&] {
        StreamBundle sb = build(config);
        return lotfair_run(sb.rounds, config.solver, sb.x_init);
    });
    result.lotfair_ok = result.methods["lotfair"].ok;

    if (config.has_baseline("sgd"))
        run_isolated("sgd", [&] { return run_sgd(build(config), config.solver); });
    if (config.has_baseline("instantaneous"))
        run_isolated("instantaneous",
                     [&] { return run_instantaneous(build(config), config.solver); });
    if (config.has_baseline("offline"))
        run_isolated("offline", [&] { return run_offline(build(config), config.solver); });

    // comparator sequences for the LoTFair trace
    nlohmann::json summary;
    auto& lt = result.methods["lotfair"];
    if (lt.ok && config.has_baseline("star")) {
        try {
            StreamBundle sb = build(config);
            ComparatorResult cmp = per_round_comparator(sb.rounds, config.solver, sb.x_init);
            bool all_ok = std::all_of(cmp.ok.begin(), cmp.ok.end(), [](bool b) { return b; });
            std::vector<double> costs;
            for (std::size_t i = 0; i < sb.rounds.size(); ++i)
                costs.push_back(sb.rounds[i].cost_value(cmp.points[i]));
            lt.trace.comparator_costs_star = std::move(costs);
            summary["star_converged"] = all_ok;
            VariationStats v = variation_stats(sb.rounds, cmp.points, 256, config.seed);
            result.variations = v;
        } catch (const std::exception& e) {
            summary["star_error"] = e.what();
        }
    }
    if (lt.ok && config.has_baseline("offline") && result.methods["offline"].ok) {
        std::vector<double> costs;
        for (const auto& r : result.methods["offline"].trace.records)
            costs.push_back(r.cost);
        lt.trace.comparator_costs_off = std::move(costs);
    }

    // metric summary block
    auto metric_or_null = [&](auto&& fn) -> nlohmann::json {
        try {
            return fn();
        } catch (const std::exception&) {
            return nullptr;
        }
    };
    if (lt.ok) {
        summary["fairness_cum"] = dynamic_fairness(lt.trace);
        summary["mean_abs_violation"] = mean_abs_violation(lt.trace);
        summary["regret_star"] =
            metric_or_null([&] { return dynamic_regret(lt.trace, Comparator::Star); });
        summary["regret_off"] =
            metric_or_null([&] { return dynamic_regret(lt.trace, Comparator::Offline); });
    } else {
        summary["fairness_cum"] = nullptr;
        summary["mean_abs_violation"] = nullptr;
        summary["regret_star"] = nullptr;
        summary["regret_off"] = nullptr;
        summary["lotfair_error"] = lt.error;
    }
    if (result.variations) {
        summary["v_xstar"] = result.variations->v_xstar;
        summary["v_gbar"] = result.variations->v_gbar;
    } else {
        summary["v_xstar"] = nullptr;
        summary["v_gbar"] = nullptr;
    }
    if (config.bounds.present) {
        const BoundConstants& bc = config.bounds.constants;
        summary["lambda_bar"] = metric_or_null(
            [&] { return lambda_bar(bc, config.solver.alpha, config.solver.mu); });
        summary["fairness_bound"] = metric_or_null(
            [&] { return fairness_bound(bc, config.solver.alpha, config.solver.mu); });
        VariationStats v = result.variations.value_or(VariationStats{});
        summary["regret_bound"] = metric_or_null([&] {
            return regret_bound(bc, config.solver.alpha, config.solver.mu, v, config.T);
        });
    } else {
        summary["lambda_bar"] = nullptr;
        summary["fairness_bound"] = nullptr;
        summary["regret_bound"] = nullptr;
    }
    for (const auto& [name, mr] : result.methods)
        if (!mr.ok) summary["failures"][name] = mr.error;

    summary["provenance"]["config_hash"] = config_fingerprint(config);
    summary["provenance"]["seed"] = config.seed;
    summary["provenance"]["version"] = "1.0.0";
    result.summary_json = summary.dump(2);
    return result;
}

void emit_outputs(const RunResult& result, const std::string& output_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(output_dir);
    for (const auto& [name, mr] : result.methods) {
        if (!mr.ok) continue;
        std::ofstream out(fs::path(output_dir) / ("trace_" + name + ".csv"));
        out << "t,cost,gap,lambda1,lambda2,cum_gap,avg_cost\n";
        double cum_gap = 0.0, cum_cost = 0.0;
        char buf[512];
        for (const auto& r : mr.trace.records) {
            cum_gap += r.gap;
            cum_cost += r.cost;
            std::snprintf(buf, sizeof buf,
                          "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.cost,
                          r.gap, r.lambda1, r.lambda2, cum_gap,
                          cum_cost / double(r.t));
            out << buf;
        }
    }
    std::ofstream js(fs::path(output_dir) / "summary.json");
    js << result.summary_json << "\n";
}

}  // namespace lotfair::harness
