#pragma once

#include <map>
#include <optional>

#include "core/metrics.hpp"
#include "core/solver.hpp"
#include "core/types.hpp"

namespace lotfair::harness {

struct ClassifyConfig {
    int batch_size = 50;
    std::string sensitive_attr = "sex";
    double kappa = 0.0016;
    std::string path;  // empty -> synthetic stream
    double bias_strength = 1.0;
    int n_features = 5;
    bool mean_reduction = false;  // divide the cross-entropy sum by batch size
};

struct P2PConfig {
    std::string setting = "timevarying";  // random | timevarying | oasis
    double kappa = 0.0016;
    double tau = 0.016;
    double gamma = 0.01;
    double utility_price = 1.0;
    double frac = 0.15;
    double line_limit = 5.0;
    std::string grid_path;  // empty -> built-in 14-bus
    std::string path;       // OASIS hourly file
};

struct ToyConfig {
    double center = 0.5;
    double amplitude = 0.05;
};

struct BoundsConfig {
    BoundConstants constants;
    bool present = false;
};

struct ExperimentConfig {
    std::string app = "toy";  // toy | classify | p2p
    int T = 100;
    SolverConfig solver;
    std::vector<std::string> baselines;  // subset of sgd, instantaneous, offline, star
    ClassifyConfig classify;
    P2PConfig p2p;
    ToyConfig toy;
    BoundsConfig bounds;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    bool has_baseline(const std::string& name) const {
        return std::find(baselines.begin(), baselines.end(), name) != baselines.end();
    }
};

// Flat key=value text with dotted namespaces; unknown keys are rejected.
// LOTFAIR_OUTPUT_DIR, when set, overrides output_dir.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct MethodRun {
    Trace trace;
    bool ok = false;
    std::string error;
};

struct RunResult {
    std::map<std::string, MethodRun> methods;  // lotfair + requested baselines
    std::optional<VariationStats> variations;
    std::string summary_json;  // metric summary + provenance
    bool lotfair_ok = false;
};

// Builds the configured stream (regenerated per method from (seed, t)), runs
// LoTFair and the requested baselines, computes metrics. Method failures are
// isolated.
RunResult run_experiment(const ExperimentConfig& config);

// Pre-flight only: stream constructible, output dir writable.
void validate(const ExperimentConfig& config);

// Theorem 1/2 bound values for the configured constants, as JSON.
std::string bounds_json(const ExperimentConfig& config);

// trace_<method>.csv (header: t,cost,gap,lambda1,lambda2,cum_gap,avg_cost)
// plus summary.json under config.output_dir.
void emit_outputs(const RunResult& result, const std::string& output_dir);

// Exposed for tests: the full stream the harness would run.
std::vector<RoundProblem> build_stream(const ExperimentConfig& config);
Vec initial_decision(const ExperimentConfig& config);

}  // namespace lotfair::harness
