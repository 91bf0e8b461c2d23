#pragma once

#include <iosfwd>

#include "core/types.hpp"

namespace lotfair::classify {

struct Sample {
    Vec features;
    int label = 1;  // -1 or +1
    int group = 0;  // 0 or 1
};

struct Batch {
    std::vector<Sample> samples;
    int t = 0;
};

inline constexpr double kProbEps = 1e-12;

// Numerically stable logistic: exp(x^T d) / (1 + exp(x^T d)), clamped to
// [kProbEps, 1 - kProbEps].
double predict_prob(const Vec& x, const Vec& d);

// Cross-entropy over the batch (unnormalized sum); fills *grad when non-null.
double cross_entropy(const Vec& x, const Batch& batch, Vec* grad);

// Demographic-parity gap: mean predicted probability of group 0 minus group 1.
// Both groups must be nonempty.
double dp_gap(const Vec& x, const Batch& batch, Vec* grad);

// dp_gap^2 - kappa
double squared_dp_constraint(const Vec& x, const Batch& batch, double kappa);

struct SyntheticParams {
    int T = 100;
    int n_features = 5;
    int batch_size = 50;
    double bias_strength = 0.0;  // group-0 feature mean offset
    std::uint64_t seed = 0;
};

// Gaussian per-group features with mean offset bias_strength on group 0;
// labels from a fixed ground-truth logistic model. Deterministic under seed.
std::vector<Batch> synthetic_biased_stream(const SyntheticParams& params);

struct IngestOptions {
    int batch_size = 50;
    std::string sensitive_attr = "sex";  // "sex" or "race"
    std::uint64_t seed = 0;
    double fit_fraction = 0.6;  // rows used to fit one-hot/z-score statistics
};

struct IngestReport {
    int rows_used = 0;
    int rows_skipped = 0;
    int n_features = 0;
};

// Adult-schema CSV (14 attribute columns + income, header row). One-hot
// categoricals, z-score numerics fit on the leading fit_fraction of rows,
// label +1 iff income >50K, seeded shuffle into both-group batches.
std::vector<Batch> adult_ingest(const std::string& path, const IngestOptions& opts,
                                IngestReport* report = nullptr);

// Wraps a batch as a RoundProblem with X_t = R^n (identity projection).
RoundProblem make_round(const Batch& batch);

}  // namespace lotfair::classify
