#include "core/classify.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace lotfair::classify {

double predict_prob(const Vec& x, const Vec& d) {
    if (x.size() != d.size())
        throw InvalidValueError("predict_prob: dimension mismatch");
    double z = dot(x, d);
    double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                        : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

double cross_entropy(const Vec& x, const Batch& batch, Vec* grad) {
    if (batch.samples.empty()) throw InvalidValueError("cross_entropy: empty batch");
    if (grad) grad->assign(x.size(), 0.0);
    double loss = 0.0;
    for (const auto& s : batch.samples) {
        double p = predict_prob(x, s.features);
        double ypos = (s.label + 1) / 2.0;  // 1 for label +1, 0 for -1
        loss -= ypos * std::log(p) + (1.0 - ypos) * std::log(1.0 - p);
        if (grad) {
            double c = p - ypos;
            for (std::size_t i = 0; i < x.size(); ++i)
                (*grad)[i] += c * s.features[i];
        }
    }
    return loss;
}

double dp_gap(const Vec& x, const Batch& batch, Vec* grad) {
    std::size_t n0 = 0, n1 = 0;
    for (const auto& s : batch.samples) (s.group == 0 ? n0 : n1)++;
    if (n0 == 0 || n1 == 0) throw InvalidValueError("dp_gap: empty sensitive group");
    if (grad) grad->assign(x.size(), 0.0);
    double m0 = 0.0, m1 = 0.0;
    for (const auto& s : batch.samples) {
        double p = predict_prob(x, s.features);
        double w = s.group == 0 ? 1.0 / double(n0) : -1.0 / double(n1);
        (s.group == 0 ? m0 : m1) += p;
        if (grad) {
            double c = w * p * (1.0 - p);  // d sigma / d z
            for (std::size_t i = 0; i < x.size(); ++i)
                (*grad)[i] += c * s.features[i];
        }
    }
    return m0 / double(n0) - m1 / double(n1);
}

double squared_dp_constraint(const Vec& x, const Batch& batch, double kappa) {
    double g = dp_gap(x, batch, nullptr);
    return g * g - kappa;
}

std::vector<Batch> synthetic_biased_stream(const SyntheticParams& params) {
    if (params.T < 1) throw InvalidValueError("synthetic_biased_stream: T < 1");
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    // fixed ground-truth model: alternating-sign unit weights
    Vec truth(std::size_t(params.n_features));
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = (i % 2 == 0) ? 1.0 : -1.0;

    std::vector<Batch> stream;
    stream.reserve(std::size_t(params.T));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 1; t <= params.T; ++t) {
        Batch b;
        b.t = t;
        b.samples.resize(std::size_t(params.batch_size));
        for (int i = 0; i < params.batch_size; ++i) {
            Sample& s = b.samples[std::size_t(i)];
            // force both groups nonempty
            s.group = (i == 0) ? 0 : (i == 1) ? 1 : (coin(rng) ? 1 : 0);
            s.features.resize(truth.size());
            double offset = s.group == 0 ? params.bias_strength : 0.0;
            for (auto& f : s.features) f = gauss(rng) + offset;
            double p = predict_prob(truth, s.features);
            s.label = unif(rng) < p ? 1 : -1;
        }
        stream.push_back(std::move(b));
    }
    return stream;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        // trim
        auto b = cur.find_first_not_of(" \t\r");
        auto e = cur.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
    }
    return out;
}

const std::vector<std::string> kNumericCols = {
    "age", "fnlwgt", "education-num", "capital-gain", "capital-loss",
    "hours-per-week"};

bool is_numeric_col(const std::string& name) {
    return std::find(kNumericCols.begin(), kNumericCols.end(), name) !=
           kNumericCols.end();
}

}  // namespace

std::vector<Batch> adult_ingest(const std::string& path, const IngestOptions& opts,
                                IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw InvalidValueError("adult_ingest: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidValueError("adult_ingest: empty file");
    std::vector<std::string> header = split_csv(line);
    int sensitive_idx = -1, income_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == opts.sensitive_attr) sensitive_idx = int(i);
        if (header[i] == "income") income_idx = int(i);
    }
    if (sensitive_idx < 0)
        throw InvalidValueError("adult_ingest: sensitive column '" +
                                opts.sensitive_attr + "' missing");
    if (income_idx < 0) throw InvalidValueError("adult_ingest: income column missing");

    std::vector<std::vector<std::string>> rows;
    int skipped = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size() ||
            std::any_of(fields.begin(), fields.end(),
                        [](const std::string& f) { return f.empty() || f == "?"; })) {
            ++skipped;
            continue;
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw InvalidValueError("adult_ingest: no usable rows");

    // encoding statistics from the leading fit split
    std::size_t n_fit = std::max<std::size_t>(1, std::size_t(opts.fit_fraction * double(rows.size())));
    std::vector<int> feat_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (int(c) != income_idx && int(c) != sensitive_idx) feat_cols.push_back(int(c));

    std::map<int, std::vector<std::string>> categories;  // col -> category list
    std::map<int, std::pair<double, double>> zstats;     // col -> (mean, std)
    for (int c : feat_cols) {
        if (is_numeric_col(header[std::size_t(c)])) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t r = 0; r < n_fit; ++r) {
                double v = std::stod(rows[r][std::size_t(c)]);
                sum += v;
                sq += v * v;
            }
            double mean = sum / double(n_fit);
            double var = std::max(0.0, sq / double(n_fit) - mean * mean);
            zstats[c] = {mean, var > 0 ? std::sqrt(var) : 1.0};
        } else {
            std::vector<std::string> cats;
            for (std::size_t r = 0; r < n_fit; ++r) {
                const std::string& v = rows[r][std::size_t(c)];
                if (std::find(cats.begin(), cats.end(), v) == cats.end())
                    cats.push_back(v);
            }
            std::sort(cats.begin(), cats.end());
            categories[c] = std::move(cats);
        }
    }

    auto encode = [&](const std::vector<std::string>& row) {
        Sample s;
        for (int c : feat_cols) {
            if (is_numeric_col(header[std::size_t(c)])) {
                auto [mean, sd] = zstats[c];
                s.features.push_back((std::stod(row[std::size_t(c)]) - mean) / sd);
            } else {
                const auto& cats = categories[c];
                for (const auto& cat : cats)
                    s.features.push_back(row[std::size_t(c)] == cat ? 1.0 : 0.0);
            }
        }
        const std::string& sv = row[std::size_t(sensitive_idx)];
        if (opts.sensitive_attr == "sex") {
            s.group = (sv == "Female") ? 0 : 1;
        } else {
            s.group = (sv == "White") ? 1 : 0;
        }
        s.label = row[std::size_t(income_idx)].find(">50K") != std::string::npos ? 1 : -1;
        return s;
    };

    std::vector<Sample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows) samples.push_back(encode(r));
    bool has0 = std::any_of(samples.begin(), samples.end(),
                            [](const Sample& s) { return s.group == 0; });
    bool has1 = std::any_of(samples.begin(), samples.end(),
                            [](const Sample& s) { return s.group == 1; });
    if (!has0 || !has1)
        throw InvalidValueError("adult_ingest: only one sensitive group present");

    std::mt19937_64 rng(opts.seed);
    std::shuffle(samples.begin(), samples.end(), rng);

    const int N = opts.batch_size;
    std::vector<Batch> stream;
    std::size_t pos = 0;
    int t = 1;
    while (pos + std::size_t(N) <= samples.size()) {
        Batch b;
        b.t = t++;
        b.samples.assign(samples.begin() + long(pos), samples.begin() + long(pos) + N);
        pos += std::size_t(N);
        // both-groups repair: pull the nearest later sample of a missing group
        for (int grp : {0, 1}) {
            bool present = std::any_of(b.samples.begin(), b.samples.end(),
                                       [&](const Sample& s) { return s.group == grp; });
            if (present) continue;
            for (std::size_t j = pos; j < samples.size(); ++j) {
                if (samples[j].group == grp) {
                    std::swap(b.samples.back(), samples[j]);
                    present = true;
                    break;
                }
            }
            if (!present)
                throw InvalidValueError("adult_ingest: cannot form both-group batch");
        }
        stream.push_back(std::move(b));
    }
    if (stream.empty()) throw InvalidValueError("adult_ingest: fewer rows than one batch");
    if (report) {
        report->rows_used = int(rows.size());
        report->rows_skipped = skipped;
        report->n_features = int(stream.front().samples.front().features.size());
    }
    return stream;
}

RoundProblem make_round(const Batch& batch) {
    RoundProblem rp;
    rp.cost = [batch](const Vec& x, Vec* grad) { return cross_entropy(x, batch, grad); };
    rp.gap = [batch](const Vec& x) { return dp_gap(x, batch, nullptr); };
    rp.gap_grad = [batch](const Vec& x) {
        Vec g;
        dp_gap(x, batch, &g);
        return g;
    };
    rp.project = [](const Vec& x) { return x; };  // X_t = R^n
    return rp;
}

}  // namespace lotfair::classify
