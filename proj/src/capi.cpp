#include "lotfair/lotfair.h"

#include <cstring>
#include <string>

#include "core/harness.hpp"

using lotfair::harness::ExperimentConfig;
using lotfair::harness::RunResult;

struct lf_experiment {
    ExperimentConfig config;
    std::string summary;
    bool has_summary = false;
};

namespace {

void put_err(char* errbuf, size_t len, const char* msg) {
    if (!errbuf || len == 0) return;
    std::strncpy(errbuf, msg, len - 1);
    errbuf[len - 1] = '\0';
}

}  // namespace

extern "C" {

lf_status lf_experiment_open(const char* config_path, lf_experiment** out,
                             char* errbuf, size_t errbuf_len) {
    if (!config_path || !out) {
        put_err(errbuf, errbuf_len, "null argument");
        return LF_ERR_INVALID_ARG;
    }
    *out = nullptr;
    try {
        auto* exp = new lf_experiment;
        exp->config = lotfair::harness::load_config(config_path);
        *out = exp;
        return LF_OK;
    } catch (const std::exception& e) {
        put_err(errbuf, errbuf_len, e.what());
        return LF_ERR_CONFIG;
    }
}

void lf_experiment_close(lf_experiment* exp) { delete exp; }

lf_status lf_experiment_validate(lf_experiment* exp, char* errbuf, size_t errbuf_len) {
    if (!exp) {
        put_err(errbuf, errbuf_len, "null handle");
        return LF_ERR_INVALID_ARG;
    }
    try {
        lotfair::harness::validate(exp->config);
        return LF_OK;
    } catch (const std::exception& e) {
        put_err(errbuf, errbuf_len, e.what());
        return LF_ERR_CONFIG;
    }
}

lf_status lf_experiment_run(lf_experiment* exp, char* errbuf, size_t errbuf_len) {
    if (!exp) {
        put_err(errbuf, errbuf_len, "null handle");
        return LF_ERR_INVALID_ARG;
    }
    try {
        RunResult result = lotfair::harness::run_experiment(exp->config);
        lotfair::harness::emit_outputs(result, exp->config.output_dir);
        exp->summary = result.summary_json;
        exp->has_summary = true;
        if (!result.lotfair_ok) {
            put_err(errbuf, errbuf_len,
                    result.methods.at("lotfair").error.c_str());
            return LF_ERR_RUN_FAILED;
        }
        return LF_OK;
    } catch (const std::exception& e) {
        put_err(errbuf, errbuf_len, e.what());
        return LF_ERR_INTERNAL;
    }
}

const char* lf_experiment_summary(const lf_experiment* exp) {
    if (!exp || !exp->has_summary) return nullptr;
    return exp->summary.c_str();
}

lf_status lf_experiment_bounds_json(lf_experiment* exp, char** json_out,
                                    char* errbuf, size_t errbuf_len) {
    if (!exp || !json_out) {
        put_err(errbuf, errbuf_len, "null argument");
        return LF_ERR_INVALID_ARG;
    }
    try {
        std::string s = lotfair::harness::bounds_json(exp->config);
        char* buf = new char[s.size() + 1];
        std::memcpy(buf, s.c_str(), s.size() + 1);
        *json_out = buf;
        return LF_OK;
    } catch (const std::exception& e) {
        put_err(errbuf, errbuf_len, e.what());
        return LF_ERR_CONFIG;
    }
}

void lf_string_free(char* s) { delete[] s; }

const char* lf_version(void) { return "1.0.0"; }

}  // extern "C"
