#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lotfair/lotfair.h"

namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& name, const std::string& body) {
    fs::path p = fs::path("/tmp") / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}

std::string toy_config(const std::string& out_dir) {
    return "app = toy\n"
           "T = 3\n"
           "seed = 9\n"
           "solver.alpha = 0.1\n"
           "solver.mu = 0.1\n"
           "baselines = sgd, star\n"
           "bounds.G = 2\nbounds.M = 1\nbounds.R = 1\nbounds.epsilon = 0.5\n"
           "output_dir = " +
           out_dir + "\n";
}

}  // namespace

TEST_CASE("lifecycle: open, validate, run, summary") {
    fs::path out = "/tmp/lf_capi_run";
    fs::remove_all(out);
    std::string cfg = write_config("lf_capi.cfg", toy_config(out.string()));

    lf_experiment* exp = nullptr;
    char err[256] = {0};
    REQUIRE(lf_experiment_open(cfg.c_str(), &exp, err, sizeof(err)) == LF_OK);
    REQUIRE(exp != nullptr);

    CHECK(lf_experiment_summary(exp) == nullptr);
    CHECK(lf_experiment_validate(exp, err, sizeof(err)) == LF_OK);
    CHECK(lf_experiment_run(exp, err, sizeof(err)) == LF_OK);

    const char* summary = lf_experiment_summary(exp);
    REQUIRE(summary != nullptr);
    nlohmann::json j = nlohmann::json::parse(summary);
    CHECK(j["fairness_cum"].is_number());
    CHECK(j["provenance"]["seed"] == 9);

    CHECK(fs::exists(out / "trace_lotfair.csv"));
    CHECK(fs::exists(out / "trace_sgd.csv"));
    CHECK(fs::exists(out / "summary.json"));

    char* bounds = nullptr;
    REQUIRE(lf_experiment_bounds_json(exp, &bounds, err, sizeof(err)) == LF_OK);
    REQUIRE(bounds != nullptr);
    nlohmann::json b = nlohmann::json::parse(bounds);
    CHECK(b["lambda_bar"].is_number());
    lf_string_free(bounds);

    lf_experiment_close(exp);
}

TEST_CASE("error paths") {
    lf_experiment* exp = nullptr;
    char err[256] = {0};

    SUBCASE("missing file") {
        CHECK(lf_experiment_open("/nonexistent.cfg", &exp, err, sizeof(err)) != LF_OK);
        CHECK(exp == nullptr);
        CHECK(std::strlen(err) > 0);
    }

    SUBCASE("bad config") {
        std::string cfg = write_config("lf_capi_bad.cfg", "what = ever\n");
        CHECK(lf_experiment_open(cfg.c_str(), &exp, err, sizeof(err)) == LF_ERR_CONFIG);
        CHECK(exp == nullptr);
        CHECK(std::string(err).find("unknown key") != std::string::npos);
    }

    SUBCASE("null arguments") {
        CHECK(lf_experiment_open(nullptr, &exp, err, sizeof(err)) == LF_ERR_INVALID_ARG);
        std::string cfg = write_config("lf_capi_null.cfg", toy_config("/tmp/lf_capi_null"));
        CHECK(lf_experiment_open(cfg.c_str(), nullptr, err, sizeof(err)) ==
              LF_ERR_INVALID_ARG);
        CHECK(lf_experiment_validate(nullptr, err, sizeof(err)) == LF_ERR_INVALID_ARG);
        CHECK(lf_experiment_run(nullptr, err, sizeof(err)) == LF_ERR_INVALID_ARG);
        CHECK(lf_experiment_summary(nullptr) == nullptr);
        char* json = nullptr;
        CHECK(lf_experiment_bounds_json(nullptr, &json, err, sizeof(err)) ==
              LF_ERR_INVALID_ARG);
        lf_experiment_close(nullptr);  // must be a no-op
    }

    SUBCASE("bounds without constants") {
        std::string cfg = write_config(
            "lf_capi_nobounds.cfg",
            "app = toy\nT = 2\nsolver.alpha = 0.1\nsolver.mu = 0.1\n"
            "output_dir = /tmp/lf_capi_nb\n");
        REQUIRE(lf_experiment_open(cfg.c_str(), &exp, err, sizeof(err)) == LF_OK);
        char* json = nullptr;
        CHECK(lf_experiment_bounds_json(exp, &json, err, sizeof(err)) != LF_OK);
        CHECK(json == nullptr);
        lf_experiment_close(exp);
    }

    SUBCASE("unwritable output dir fails validation") {
        std::string cfg =
            write_config("lf_capi_ro.cfg", toy_config("/proc/lf_unwritable"));
        REQUIRE(lf_experiment_open(cfg.c_str(), &exp, err, sizeof(err)) == LF_OK);
        CHECK(lf_experiment_validate(exp, err, sizeof(err)) != LF_OK);
        lf_experiment_close(exp);
    }
}

TEST_CASE("lf_version") {
    const char* v = lf_version();
    REQUIRE(v != nullptr);
    CHECK(std::strlen(v) > 0);
}
