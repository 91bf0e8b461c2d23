// Experiment runner CLI over the shared-library C API.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "lotfair/lotfair.h"

namespace {

int with_experiment(const std::string& config_path,
                    int (*action)(lf_experiment*)) {
    char err[1024] = {0};
    lf_experiment* exp = nullptr;
    if (lf_experiment_open(config_path.c_str(), &exp, err, sizeof err) != LF_OK) {
        std::fprintf(stderr, "error: %s\n", err);
        return 2;
    }
    int rc = action(exp);
    lf_experiment_close(exp);
    return rc;
}

int do_run(lf_experiment* exp) {
    char err[1024] = {0};
    lf_status st = lf_experiment_run(exp, err, sizeof err);
    const char* summary = lf_experiment_summary(exp);
    if (summary) std::printf("%s\n", summary);
    if (st != LF_OK) {
        std::fprintf(stderr, "run failed: %s\n", err);
        return 1;
    }
    return 0;
}

int do_validate(lf_experiment* exp) {
    char err[1024] = {0};
    if (lf_experiment_validate(exp, err, sizeof err) != LF_OK) {
        std::fprintf(stderr, "invalid: %s\n", err);
        return 1;
    }
    std::printf("ok\n");
    return 0;
}

int do_bounds(lf_experiment* exp) {
    char err[1024] = {0};
    char* json = nullptr;
    if (lf_experiment_bounds_json(exp, &json, err, sizeof err) != LF_OK) {
        std::fprintf(stderr, "error: %s\n", err);
        return 1;
    }
    std::printf("%s\n", json);
    lf_string_free(json);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"long-term-fairness online optimization experiments"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run the configured experiment");
    run->add_option("config", config_path, "config file")->required();
    auto* validate = app.add_subcommand("validate", "parse config + pre-flight only");
    validate->add_option("config", config_path, "config file")->required();
    auto* bounds = app.add_subcommand("bounds", "print closed-form performance bounds");
    bounds->add_option("config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return with_experiment(config_path, do_run);
    if (validate->parsed()) return with_experiment(config_path, do_validate);
    return with_experiment(config_path, do_bounds);
}
