#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcgrid/dcgrid.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitMonitorFail = 1;
constexpr int kExitInput = 2;
constexpr int kExitSimulation = 3;

int input_exit(dcg_status status) {
    switch (status) {
        case DCG_ERR_PARSE:
        case DCG_ERR_CONFIG:
        case DCG_ERR_PARAMETER:
        case DCG_ERR_IO:
        case DCG_ERR_INVALID_ARGUMENT:
        case DCG_ERR_UNKNOWN_SUITE:
            return kExitInput;
        default:
            return kExitSimulation;
    }
}

int report(dcg_status status) {
    std::cerr << "error: " << dcg_status_string(status);
    if (*dcg_last_error()) std::cerr << ": " << dcg_last_error();
    std::cerr << '\n';
    return input_exit(status);
}

struct ScenarioOptions {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> lines;
    std::optional<int> decimation;
};

int load(const ScenarioOptions& opts, dcg_scenario** out) {
    dcg_status s = dcg_scenario_load_file(opts.path.c_str(), out);
    if (s != DCG_OK) return report(s);
    if (opts.seed) dcg_scenario_set_seed(*out, *opts.seed);
    if (opts.lines) {
        s = dcg_scenario_set_line_dynamics(*out, *opts.lines == "dynamic" ? DCG_LINES_DYNAMIC : DCG_LINES_ALGEBRAIC);
        if (s != DCG_OK) return report(s);
    }
    if (opts.decimation) {
        s = dcg_scenario_set_decimation(*out, *opts.decimation);
        if (s != DCG_OK) return report(s);
    }
    return kExitPass;
}

int run_command(const ScenarioOptions& opts, const std::string& out_root, bool quiet) {
    dcg_scenario* scenario = nullptr;
    if (int code = load(opts, &scenario); code != kExitPass) {
        dcg_scenario_free(scenario);
        return code;
    }
    char dirname[128];
    dcg_scenario_run_directory(scenario, dirname, sizeof dirname);
    const std::filesystem::path dir = std::filesystem::path(out_root) / dirname;

    dcg_result* result = nullptr;
    dcg_status s = dcg_run(scenario, &result);
    dcg_scenario_free(scenario);
    if (s != DCG_OK) return report(s);

    s = dcg_result_write(result, dir.string().c_str());
    if (s != DCG_OK) {
        dcg_result_free(result);
        return report(s);
    }

    const char* message = nullptr;
    const dcg_status run_status = dcg_result_error(result, &message);
    const std::size_t count = dcg_result_monitor_count(result);
    for (std::size_t i = 0; i < count && !quiet; ++i) {
        dcg_monitor m;
        dcg_result_monitor(result, i, &m);
        std::printf("%-24s %s  metric %.6g  threshold %.6g  %s\n", m.name, m.pass ? "PASS" : "FAIL", m.metric,
                    m.threshold, m.detail);
    }
    std::printf("outputs: %s\n", dir.string().c_str());
    int code = kExitPass;
    if (run_status != DCG_OK) {
        std::cerr << "simulation aborted: " << dcg_status_string(run_status) << ": " << message << '\n';
        code = kExitSimulation;
    } else if (!dcg_result_all_passed(result)) {
        code = kExitMonitorFail;
    }
    dcg_result_free(result);
    return code;
}

int analyze_command(const ScenarioOptions& opts, double input_bound) {
    dcg_scenario* scenario = nullptr;
    if (int code = load(opts, &scenario); code != kExitPass) {
        dcg_scenario_free(scenario);
        return code;
    }
    char* json = nullptr;
    const dcg_status s = dcg_analyze(scenario, input_bound, &json);
    dcg_scenario_free(scenario);
    if (s != DCG_OK) return report(s);
    std::printf("%s\n", json);
    dcg_free_string(json);
    return kExitPass;
}

int verify_command(const std::string& suite, std::uint64_t seed) {
    char* json = nullptr;
    int passed = 0;
    const dcg_status s = dcg_verify(suite.c_str(), seed, &json, &passed);
    if (s != DCG_OK) return report(s);
    std::printf("%s\n", json);
    dcg_free_string(json);
    return passed ? kExitPass : kExitMonitorFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-layer control of meshed DC converter networks"};
    app.set_version_flag("--version", std::string(dcg_version()));
    app.require_subcommand(1);

    ScenarioOptions opts;
    std::string out_root = "runs";
    bool quiet = false;
    double input_bound = 0.0;
    std::string suite = "all";
    std::uint64_t verify_seed = 1;

    auto add_scenario_options = [&](CLI::App* sub) {
        sub->add_option("--scenario", opts.path, "Scenario JSON file")->required();
        sub->add_option("--seed", opts.seed, "Override the scenario seed");
        sub->add_option("--line-dynamics", opts.lines, "algebraic or dynamic")
            ->check(CLI::IsMember({"algebraic", "dynamic"}));
        sub->add_option("--decimation", opts.decimation, "Trace row every N plant steps")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "Simulate a scenario and write traces and the report");
    add_scenario_options(run);
    run->add_option("--out", out_root, "Output root; results go to <out>/run-<hash>-seed<seed>/");
    run->add_flag("--quiet", quiet, "Do not print the monitor table");

    auto* analyze = app.add_subcommand("analyze", "Spectrum, attractivity radius and network equilibria");
    add_scenario_options(analyze);
    analyze->add_option("--bu", input_bound, "Bound on |u| used for the attractivity radius (A); 0 uses the scenario")
        ->check(CLI::NonNegativeNumber);

    auto* verify = app.add_subcommand("verify", "Property-based checks of the control laws");
    verify->add_option("--suite", suite, std::string("One of: ") + dcg_verify_suites());
    verify->add_option("--seed", verify_seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    if (*run) return run_command(opts, out_root, quiet);
    if (*analyze) return analyze_command(opts, input_bound);
    return verify_command(suite, verify_seed);
}
