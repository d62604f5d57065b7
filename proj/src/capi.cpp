#include "dcgrid/dcgrid.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "dcgrid/error.hpp"
#include "dcgrid/io.hpp"
#include "dcgrid/simulation.hpp"
#include "dcgrid/verify.hpp"

struct dcg_scenario {
    dcgrid::sim::Scenario scenario;
};

struct dcg_result {
    dcgrid::sim::RunResult result;
    dcgrid::sim::Scenario scenario;
};

namespace {

thread_local std::string last_error;

dcg_status from_kind(dcgrid::ErrorKind kind) {
    using dcgrid::ErrorKind;
    switch (kind) {
        case ErrorKind::Config: return DCG_ERR_CONFIG;
        case ErrorKind::Parameter: return DCG_ERR_PARAMETER;
        case ErrorKind::Domain: return DCG_ERR_DOMAIN;
        case ErrorKind::Singularity: return DCG_ERR_SINGULARITY;
        case ErrorKind::Numerical: return DCG_ERR_NUMERICAL;
        case ErrorKind::EquilibriumNotFound: return DCG_ERR_EQUILIBRIUM;
        case ErrorKind::Infeasible: return DCG_ERR_INFEASIBLE;
        case ErrorKind::TerminalSet: return DCG_ERR_TERMINAL_SET;
        case ErrorKind::Divergence: return DCG_ERR_DIVERGENCE;
    }
    return DCG_ERR_INTERNAL;
}

dcg_status set_error(dcg_status status, const std::string& message) {
    last_error = message;
    return status;
}

template <typename F>
dcg_status guarded(F&& body) {
    try {
        last_error.clear();
        return body();
    } catch (const dcgrid::io::ParseError& e) {
        return set_error(DCG_ERR_PARSE, e.what());
    } catch (const dcgrid::Error& e) {
        return set_error(from_kind(e.kind()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return set_error(DCG_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return set_error(DCG_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(DCG_ERR_INTERNAL, e.what());
    }
}

char* duplicate(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

dcg_status null_argument(const char* name) {
    return set_error(DCG_ERR_INVALID_ARGUMENT, std::string("null argument: ") + name);
}

}  // namespace

extern "C" {

const char* dcg_version(void) { return "0.1.0"; }

const char* dcg_status_string(dcg_status status) {
    switch (status) {
        case DCG_OK: return "ok";
        case DCG_ERR_PARSE: return "parse error";
        case DCG_ERR_CONFIG: return "configuration error";
        case DCG_ERR_PARAMETER: return "parameter error";
        case DCG_ERR_DOMAIN: return "domain error";
        case DCG_ERR_SINGULARITY: return "singularity";
        case DCG_ERR_NUMERICAL: return "numerical error";
        case DCG_ERR_EQUILIBRIUM: return "equilibrium not found";
        case DCG_ERR_INFEASIBLE: return "infeasible";
        case DCG_ERR_TERMINAL_SET: return "terminal set error";
        case DCG_ERR_DIVERGENCE: return "divergence";
        case DCG_ERR_IO: return "i/o error";
        case DCG_ERR_INVALID_ARGUMENT: return "invalid argument";
        case DCG_ERR_UNKNOWN_SUITE: return "unknown suite";
        case DCG_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* dcg_last_error(void) { return last_error.c_str(); }

dcg_status dcg_scenario_load_file(const char* path, dcg_scenario** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        if (!std::filesystem::exists(path)) return set_error(DCG_ERR_IO, std::string("no such file: ") + path);
        *out = new dcg_scenario{dcgrid::io::load_scenario(path)};
        return DCG_OK;
    });
}

dcg_status dcg_scenario_load_string(const char* json, dcg_scenario** out) {
    if (!json) return null_argument("json");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        *out = new dcg_scenario{dcgrid::io::parse_scenario(json)};
        return DCG_OK;
    });
}

void dcg_scenario_free(dcg_scenario* scenario) { delete scenario; }

dcg_status dcg_scenario_set_seed(dcg_scenario* scenario, uint64_t seed) {
    if (!scenario) return null_argument("scenario");
    scenario->scenario.seed = seed;
    return DCG_OK;
}

dcg_status dcg_scenario_set_line_dynamics(dcg_scenario* scenario, dcg_line_dynamics mode) {
    if (!scenario) return null_argument("scenario");
    if (mode != DCG_LINES_ALGEBRAIC && mode != DCG_LINES_DYNAMIC) {
        return set_error(DCG_ERR_INVALID_ARGUMENT, "unknown line dynamics mode");
    }
    return guarded([&] {
        auto copy = scenario->scenario;
        copy.lines = mode == DCG_LINES_DYNAMIC ? dcgrid::sim::LineDynamics::Dynamic : dcgrid::sim::LineDynamics::Algebraic;
        copy.validate();
        scenario->scenario = std::move(copy);
        return DCG_OK;
    });
}

dcg_status dcg_scenario_set_decimation(dcg_scenario* scenario, int decimation) {
    if (!scenario) return null_argument("scenario");
    if (decimation < 1) return set_error(DCG_ERR_INVALID_ARGUMENT, "decimation must be >= 1");
    scenario->scenario.decimation = decimation;
    return DCG_OK;
}

dcg_status dcg_scenario_hash(const dcg_scenario* scenario, uint64_t* out) {
    if (!scenario) return null_argument("scenario");
    if (!out) return null_argument("out");
    return guarded([&] {
        *out = dcgrid::io::scenario_hash(scenario->scenario);
        return DCG_OK;
    });
}

dcg_status dcg_scenario_run_directory(const dcg_scenario* scenario, char* buf, size_t size) {
    if (!scenario) return null_argument("scenario");
    if (!buf) return null_argument("buf");
    return guarded([&] {
        const auto name = dcgrid::io::run_directory_name(scenario->scenario);
        if (name.size() + 1 > size) return set_error(DCG_ERR_INVALID_ARGUMENT, "buffer too small");
        std::memcpy(buf, name.c_str(), name.size() + 1);
        return DCG_OK;
    });
}

dcg_status dcg_scenario_node_count(const dcg_scenario* scenario, size_t* out) {
    if (!scenario) return null_argument("scenario");
    if (!out) return null_argument("out");
    *out = scenario->scenario.topology.node_count();
    return DCG_OK;
}

dcg_status dcg_run(const dcg_scenario* scenario, dcg_result** out) {
    if (!scenario) return null_argument("scenario");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        auto result = dcgrid::sim::run(scenario->scenario);
        *out = new dcg_result{std::move(result), scenario->scenario};
        return DCG_OK;
    });
}

dcg_status dcg_result_error(const dcg_result* result, const char** message) {
    if (!result) return null_argument("result");
    if (message) *message = result->result.error.c_str();
    if (result->result.completed) return DCG_OK;
    return result->result.error_kind ? from_kind(*result->result.error_kind) : DCG_ERR_INTERNAL;
}

int dcg_result_all_passed(const dcg_result* result) { return result && result->result.all_passed() ? 1 : 0; }

size_t dcg_result_monitor_count(const dcg_result* result) { return result ? result->result.monitors.size() : 0; }

dcg_status dcg_result_monitor(const dcg_result* result, size_t index, dcg_monitor* out) {
    if (!result) return null_argument("result");
    if (!out) return null_argument("out");
    if (index >= result->result.monitors.size()) return set_error(DCG_ERR_INVALID_ARGUMENT, "monitor index out of range");
    const auto& m = result->result.monitors[index];
    *out = {m.name.c_str(), m.pass ? 1 : 0, m.metric, m.threshold, m.detail.c_str()};
    return DCG_OK;
}

dcg_status dcg_result_write(const dcg_result* result, const char* directory) {
    if (!result) return null_argument("result");
    if (!directory) return null_argument("directory");
    return guarded([&] {
        dcgrid::io::write_outputs(result->result, result->scenario, directory);
        return DCG_OK;
    });
}

dcg_status dcg_result_report_json(const dcg_result* result, char** json) {
    if (!result) return null_argument("result");
    if (!json) return null_argument("json");
    return guarded([&] {
        *json = duplicate(dcgrid::io::report_json(result->result, result->scenario));
        return *json ? DCG_OK : set_error(DCG_ERR_INTERNAL, "out of memory");
    });
}

void dcg_result_free(dcg_result* result) { delete result; }

dcg_status dcg_analyze(const dcg_scenario* scenario, double input_bound, char** json) {
    if (!scenario) return null_argument("scenario");
    if (!json) return null_argument("json");
    return guarded([&] {
        *json = duplicate(dcgrid::io::analyze_json(scenario->scenario, input_bound));
        return *json ? DCG_OK : set_error(DCG_ERR_INTERNAL, "out of memory");
    });
}

dcg_status dcg_verify(const char* suite, uint64_t seed, char** json, int* passed) {
    if (!suite) return null_argument("suite");
    if (!json) return null_argument("json");
    const auto& names = dcgrid::verify::suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end()) {
        return set_error(DCG_ERR_UNKNOWN_SUITE, std::string("unknown verification suite '") + suite + "'");
    }
    return guarded([&] {
        const auto reports = dcgrid::verify::run_suite(suite, seed);
        bool ok = true;
        for (const auto& r : reports) ok = ok && r.passed;
        if (passed) *passed = ok ? 1 : 0;
        *json = duplicate(dcgrid::verify::to_json(reports));
        return *json ? DCG_OK : set_error(DCG_ERR_INTERNAL, "out of memory");
    });
}

const char* dcg_verify_suites(void) {
    static const std::string joined = [] {
        std::string out;
        for (const auto& n : dcgrid::verify::suite_names()) out += (out.empty() ? "" : ",") + n;
        return out;
    }();
    return joined.c_str();
}

void dcg_free_string(char* s) { std::free(s); }

}  // extern "C"
