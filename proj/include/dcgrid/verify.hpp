#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dcgrid::verify {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SuiteReport {
    std::string suite;
    bool passed = false;
    std::vector<Check> checks;
    std::vector<std::string> failures;  // individual failing cases, capped
};

/// Suite names accepted by `run_suite`, "all" last.
const std::vector<std::string>& suite_names();

/// Runs one property suite (or every suite for "all"). Unknown names throw a configuration error.
std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed);

std::string to_json(const std::vector<SuiteReport>& reports);

}  // namespace dcgrid::verify
