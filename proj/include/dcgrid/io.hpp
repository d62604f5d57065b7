#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dcgrid/simulation.hpp"

namespace dcgrid::io {

/// Syntax or schema problem in a scenario document; `what()` carries the location.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses and validates a scenario. Unknown keys are rejected.
sim::Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
sim::Scenario load_scenario(const std::filesystem::path& path);

/// Canonical JSON of the effective scenario (seed excluded) and its FNV-1a 64-bit hash.
std::string canonical_json(const sim::Scenario& scenario);
std::uint64_t scenario_hash(const sim::Scenario& scenario);
std::string hex64(std::uint64_t value);

/// `run-<hash>-seed<seed>`
std::string run_directory_name(const sim::Scenario& scenario);

std::string report_json(const sim::RunResult& result, const sim::Scenario& scenario);

/// Writes trace.csv, the fig*.csv files, mpc_log.csv and report.json into `dir`.
void write_outputs(const sim::RunResult& result, const sim::Scenario& scenario, const std::filesystem::path& dir);

/// A non-positive `input_bound` uses the largest converter bound I_max/2.
/// Spectrum, attractivity radius, time-scale check and network equilibria as JSON.
std::string analyze_json(const sim::Scenario& scenario, double input_bound);

}  // namespace dcgrid::io
