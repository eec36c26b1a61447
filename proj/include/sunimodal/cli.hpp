#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sunimodal {

// Budgets left unset take the command's default.
struct RunConfig {
    std::string command;
    std::string map, map2;        // spec file path or inline JSON object
    std::string out = ".";
    std::optional<int> depth, grid, budget;
    std::optional<double> mesh, tol;
    std::uint64_t seed = 1;
};

struct RunResult {
    int status = 0;               // 0 success, 2 a negative finding, 1 error
    std::string finding;
    std::vector<std::string> files;
};

const std::vector<std::string>& commands();

// FNV-1a of the canonical JSON of everything but the output directory
std::string config_hash(const RunConfig& c);
std::string config_json(const RunConfig& c);

// Runs one pipeline, writing its data files and manifest.json into c.out.
RunResult run(const RunConfig& c);

// Parses argv; on --help or a usage error prints to the streams and returns the exit code.
std::optional<RunConfig> parse_args(int argc, const char* const* argv, int& exit_code);

}  // namespace sunimodal
