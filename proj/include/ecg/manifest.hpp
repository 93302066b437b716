#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecg/config.hpp"

namespace ecg::manifest {

// Written alongside every command's output: the command, the fully
// materialized configuration, the seed and thread count, and the touched
// paths. Re-running the same command with this seed/config and threads=0
// reproduces the outputs byte for byte.
struct RunManifest {
    std::string command;
    config::ToolConfig resolved_config;
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version = kToolVersion;
    std::string wall_clock_utc;  // ISO-8601, filled at write time if empty
};

std::string to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& path, RunManifest m);

// Current UTC wall clock, ISO-8601 (e.g. 2026-08-16T12:00:00Z).
std::string utc_now_iso8601();

}  // namespace ecg::manifest
