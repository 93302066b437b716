#include "ecg/manifest.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace ecg::manifest {

std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string to_json(const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["threads"] = m.threads;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["tool_version"] = m.tool_version;
    j["wall_clock_utc"] = m.wall_clock_utc;

    nlohmann::json cfg = nlohmann::json::object();
    std::istringstream kv(config::to_key_values(m.resolved_config));
    for (std::string line; std::getline(kv, line);) {
        const auto eq = line.find('=');
        cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["config"] = cfg;
    return j.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, RunManifest m) {
    if (m.wall_clock_utc.empty()) m.wall_clock_utc = utc_now_iso8601();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest: " + path.string());
    f << to_json(m);
    if (!f) throw IoError("failed writing manifest: " + path.string());
}

}  // namespace ecg::manifest
