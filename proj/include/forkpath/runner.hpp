#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "forkpath/outcomes.hpp"

namespace forkpath::runner {

/// (config hash, data hash, seed) identify a cached result.
struct RunIdentity {
    std::string study_id;
    std::string config_hash;
    std::string data_hash;
    std::uint64_t seed = 1;

    [[nodiscard]] std::string cache_key() const;
};

struct RunOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> cache_dir;  // default out_dir/cache
    unsigned jobs = 1;
    bool resume = false;
};

struct RunManifest {
    RunIdentity identity;
    std::string engine_version;
    std::map<std::string, std::size_t> tally;
    std::size_t nominal = 0;
    std::size_t feasible = 0;
    std::size_t executed = 0;
    std::size_t cached = 0;
    std::size_t corrupt_entries = 0;
    std::string started, finished;  // UTC, ISO 8601

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static RunManifest from_json(const nlohmann::json& j);
};

struct RunResult {
    OutcomeSet outcomes;
    RunManifest manifest;
};

/// Executes every feasible path not already cached (when resuming), caches
/// each non-error outcome, and atomically writes outcomes.csv, spec.json and
/// manifest.json into out_dir.
[[nodiscard]] RunResult run(const StudyExecutor& study, const RunIdentity& id, const RunOptions& opt);

/// Reads the spec, outcomes and manifest a run wrote.
struct RunDirectory {
    OutcomeSet outcomes;
    RunManifest manifest;
};
[[nodiscard]] RunDirectory read_run(const std::filesystem::path& dir);

[[nodiscard]] std::string utc_now();

}  // namespace forkpath::runner
