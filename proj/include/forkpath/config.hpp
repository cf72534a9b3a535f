#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forkpath/outcomes.hpp"

namespace forkpath::config {

inline constexpr const char* engine_version = "forkpath " FORKPATH_VERSION;

/// A study configuration file. Relative data paths resolve against `base_dir`.
struct StudyConfig {
    std::string id;
    std::string study;  // premium | anomalies | fmb
    std::uint64_t seed = 1;
    nlohmann::json raw;
    std::filesystem::path base_dir;

    /// Throws ValidationError carrying the parser's line/column or the
    /// offending field.
    [[nodiscard]] static StudyConfig parse(std::string_view text, std::filesystem::path base_dir = {});
    [[nodiscard]] static StudyConfig load(const std::filesystem::path& file);

    /// SHA-256 of the canonical (key-sorted) JSON.
    [[nodiscard]] std::string hash() const;
    /// `key=path` sets data.<key> (dots descend); a bare path sets the
    /// study's primary data file.
    void override_data(std::string_view assignment);
    void set_seed(std::uint64_t s);
};

/// The study's path grid; needs no data.
[[nodiscard]] pathgrid::StudySpec study_spec(const StudyConfig& c);

struct LoadedStudy {
    std::unique_ptr<StudyExecutor> executor;
    std::string data_hash;  // SHA-256 over data file contents or the synthetic options
};

/// Reads (or generates) the data and builds the executor. Missing files and
/// columns raise DataError.
[[nodiscard]] LoadedStudy load_study(const StudyConfig& c);

/// The study's baseline path when it has one (anomalies: the first
/// characteristic's default path).
[[nodiscard]] std::optional<std::uint64_t> default_path(const StudyExecutor& study);

}  // namespace forkpath::config
