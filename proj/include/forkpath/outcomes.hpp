#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forkpath/pathgrid.hpp"

namespace forkpath {

enum class PathStatus { ok, infeasible, discarded, error };

[[nodiscard]] std::string to_string(PathStatus s);
[[nodiscard]] PathStatus parse_status(std::string_view s);

struct PathOutcome {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    std::uint64_t path_index = 0;
    PathStatus status = PathStatus::ok;
    std::string note;
    double b = nan;
    double se = nan;  // focal standard error chosen by the path's estimator
    double se_iid = nan;
    double se_hac = nan;
    double t = nan;
    double aic = nan;
    long n = 0;
    double rss = nan;
    double yvar = nan;
    int k = 0;  // predictors excluding the intercept

    [[nodiscard]] bool usable() const { return status == PathStatus::ok; }
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static PathOutcome from_json(const nlohmann::json& j);
    bool operator==(const PathOutcome& o) const;
};

/// Per-path auxiliary series (e.g. per-date premiums). Keyed by integer date.
struct PathSeries {
    std::vector<std::int64_t> dates;
    std::map<std::string, std::vector<double>> values;

    [[nodiscard]] bool empty() const { return dates.empty(); }
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static PathSeries from_json(const nlohmann::json& j);
};

/// Outcomes of the feasible paths of one study, in path-index order.
class OutcomeSet {
public:
    OutcomeSet() = default;
    OutcomeSet(pathgrid::StudySpec spec, std::vector<PathOutcome> outcomes);

    [[nodiscard]] const pathgrid::StudySpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<PathOutcome>& outcomes() const { return outcomes_; }
    [[nodiscard]] std::size_t size() const { return outcomes_.size(); }
    [[nodiscard]] const PathOutcome* find(std::uint64_t index) const;
    [[nodiscard]] std::vector<const PathOutcome*> usable() const;
    /// Usable outcomes passing through one option of one layer.
    [[nodiscard]] std::vector<const PathOutcome*> where(std::string_view layer, std::string_view option) const;
    [[nodiscard]] std::map<PathStatus, std::size_t> tally() const;

    void write_csv(std::ostream& out) const;
    [[nodiscard]] static OutcomeSet read_csv(std::string_view text, const pathgrid::StudySpec& spec);

private:
    pathgrid::StudySpec spec_;
    std::vector<PathOutcome> outcomes_;
};

/// A study whose paths can be executed one at a time, in any order, from
/// any thread.
class StudyExecutor {
public:
    virtual ~StudyExecutor() = default;
    [[nodiscard]] virtual const pathgrid::StudySpec& spec() const = 0;
    [[nodiscard]] virtual PathOutcome run_path(const pathgrid::PathAssignment& path) const = 0;
    /// Optional per-path series; empty by default.
    [[nodiscard]] virtual PathSeries path_series(const pathgrid::PathAssignment&) const { return {}; }
};

/// Runs every feasible path on `jobs` threads. Errors inside a path are
/// recorded in its status unless `strict` is set.
[[nodiscard]] OutcomeSet run_study(const StudyExecutor& study, unsigned jobs = 1, bool strict = false);

}  // namespace forkpath
