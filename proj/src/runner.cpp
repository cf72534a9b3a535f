#include "forkpath/runner.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "forkpath/config.hpp"
#include "forkpath/error.hpp"
#include "forkpath/io.hpp"
#include "forkpath/parallel.hpp"

namespace forkpath::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path entry_path(const fs::path& dir, std::uint64_t index) {
    return dir / std::to_string(index / 1000) / (std::to_string(index) + ".json");
}

std::optional<PathOutcome> read_entry(const fs::path& file, const std::string& key, std::uint64_t index) {
    std::error_code ec;
    if (!fs::exists(file, ec)) return std::nullopt;
    try {
        const auto j = json::parse(io::read_file(file));
        if (j.at("key").get<std::string>() != key) return std::nullopt;
        if (j.at("path_index").get<std::uint64_t>() != index) return std::nullopt;
        const auto& o = j.at("outcome");
        if (io::sha256_hex(o.dump()) != j.at("digest").get<std::string>()) return std::nullopt;
        auto out = PathOutcome::from_json(o);
        if (out.path_index != index) return std::nullopt;
        return out;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

std::string RunIdentity::cache_key() const {
    return io::sha256_hex(config_hash + "|" + data_hash + "|" + std::to_string(seed) + "|" + config::engine_version)
        .substr(0, 32);
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

json RunManifest::to_json() const {
    return {{"study_id", identity.study_id},
            {"config_hash", identity.config_hash},
            {"data_hash", identity.data_hash},
            {"seed", identity.seed},
            {"cache_key", identity.cache_key()},
            {"engine_version", engine_version},
            {"nominal_paths", nominal},
            {"feasible_paths", feasible},
            {"executed", executed},
            {"cached", cached},
            {"corrupt_cache_entries", corrupt_entries},
            {"status", tally},
            {"started", started},
            {"finished", finished}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.identity.study_id = j.value("study_id", "");
    m.identity.config_hash = j.value("config_hash", "");
    m.identity.data_hash = j.value("data_hash", "");
    m.identity.seed = j.value("seed", std::uint64_t{1});
    m.engine_version = j.value("engine_version", "");
    m.nominal = j.value("nominal_paths", std::size_t{0});
    m.feasible = j.value("feasible_paths", std::size_t{0});
    m.executed = j.value("executed", std::size_t{0});
    m.cached = j.value("cached", std::size_t{0});
    m.corrupt_entries = j.value("corrupt_cache_entries", std::size_t{0});
    if (j.contains("status")) m.tally = j.at("status").get<std::map<std::string, std::size_t>>();
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    return m;
}

RunResult run(const StudyExecutor& study, const RunIdentity& id, const RunOptions& opt) {
    const auto& spec = study.spec();
    RunManifest man;
    man.identity = id;
    man.engine_version = config::engine_version;
    man.started = utc_now();
    man.nominal = spec.path_count();

    std::vector<std::uint64_t> feasible;
    for (std::uint64_t i = 0; i < spec.path_count(); ++i)
        if (spec.feasible(spec.decode(i))) feasible.push_back(i);
    man.feasible = feasible.size();

    const std::string key = id.cache_key();
    const fs::path cache = opt.cache_dir.value_or(opt.out_dir / "cache") / key;
    std::vector<PathOutcome> outs(feasible.size());
    std::vector<char> hit(feasible.size(), 0), corrupt(feasible.size(), 0);
    parallel_for(feasible.size(), opt.jobs, [&](std::size_t i) {
        const auto index = feasible[i];
        const auto file = entry_path(cache, index);
        if (opt.resume) {
            if (auto o = read_entry(file, key, index)) {
                outs[i] = std::move(*o);
                hit[i] = 1;
                return;
            }
            std::error_code ec;
            if (fs::exists(file, ec)) corrupt[i] = 1;
        }
        const auto path = spec.assignment(index);
        try {
            outs[i] = study.run_path(path);
            outs[i].path_index = index;
        } catch (const std::exception& e) {
            PathOutcome o;
            o.path_index = index;
            o.status = PathStatus::error;
            o.note = e.what();
            outs[i] = std::move(o);
        }
        if (outs[i].status == PathStatus::error) return;
        const auto oj = outs[i].to_json();
        const json entry{{"key", key}, {"path_index", index}, {"outcome", oj}, {"digest", io::sha256_hex(oj.dump())}};
        io::write_file_atomic(file, entry.dump());
    });
    for (std::size_t i = 0; i < feasible.size(); ++i) {
        man.cached += hit[i] ? 1 : 0;
        man.corrupt_entries += corrupt[i] ? 1 : 0;
    }
    man.executed = feasible.size() - man.cached;

    RunResult res{OutcomeSet(spec, std::move(outs)), {}};
    for (const auto& [status, count] : res.outcomes.tally()) man.tally[to_string(status)] = count;

    std::ostringstream csv;
    res.outcomes.write_csv(csv);
    io::write_file_atomic(opt.out_dir / "outcomes.csv", csv.str());
    io::write_file_atomic(opt.out_dir / "spec.json", spec.to_json().dump(2) + "\n");
    man.finished = utc_now();
    io::write_file_atomic(opt.out_dir / "manifest.json", man.to_json().dump(2) + "\n");
    res.manifest = std::move(man);
    return res;
}

RunDirectory read_run(const fs::path& dir) {
    const auto spec_file = dir / "spec.json", csv_file = dir / "outcomes.csv";
    if (!fs::exists(spec_file) || !fs::exists(csv_file))
        throw DataError("'" + dir.string() + "' is not a run directory (spec.json and outcomes.csv expected)");
    RunDirectory r;
    const auto spec = pathgrid::StudySpec::from_json(json::parse(io::read_file(spec_file)));
    r.outcomes = OutcomeSet::read_csv(io::read_file(csv_file), spec);
    if (fs::exists(dir / "manifest.json")) r.manifest = RunManifest::from_json(json::parse(io::read_file(dir / "manifest.json")));
    return r;
}

}  // namespace forkpath::runner
