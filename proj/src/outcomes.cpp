#include "forkpath/outcomes.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "forkpath/error.hpp"
#include "forkpath/io.hpp"
#include "forkpath/parallel.hpp"

namespace forkpath {

std::string to_string(PathStatus s) {
    switch (s) {
        case PathStatus::ok: return "ok";
        case PathStatus::infeasible: return "infeasible";
        case PathStatus::discarded: return "discarded";
        case PathStatus::error: return "error";
    }
    return "error";
}

PathStatus parse_status(std::string_view s) {
    if (s == "ok") return PathStatus::ok;
    if (s == "infeasible") return PathStatus::infeasible;
    if (s == "discarded") return PathStatus::discarded;
    if (s == "error") return PathStatus::error;
    throw DataError("unknown path status '" + std::string(s) + "'");
}

namespace {

nlohmann::json num(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
    return x;
}

double unnum(const nlohmann::json& j) {
    if (j.is_null()) return PathOutcome::nan;
    if (j.is_string()) return j.get<std::string>() == "Inf" ? HUGE_VAL : -HUGE_VAL;
    return j.get<double>();
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

nlohmann::json PathOutcome::to_json() const {
    return {{"path_index", path_index}, {"status", to_string(status)}, {"note", note},
            {"b", num(b)},             {"se", num(se)},                {"se_iid", num(se_iid)},
            {"se_hac", num(se_hac)},   {"t", num(t)},                  {"aic", num(aic)},
            {"n", n},                  {"rss", num(rss)},              {"yvar", num(yvar)},
            {"k", k}};
}

PathOutcome PathOutcome::from_json(const nlohmann::json& j) {
    PathOutcome o;
    o.path_index = j.at("path_index").get<std::uint64_t>();
    o.status = parse_status(j.at("status").get<std::string>());
    o.note = j.value("note", std::string());
    o.b = unnum(j.at("b"));
    o.se = unnum(j.at("se"));
    o.se_iid = unnum(j.at("se_iid"));
    o.se_hac = unnum(j.at("se_hac"));
    o.t = unnum(j.at("t"));
    o.aic = unnum(j.at("aic"));
    o.n = j.at("n").get<long>();
    o.rss = unnum(j.at("rss"));
    o.yvar = unnum(j.at("yvar"));
    o.k = j.at("k").get<int>();
    return o;
}

bool PathOutcome::operator==(const PathOutcome& o) const {
    return path_index == o.path_index && status == o.status && note == o.note && same(b, o.b) && same(se, o.se) &&
           same(se_iid, o.se_iid) && same(se_hac, o.se_hac) && same(t, o.t) && same(aic, o.aic) && n == o.n &&
           same(rss, o.rss) && same(yvar, o.yvar) && k == o.k;
}

nlohmann::json PathSeries::to_json() const {
    nlohmann::json j;
    j["dates"] = dates;
    j["values"] = nlohmann::json::object();
    for (const auto& [k, v] : values) {
        auto arr = nlohmann::json::array();
        for (double x : v) arr.push_back(num(x));
        j["values"][k] = std::move(arr);
    }
    return j;
}

PathSeries PathSeries::from_json(const nlohmann::json& j) {
    PathSeries s;
    s.dates = j.at("dates").get<std::vector<std::int64_t>>();
    for (const auto& [k, v] : j.at("values").items()) {
        std::vector<double> xs;
        for (const auto& x : v) xs.push_back(unnum(x));
        s.values[k] = std::move(xs);
    }
    return s;
}

OutcomeSet::OutcomeSet(pathgrid::StudySpec spec, std::vector<PathOutcome> outcomes)
    : spec_(std::move(spec)), outcomes_(std::move(outcomes)) {
    std::sort(outcomes_.begin(), outcomes_.end(),
              [](const auto& a, const auto& b) { return a.path_index < b.path_index; });
    for (std::size_t i = 1; i < outcomes_.size(); ++i)
        if (outcomes_[i].path_index == outcomes_[i - 1].path_index)
            throw ValidationError("duplicate outcome for path " + std::to_string(outcomes_[i].path_index));
    for (const auto& o : outcomes_)
        if (o.path_index >= spec_.path_count())
            throw ValidationError("outcome path index " + std::to_string(o.path_index) + " outside the study grid");
}

const PathOutcome* OutcomeSet::find(std::uint64_t index) const {
    auto it = std::lower_bound(outcomes_.begin(), outcomes_.end(), index,
                               [](const PathOutcome& o, std::uint64_t i) { return o.path_index < i; });
    if (it == outcomes_.end() || it->path_index != index) return nullptr;
    return &*it;
}

std::vector<const PathOutcome*> OutcomeSet::usable() const {
    std::vector<const PathOutcome*> out;
    for (const auto& o : outcomes_)
        if (o.usable()) out.push_back(&o);
    return out;
}

std::vector<const PathOutcome*> OutcomeSet::where(std::string_view layer, std::string_view option) const {
    const auto j = spec_.layer_index(layer);
    const auto opt = spec_.option_index(j, option);
    const auto radix = spec_.layers()[j].size();
    const auto stride = spec_.stride(j);
    std::vector<const PathOutcome*> out;
    for (const auto& o : outcomes_)
        if (o.usable() && (o.path_index / stride) % radix == opt) out.push_back(&o);
    return out;
}

std::map<PathStatus, std::size_t> OutcomeSet::tally() const {
    std::map<PathStatus, std::size_t> t;
    for (const auto& o : outcomes_) ++t[o.status];
    return t;
}

void OutcomeSet::write_csv(std::ostream& out) const {
    out << "path_index";
    for (const auto& l : spec_.layers()) out << ',' << io::csv_escape(l.name);
    out << ",b,se,se_iid,se_hac,t,aic,n,rss,yvar,k,status,note\n";
    for (const auto& o : outcomes_) {
        out << o.path_index;
        const auto choices = spec_.decode(o.path_index);
        for (std::size_t j = 0; j < choices.size(); ++j) out << ',' << io::csv_escape(spec_.option(j, choices[j]).id);
        out << ',' << io::format_number(o.b) << ',' << io::format_number(o.se) << ',' << io::format_number(o.se_iid)
            << ',' << io::format_number(o.se_hac) << ',' << io::format_number(o.t) << ',' << io::format_number(o.aic)
            << ',' << o.n << ',' << io::format_number(o.rss) << ',' << io::format_number(o.yvar) << ',' << o.k << ','
            << to_string(o.status) << ',' << io::csv_escape(o.note) << '\n';
    }
}

OutcomeSet OutcomeSet::read_csv(std::string_view text, const pathgrid::StudySpec& spec) {
    const auto t = io::parse_csv(text);
    // outcome fields follow the layer columns, whose names may repeat them
    const std::size_t first = t.header.size() >= 1 + spec.layer_count() + 12 ? 1 + spec.layer_count() : 0;
    auto find = [&](std::string_view name) -> std::optional<std::size_t> {
        if (name == "path_index") return t.column(name);
        for (std::size_t i = first; i < t.header.size(); ++i)
            if (t.header[i] == name) return i;
        return std::nullopt;
    };
    auto col = [&](std::string_view name) {
        auto c = find(name);
        if (!c) throw DataError("outcome file is missing column '" + std::string(name) + "'");
        return *c;
    };
    const auto ci = col("path_index"), cb = col("b"), cse = col("se"), ciid = col("se_iid"), chac = col("se_hac"),
               ct = col("t"), caic = col("aic"), cn = col("n"), crss = col("rss"), cy = col("yvar"), ck = col("k"),
               cs = col("status");
    const auto cnote = find("note");
    auto val = [](const std::string& s) {
        if (s == "Inf") return HUGE_VAL;
        if (s == "-Inf") return -HUGE_VAL;
        auto v = io::parse_cell(s);
        return v ? *v : PathOutcome::nan;
    };
    std::vector<PathOutcome> outs;
    for (const auto& r : t.rows) {
        PathOutcome o;
        o.path_index = std::stoull(r[ci]);
        o.b = val(r[cb]);
        o.se = val(r[cse]);
        o.se_iid = val(r[ciid]);
        o.se_hac = val(r[chac]);
        o.t = val(r[ct]);
        o.aic = val(r[caic]);
        o.n = std::stol(r[cn]);
        o.rss = val(r[crss]);
        o.yvar = val(r[cy]);
        o.k = std::stoi(r[ck]);
        o.status = parse_status(r[cs]);
        if (cnote) o.note = r[*cnote];
        outs.push_back(std::move(o));
    }
    return OutcomeSet(spec, std::move(outs));
}

OutcomeSet run_study(const StudyExecutor& study, unsigned jobs, bool strict) {
    const auto& spec = study.spec();
    std::vector<std::uint64_t> feasible;
    for (std::uint64_t i = 0; i < spec.path_count(); ++i)
        if (spec.feasible(spec.decode(i))) feasible.push_back(i);
    std::vector<PathOutcome> outs(feasible.size());
    parallel_for(feasible.size(), jobs, [&](std::size_t i) {
        const auto path = spec.assignment(feasible[i]);
        try {
            outs[i] = study.run_path(path);
            outs[i].path_index = path.index;
        } catch (const std::exception& e) {
            if (strict) throw;
            PathOutcome o;
            o.path_index = path.index;
            o.status = PathStatus::error;
            o.note = e.what();
            outs[i] = std::move(o);
        }
    });
    return OutcomeSet(spec, std::move(outs));
}

}  // namespace forkpath
