#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "forkpath/averaging.hpp"
#include "forkpath/config.hpp"
#include "forkpath/datapanel.hpp"
#include "forkpath/error.hpp"
#include "forkpath/io.hpp"
#include "forkpath/mtesting.hpp"
#include "forkpath/pathmetrics.hpp"
#include "forkpath/runner.hpp"
#include "forkpath/simlab.hpp"
#include "forkpath/sorting.hpp"
#include "forkpath/synthetic.hpp"

using namespace forkpath;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kStrict = 3;

std::string num(double x) { return io::format_number(x); }

void write_json(const fs::path& file, const json& j) {
    io::write_file_atomic(file, j.dump(2) + "\n");
    std::cout << "wrote " << file.string() << '\n';
}

void write_text(const fs::path& file, const std::string& text) {
    io::write_file_atomic(file, text);
    std::cout << "wrote " << file.string() << '\n';
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* flag) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
        throw ValidationError(std::string(flag) + " expects layer=option, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

// ---------- enumerate ----------

struct EnumerateArgs {
    std::string config;
    std::string out;
    bool quiet = false;
};

int cmd_enumerate(const EnumerateArgs& a) {
    const auto c = config::StudyConfig::load(a.config);
    const auto spec = config::study_spec(c);
    std::uint64_t feasible = 0;
    std::ostringstream csv;
    if (!a.out.empty()) {
        csv << "path_index";
        for (const auto& l : spec.layers()) csv << ',' << io::csv_escape(l.name);
        csv << ",feasible\n";
    }
    for (std::uint64_t i = 0; i < spec.path_count(); ++i) {
        const auto path = spec.assignment(i);
        feasible += path.feasible ? 1 : 0;
        if (a.out.empty()) continue;
        csv << i;
        for (const auto& id : spec.choice_ids(path)) csv << ',' << io::csv_escape(id);
        csv << ',' << (path.feasible ? 1 : 0) << '\n';
    }
    json summary{{"study_id", c.id},
                 {"config_hash", c.hash()},
                 {"engine_version", config::engine_version},
                 {"layers", spec.layer_count()},
                 {"nominal_paths", spec.path_count()},
                 {"feasible_paths", feasible}};
    json layers = json::array();
    for (const auto& l : spec.layers()) layers.push_back({{"name", l.name}, {"options", l.size()}});
    summary["layer_sizes"] = layers;
    if (!a.quiet) {
        std::cout << "study " << c.id << ": " << spec.layer_count() << " layers, " << spec.path_count()
                  << " nominal paths, " << feasible << " feasible\n";
        for (const auto& l : spec.layers()) std::cout << "  " << l.name << ": " << l.size() << " options\n";
    }
    if (!a.out.empty()) write_text(a.out, csv.str());
    return 0;
}

// ---------- run ----------

struct RunArgs {
    std::string config;
    std::vector<std::string> data;
    std::string out = "run";
    std::string cache;
    unsigned jobs = 1;
    std::optional<std::uint64_t> seed;
    bool resume = false;
    bool strict = false;
};

int cmd_run(const RunArgs& a) {
    auto c = config::StudyConfig::load(a.config);
    for (const auto& d : a.data) c.override_data(d);
    if (a.seed) c.set_seed(*a.seed);
    auto loaded = config::load_study(c);
    const runner::RunIdentity id{c.id, c.hash(), loaded.data_hash, c.seed};
    runner::RunOptions opt;
    opt.out_dir = a.out;
    if (!a.cache.empty()) opt.cache_dir = fs::path(a.cache);
    opt.jobs = std::max(1u, a.jobs);
    opt.resume = a.resume;
    const auto r = runner::run(*loaded.executor, id, opt);
    const auto& m = r.manifest;
    std::cout << "study " << m.identity.study_id << ": " << m.feasible << " feasible paths, " << m.executed
              << " executed, " << m.cached << " from cache\n";
    for (const auto& [status, count] : m.tally) std::cout << "  " << status << ": " << count << '\n';
    std::cout << "wrote " << (fs::path(a.out) / "outcomes.csv").string() << '\n';
    const auto errors = m.tally.count("error") ? m.tally.at("error") : 0;
    if (errors) {
        std::cerr << "warning: " << errors << " path(s) failed; see the note column of outcomes.csv\n";
        if (a.strict) return kStrict;
    }
    return 0;
}

// ---------- analyze ----------

struct AnalyzeArgs {
    std::string run = "run";
    std::string out;
    std::vector<std::string> where;
    // average / conditional
    std::string scheme = "all";
    double alpha = 0.05;
    std::string sigma = "source";
    std::string compat = "repaired";
    std::vector<std::string> layers;
    // intervals
    std::string field = "t";
    std::size_t k_min = 1, k_max = 0;
    // etc
    std::optional<double> bstar;
    double q = 0.9;
    std::string fit = "gaussian";
    double nu = 3;
    std::string etc_field = "b";
    // mtest
    std::string method = "both";
    double level = 0.95;
    std::string benchmark = "pointwise";
    std::string series_layer = "characteristic";
    std::size_t block = 1;
    std::size_t replicates = 576;
    std::uint64_t seed = 1;
    std::string config;
    std::vector<std::string> reference;
    unsigned jobs = 1;
    // phack
    std::string group_layer = "characteristic";
    std::size_t bins = 10;
};

std::vector<const PathOutcome*> filtered(const OutcomeSet& set, const std::vector<std::string>& where) {
    const auto& spec = set.spec();
    std::vector<std::pair<std::size_t, std::size_t>> conds;
    for (const auto& w : where) {
        const auto [layer, option] = split_assignment(w, "--where");
        const auto j = spec.layer_index(layer);
        conds.emplace_back(j, spec.option_index(j, option));
    }
    std::vector<const PathOutcome*> out;
    for (const auto* o : set.usable()) {
        bool keep = true;
        for (const auto& [j, k] : conds) keep = keep && (o->path_index / spec.stride(j)) % spec.layers()[j].size() == k;
        if (keep) out.push_back(o);
    }
    return out;
}

json provenance(const runner::RunManifest& m) {
    return {{"engine_version", config::engine_version},
            {"run_engine_version", m.engine_version},
            {"study_id", m.identity.study_id},
            {"config_hash", m.identity.config_hash},
            {"data_hash", m.identity.data_hash},
            {"seed", m.identity.seed}};
}

int analyze_average(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    const auto paths = filtered(run.outcomes, a.where);
    if (paths.empty()) throw DataError("no usable outcomes match the filters");
    averaging::AveragingOptions opt;
    opt.alpha = a.alpha;
    opt.sigma = averaging::parse_sigma_convention(a.sigma);
    opt.compat = averaging::parse_bayes_compat(a.compat);
    std::vector<averaging::WeightedAverage> res;
    const std::vector<std::string> schemes =
        a.scheme == "all" ? std::vector<std::string>{"uniform", "aic", "bayes"} : std::vector<std::string>{a.scheme};
    for (const auto& s : schemes) {
        switch (averaging::parse_weight_scheme(s)) {
            case averaging::WeightScheme::uniform: res.push_back(averaging::simple_average(paths, opt)); break;
            case averaging::WeightScheme::aic: res.push_back(averaging::frequentist_average(paths, opt)); break;
            case averaging::WeightScheme::bayes: res.push_back(averaging::bayesian_average(paths, opt)); break;
        }
    }
    json j{{"provenance", provenance(run.manifest)}, {"filters", a.where}, {"paths", paths.size()}};
    std::ostringstream csv;
    csv << "scheme,estimate,sigma,variance,t_star,lo,hi,paths\n";
    for (const auto& w : res) {
        j["averages"].push_back(w.to_json());
        csv << w.scheme << ',' << num(w.estimate) << ',' << num(w.sigma) << ',' << num(w.variance) << ','
            << num(w.t_star) << ',' << num(w.lo) << ',' << num(w.hi) << ',' << w.paths.size() << '\n';
        std::cout << w.scheme << ": " << num(w.estimate) << " [" << num(w.lo) << ", " << num(w.hi) << "]\n";
    }
    write_json(out / "average.json", j);
    write_text(out / "average.csv", csv.str());
    return 0;
}

int analyze_conditional(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    const auto& spec = run.outcomes.spec();
    std::vector<std::string> layers = a.layers;
    if (layers.empty())
        for (const auto& l : spec.layers()) layers.push_back(l.name);
    const auto scheme = averaging::parse_weight_scheme(a.scheme == "all" ? "uniform" : a.scheme);
    averaging::AveragingOptions opt;
    opt.alpha = a.alpha;
    opt.sigma = averaging::parse_sigma_convention(a.sigma);
    opt.compat = averaging::parse_bayes_compat(a.compat);
    json j{{"provenance", provenance(run.manifest)}, {"scheme", averaging::to_string(scheme)}};
    std::ostringstream csv;
    csv << "layer,option_a,option_b,pairs,dropped,average_a,average_b,mean_delta,t,p_value,stars\n";
    for (const auto& layer : layers) {
        const auto rep = averaging::layer_report(run.outcomes, layer, scheme, opt);
        j["layers"].push_back(rep.to_json());
        for (const auto& s : rep.pairwise) {
            csv << io::csv_escape(s.layer) << ',' << io::csv_escape(s.option_a) << ',' << io::csv_escape(s.option_b)
                << ',' << s.pairs << ',' << s.dropped << ',' << num(s.average_a) << ',' << num(s.average_b) << ','
                << num(s.mean_delta) << ',' << num(s.t) << ',' << num(s.p_value) << ','
                << averaging::stars(s.p_value) << '\n';
        }
    }
    write_json(out / "conditional.json", j);
    write_text(out / "conditional.csv", csv.str());
    return 0;
}

int analyze_intervals(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    auto rep = pathmetrics::hacking_interval_report(run.outcomes, pathmetrics::parse_field(a.field), a.jobs);
    const std::size_t kmax = a.k_max ? a.k_max : rep.layers - 1;
    if (a.k_min < 1 || kmax >= rep.layers || a.k_min > kmax) throw DomainError("K range must lie within 1..J-1");
    std::erase_if(rep.slices, [&](const auto& s) { return s.K < a.k_min || s.K > kmax; });
    json j = rep.to_json();
    j["provenance"] = provenance(run.manifest);
    std::ostringstream csv;
    rep.write_csv(csv, run.outcomes.spec());
    write_json(out / "intervals.json", j);
    write_text(out / "intervals.csv", csv.str());
    for (std::size_t n = 0; n < rep.ari_by_free.size(); ++n)
        std::cout << "free " << n + 1 << ": ARI " << num(rep.ari_by_free[n]) << '\n';
    if (std::isfinite(rep.fit.b)) std::cout << "ARI(n) = " << num(rep.fit.a) << " x " << num(rep.fit.b) << "^n\n";
    return 0;
}

int analyze_etc(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    if (!a.bstar) throw ValidationError("etc needs --bstar");
    const auto field = pathmetrics::parse_field(a.etc_field);
    std::vector<double> x;
    for (const auto* o : filtered(run.outcomes, a.where)) {
        const double v = pathmetrics::field_value(*o, field);
        if (std::isfinite(v)) x.push_back(v);
    }
    const auto r = pathmetrics::etc_score(x, *a.bstar, a.q, pathmetrics::parse_fit(a.fit, a.nu));
    json j = r.to_json();
    j["field"] = a.etc_field;
    j["filters"] = a.where;
    j["provenance"] = provenance(run.manifest);
    std::ostringstream csv;
    csv << "value\n";
    for (double v : x) csv << num(v) << '\n';
    write_json(out / "etc.json", j);
    write_text(out / "etc_outcomes.csv", csv.str());
    std::cout << "theta " << num(r.theta) << ", F(b*) " << num(r.cdf_at_b) << ", EtC " << num(r.etc) << '\n';
    return 0;
}

Eigen::MatrixXd default_returns(const sorting::AnomaliesStudy& study) {
    const auto& spec = study.spec();
    const auto N = spec.layers()[spec.layer_index("characteristic")].size();
    std::vector<sorting::LongShortSeries> series;
    std::map<std::int64_t, long> rows;
    for (std::size_t c = 0; c < N; ++c) {
        series.push_back(study.path_returns(spec.assignment(study.default_path(c))));
        for (auto d : series.back().dates) rows.emplace(d, 0);
    }
    long r = 0;
    for (auto& [d, row] : rows) row = r++;
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(r, static_cast<long>(N), PathOutcome::nan);
    for (std::size_t c = 0; c < N; ++c)
        for (std::size_t i = 0; i < series[c].dates.size(); ++i)
            m(rows.at(series[c].dates[i]), static_cast<long>(c)) = series[c].returns[i];
    return m;
}

int analyze_mtest(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    if (a.method != "brc" && a.method != "emt" && a.method != "both")
        throw ValidationError("--method must be brc, emt or both");
    const auto& spec = run.outcomes.spec();
    std::optional<config::LoadedStudy> loaded;
    if (!a.config.empty()) {
        auto c = config::StudyConfig::load(a.config);
        if (c.hash() != run.manifest.identity.config_hash && !run.manifest.identity.config_hash.empty())
            std::cerr << "warning: config hash differs from the run's manifest\n";
        loaded = config::load_study(c);
    }
    json j{{"provenance", provenance(run.manifest)}, {"level", a.level}};
    std::vector<double> brc_max, emt_max;
    if (a.method != "emt") {
        const auto* study = loaded ? dynamic_cast<const sorting::AnomaliesStudy*>(loaded->executor.get()) : nullptr;
        if (!study) throw ValidationError("brc needs --config pointing at the anomalies study that produced the run");
        const auto returns = default_returns(*study);
        const std::size_t L = std::min<std::size_t>(a.block, static_cast<std::size_t>(returns.rows()));
        auto d = mtesting::brc(returns, L, a.replicates, a.seed, a.level, std::max(1u, a.jobs));
        j["brc"] = d.to_json();
        j["brc"]["block"] = L;
        j["brc"]["seed"] = a.seed;
        j["brc"]["months"] = returns.rows();
        brc_max = d.maxima;
        std::cout << "bootstrap threshold (" << a.replicates << " replicates): " << num(d.threshold) << '\n';
    }
    if (a.method != "brc") {
        const auto m = mtesting::moments_from_outcomes(run.outcomes, a.series_layer);
        const auto bench = mtesting::parse_benchmark(a.benchmark);
        std::optional<std::size_t> ref;
        if (bench == mtesting::Benchmark::pointwise) {
            if (!a.reference.empty()) {
                std::vector<std::size_t> choices(spec.layer_count(), 0);
                for (const auto& r : a.reference) {
                    const auto [layer, option] = split_assignment(r, "--reference");
                    const auto jl = spec.layer_index(layer);
                    choices[jl] = spec.option_index(jl, option);
                }
                ref = mtesting::moments_row(spec, a.series_layer, spec.encode(choices));
            } else if (loaded) {
                if (auto p = config::default_path(*loaded->executor)) ref = mtesting::moments_row(spec, a.series_layer, *p);
            }
            if (!ref) throw ValidationError("pointwise benchmark needs --reference layer=option... or --config");
        }
        auto d = mtesting::emt(m, bench, ref, a.level);
        j["emt"] = d.to_json();
        j["emt"]["series_layer"] = a.series_layer;
        emt_max = d.maxima;
        std::cout << "path threshold (" << d.maxima.size() << " paths): " << num(d.threshold) << '\n';
    }
    std::ostringstream csv;
    csv << "rank,bootstrap_max,path_max\n";
    for (std::size_t i = 0; i < std::max(brc_max.size(), emt_max.size()); ++i) {
        csv << i + 1 << ',' << (i < brc_max.size() ? num(brc_max[i]) : "") << ','
            << (i < emt_max.size() ? num(emt_max[i]) : "") << '\n';
    }
    write_json(out / "mtest.json", j);
    write_text(out / "mtest_maxima.csv", csv.str());
    return 0;
}

int analyze_phack(const AnalyzeArgs& a, const runner::RunDirectory& run, const fs::path& out) {
    const auto rows = pathmetrics::kappa_table(run.outcomes, a.group_layer, a.bins);
    json j{{"provenance", provenance(run.manifest)}, {"group_layer", a.group_layer}, {"bins", a.bins}};
    std::map<std::string, std::size_t> classes;
    for (const auto& r : rows) {
        json row = r.report.to_json();
        row["group"] = r.group;
        row["paths"] = r.paths;
        j["groups"].push_back(row);
        ++classes[r.paths ? r.report.label : "undefined"];
    }
    j["classes"] = classes;
    std::ostringstream csv;
    pathmetrics::write_kappa_csv(csv, rows);
    write_json(out / "phack.json", j);
    write_text(out / "phack.csv", csv.str());
    for (const auto& [label, n] : classes) std::cout << label << ": " << n << '\n';
    return 0;
}

int cmd_analyze(const std::string& sub, const AnalyzeArgs& a) {
    const auto run = runner::read_run(a.run);
    const fs::path out = a.out.empty() ? fs::path(a.run) / "reports" : fs::path(a.out);
    fs::create_directories(out);
    if (sub == "average") return analyze_average(a, run, out);
    if (sub == "conditional") return analyze_conditional(a, run, out);
    if (sub == "intervals") return analyze_intervals(a, run, out);
    if (sub == "etc") return analyze_etc(a, run, out);
    if (sub == "mtest") return analyze_mtest(a, run, out);
    return analyze_phack(a, run, out);
}

// ---------- simulate ----------

struct SimulateArgs {
    std::string config;
    std::string out = "simulation";
    std::string mode = "convergence";
    std::optional<double> rho;
    std::optional<std::size_t> worlds;
    std::optional<std::uint64_t> seed;
    std::string sweep;
    std::optional<std::size_t> radix, layers, from, to;
    std::vector<std::size_t> radices;
    std::vector<std::size_t> grid;
    unsigned jobs = 1;
};

int cmd_simulate(const SimulateArgs& a) {
    json cfg = json::object();
    if (!a.config.empty()) {
        try {
            cfg = json::parse(io::read_file(a.config));
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("simulation config is not valid JSON: ") + e.what());
        }
    }
    const std::string mode = cfg.value("mode", a.mode);
    const std::uint64_t seed = a.seed.value_or(cfg.value("seed", std::uint64_t{1}));
    const std::size_t worlds = a.worlds.value_or(cfg.value("worlds", std::size_t{500}));
    fs::create_directories(a.out);
    const fs::path out(a.out);

    if (mode == "dgp") {
        auto dgp = simlab::DgpConfig::from_json(cfg.value("dgp", json::object()));
        dgp.seed = seed;
        if (a.rho) dgp.rho = *a.rho;
        auto grid = a.grid.empty() ? cfg.value("grid", std::vector<std::size_t>{3, 3, 2}) : a.grid;
        const auto spec = pathgrid::make_grid(grid);
        const simlab::PathSimulator sim(dgp, spec);
        const auto B = sim.estimates(worlds, std::max(1u, a.jobs));
        std::ostringstream csv;
        csv << "world";
        for (std::size_t p = 0; p < sim.paths(); ++p) csv << ",p" << p;
        csv << '\n';
        for (long w = 0; w < B.rows(); ++w) {
            csv << w;
            for (long p = 0; p < B.cols(); ++p) csv << ',' << num(B(w, p));
            csv << '\n';
        }
        write_text(out / "estimates.csv", csv.str());
        write_json(out / "dgp.json", {{"engine_version", config::engine_version},
                                      {"dgp", dgp.to_json()},
                                      {"grid", grid},
                                      {"worlds", worlds}});
        return 0;
    }
    if (mode != "convergence") throw ValidationError("simulation mode must be convergence or dgp");

    const double rho = a.rho.value_or(cfg.value("rho", 0.5));
    std::vector<std::vector<std::size_t>> points;
    const json sw = cfg.value("sweep", json::object());
    const std::string vary = !a.sweep.empty() ? a.sweep : sw.value("vary", std::string(a.radices.empty() ? "layers" : "fixed"));
    const std::size_t from = a.from.value_or(sw.value("from", std::size_t{2}));
    const std::size_t to = a.to.value_or(sw.value("to", std::size_t{8}));
    if (vary == "fixed") {
        auto r = a.radices.empty() ? cfg.value("radices", std::vector<std::size_t>{}) : a.radices;
        if (r.empty()) throw ValidationError("a fixed grid needs --radices");
        points.push_back(r);
    } else if (vary == "layers") {
        const std::size_t r = a.radix.value_or(sw.value("radix", std::size_t{2}));
        for (std::size_t J = from; J <= to; ++J) points.emplace_back(J, r);
    } else if (vary == "options") {
        const std::size_t J = a.layers.value_or(sw.value("layers", std::size_t{2}));
        for (std::size_t r = from; r <= to; ++r) points.emplace_back(J, r);
    } else {
        throw ValidationError("--sweep must be layers, options or fixed");
    }
    std::vector<simlab::ConvergencePoint> curve;
    for (const auto& r : points) {
        curve.push_back(simlab::convergence_diagnostic(r, rho, worlds, seed, std::max(1u, a.jobs)));
        const auto& p = curve.back();
        std::cout << "P=" << p.paths << " sup-MSE " << num(p.sup_mse) << " (se " << num(p.mse_se) << "), bound "
                  << num(p.bound) << '\n';
    }
    std::ostringstream csv;
    simlab::write_convergence_csv(csv, curve);
    write_text(out / "convergence.csv", csv.str());
    json j{{"engine_version", config::engine_version}, {"rho", rho}, {"worlds", worlds}, {"seed", seed},
           {"sweep", vary}, {"bound_constant", 1}};
    for (const auto& p : curve) j["points"].push_back(p.to_json());
    write_json(out / "convergence.json", j);
    return 0;
}

// ---------- generate ----------

struct GenerateArgs {
    std::string kind;
    std::string out = "data";
    std::uint64_t seed = 1;
    std::optional<std::size_t> months, stocks, characteristics, assets;
};

int cmd_generate(const GenerateArgs& a) {
    fs::create_directories(a.out);
    const fs::path out(a.out);
    auto panel_text = [](const datapanel::DataPanel& p) {
        std::ostringstream s;
        datapanel::write_panel_csv(p, s);
        return s.str();
    };
    if (a.kind == "macro") {
        synthetic::MacroOptions o;
        o.seed = a.seed;
        if (a.months) o.months = *a.months;
        write_text(out / "macro_monthly.csv", panel_text(synthetic::macro_panel(o)));
    } else if (a.kind == "stocks") {
        synthetic::StockOptions o;
        o.seed = a.seed;
        if (a.months) o.months = *a.months;
        if (a.stocks) o.stocks = *a.stocks;
        if (a.characteristics) o.characteristics = *a.characteristics;
        const auto p = synthetic::stock_panel(o);
        std::ostringstream s;
        s << "permno,date";
        for (const auto& n : p.names) s << ',' << io::csv_escape(n);
        s << '\n';
        for (std::size_t r = 0; r < p.rows(); ++r) {
            s << p.ids[r] << ',' << p.dates[r];
            for (const auto& c : p.columns) s << ',' << (c[r] ? num(*c[r]) : "");
            s << '\n';
        }
        write_text(out / "stocks.csv", s.str());
    } else {
        synthetic::FactorOptions o;
        o.seed = a.seed;
        if (a.months) o.months = *a.months;
        if (a.assets) o.assets = *a.assets;
        const auto e = synthetic::factor_economy(o);
        write_text(out / "factors_monthly.csv", panel_text(e.factors_monthly));
        write_text(out / "factors_daily.csv", panel_text(e.factors_daily));
        write_text(out / "assets_monthly.csv", panel_text(e.assets_monthly));
        write_text(out / "assets_daily.csv", panel_text(e.assets_daily));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forking-path analysis of empirical finance protocols"};
    app.set_version_flag("--version", config::engine_version);
    app.require_subcommand(1);

    EnumerateArgs en;
    auto* enumerate = app.add_subcommand("enumerate", "List the paths of a study grid");
    enumerate->add_option("--config", en.config, "Study config (JSON)")->required()->envname("FORKPATH_CONFIG");
    enumerate->add_option("--out", en.out, "Write the path table to this CSV file");
    enumerate->add_flag("--quiet", en.quiet, "Print nothing but written files");

    RunArgs rn;
    auto* run = app.add_subcommand("run", "Execute every feasible path of a study");
    run->add_option("--config", rn.config, "Study config (JSON)")->required()->envname("FORKPATH_CONFIG");
    run->add_option("--data", rn.data, "Data file for the study, or key=path into the config's data block");
    run->add_option("--out", rn.out, "Run directory")->envname("FORKPATH_OUT");
    run->add_option("--cache", rn.cache, "Cache directory (default <out>/cache)")->envname("FORKPATH_CACHE");
    run->add_option("--jobs", rn.jobs, "Worker threads")->envname("FORKPATH_JOBS")->check(CLI::PositiveNumber);
    run->add_option("--seed", rn.seed, "Seed (overrides the config)")->envname("FORKPATH_SEED");
    run->add_flag("--resume", rn.resume, "Reuse cached path outcomes");
    run->add_flag("--strict", rn.strict, "Exit with status 3 when any path fails");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Reports over a run's outcomes");
    analyze->require_subcommand(1);
    auto common = [&](CLI::App* s) {
        s->add_option("--run", an.run, "Run directory written by `run`")->envname("FORKPATH_RUN");
        s->add_option("--out", an.out, "Report directory (default <run>/reports)");
    };
    auto* average = analyze->add_subcommand("average", "Weighted averages over paths");
    common(average);
    average->add_option("--scheme", an.scheme)->check(CLI::IsMember({"all", "uniform", "aic", "bayes"}));
    average->add_option("--alpha", an.alpha, "Interval level is 1 - alpha");
    average->add_option("--sigma", an.sigma)->check(CLI::IsMember({"source", "paper"}));
    average->add_option("--compat", an.compat, "Bayes factor reading")->check(CLI::IsMember({"repaired", "paper"}));
    average->add_option("--where", an.where, "Keep paths through layer=option");
    auto* conditional = analyze->add_subcommand("conditional", "Per-option averages and split tests");
    common(conditional);
    conditional->add_option("--layer", an.layers, "Layers to test (default all)");
    conditional->add_option("--scheme", an.scheme)->check(CLI::IsMember({"all", "uniform", "aic", "bayes"}));
    conditional->add_option("--alpha", an.alpha);
    conditional->add_option("--compat", an.compat)->check(CLI::IsMember({"repaired", "paper"}));
    auto* intervals = analyze->add_subcommand("intervals", "Hacking intervals and ARI");
    common(intervals);
    intervals->add_option("--field", an.field)->check(CLI::IsMember({"t", "b"}));
    intervals->add_option("--k-min", an.k_min, "Smallest number of fixed layers reported");
    intervals->add_option("--k-max", an.k_max, "Largest number of fixed layers reported");
    intervals->add_option("--jobs", an.jobs)->envname("FORKPATH_JOBS");
    auto* etc = analyze->add_subcommand("etc", "Ease to confirm a reference value");
    common(etc);
    etc->add_option("--bstar", an.bstar, "Reference (published) value")->required();
    etc->add_option("--q", an.q, "Threshold quantile");
    etc->add_option("--fit", an.fit)->check(CLI::IsMember({"empirical", "gaussian", "student"}));
    etc->add_option("--nu", an.nu, "Student degrees of freedom");
    etc->add_option("--field", an.etc_field)->check(CLI::IsMember({"t", "b"}));
    etc->add_option("--where", an.where, "Keep paths through layer=option");
    auto* mtest = analyze->add_subcommand("mtest", "Bootstrap and path-based multiple-testing thresholds");
    common(mtest);
    mtest->add_option("--method", an.method)->check(CLI::IsMember({"brc", "emt", "both"}));
    mtest->add_option("--level", an.level);
    mtest->add_option("--benchmark", an.benchmark)->check(CLI::IsMember({"pointwise", "average"}));
    mtest->add_option("--series-layer", an.series_layer);
    mtest->add_option("--block", an.block, "Bootstrap block length");
    mtest->add_option("--replicates", an.replicates, "Bootstrap replicates");
    mtest->add_option("--seed", an.seed)->envname("FORKPATH_SEED");
    mtest->add_option("--config", an.config, "Study config, needed for the bootstrap")->envname("FORKPATH_CONFIG");
    mtest->add_option("--reference", an.reference, "Benchmark configuration as layer=option");
    mtest->add_option("--jobs", an.jobs)->envname("FORKPATH_JOBS");
    auto* phack = analyze->add_subcommand("phack", "p-curve shape and kappa per group");
    common(phack);
    phack->add_option("--group-layer", an.group_layer);
    phack->add_option("--bins", an.bins);

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo checks of path-outcome convergence");
    simulate->add_option("--config", sm.config, "Simulation config (JSON)");
    simulate->add_option("--out", sm.out, "Output directory")->envname("FORKPATH_OUT");
    simulate->add_option("--mode", sm.mode)->check(CLI::IsMember({"convergence", "dgp"}));
    simulate->add_option("--rho", sm.rho);
    simulate->add_option("--worlds", sm.worlds);
    simulate->add_option("--seed", sm.seed)->envname("FORKPATH_SEED");
    simulate->add_option("--sweep", sm.sweep)->check(CLI::IsMember({"layers", "options", "fixed"}));
    simulate->add_option("--radix", sm.radix, "Options per layer when sweeping layers");
    simulate->add_option("--layers", sm.layers, "Layer count when sweeping options");
    simulate->add_option("--from", sm.from);
    simulate->add_option("--to", sm.to);
    simulate->add_option("--radices", sm.radices, "Layer sizes of a fixed grid")->delimiter(',');
    simulate->add_option("--grid", sm.grid, "Layer sizes for the dgp mode")->delimiter(',');
    simulate->add_option("--jobs", sm.jobs)->envname("FORKPATH_JOBS");

    GenerateArgs gn;
    auto* generate = app.add_subcommand("generate", "Write synthetic input files");
    generate->add_option("kind", gn.kind)->required()->check(CLI::IsMember({"macro", "stocks", "factors"}));
    generate->add_option("--out", gn.out)->envname("FORKPATH_OUT");
    generate->add_option("--seed", gn.seed)->envname("FORKPATH_SEED");
    generate->add_option("--months", gn.months);
    generate->add_option("--stocks", gn.stocks);
    generate->add_option("--characteristics", gn.characteristics);
    generate->add_option("--assets", gn.assets);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kUsage;
    }

    try {
        if (*enumerate) return cmd_enumerate(en);
        if (*run) return cmd_run(rn);
        if (*analyze) {
            for (auto* s : analyze->get_subcommands()) return cmd_analyze(s->get_name(), an);
        }
        if (*simulate) return cmd_simulate(sm);
        if (*generate) return cmd_generate(gn);
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
