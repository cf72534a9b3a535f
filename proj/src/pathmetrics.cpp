#include "forkpath/pathmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "forkpath/error.hpp"
#include "forkpath/parallel.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::pathmetrics {

namespace {

constexpr double kNaN = PathOutcome::nan;

std::vector<std::vector<std::size_t>> combinations_of(std::size_t J, std::size_t K) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> c(K);
    for (std::size_t i = 0; i < K; ++i) c[i] = i;
    while (true) {
        out.push_back(c);
        std::size_t i = K;
        while (i > 0 && c[i - 1] == J - K + i - 1) --i;
        if (i == 0) break;
        ++c[i - 1];
        for (std::size_t k = i; k < K; ++k) c[k] = c[k - 1] + 1;
    }
    return out;
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

Field parse_field(std::string_view s) {
    if (s == "t") return Field::t;
    if (s == "b") return Field::b;
    throw ValidationError("outcome field must be t or b");
}

double field_value(const PathOutcome& o, Field f) { return f == Field::t ? o.t : o.b; }

std::uint64_t interval_count(const pathgrid::StudySpec& spec, std::size_t K) {
    const std::size_t J = spec.layer_count();
    if (K < 1 || K >= J) throw DomainError("K must lie in 1..J-1");
    const auto r = spec.radices();
    std::uint64_t n = 0;
    for (const auto& c : combinations_of(J, K)) {
        std::uint64_t prod = 1;
        for (auto j : c) prod *= r[j];
        n += prod;
    }
    return n;
}

IntervalSlice hacking_intervals(const OutcomeSet& set, std::size_t K, Field field, unsigned jobs) {
    const auto& spec = set.spec();
    const std::size_t J = spec.layer_count();
    if (K < 1 || K >= J) throw DomainError("K must lie in 1..J-1");
    const auto r = spec.radices();

    std::vector<std::vector<std::size_t>> choices;
    std::vector<double> values;
    for (const auto& o : set.outcomes()) {
        if (!o.usable()) continue;
        const double v = field_value(o, field);
        if (!std::isfinite(v)) continue;
        choices.push_back(spec.decode(o.path_index));
        values.push_back(v);
    }

    IntervalSlice s;
    s.K = K;
    s.free = J - K;
    s.combinations = combinations_of(J, K);
    const std::size_t C = s.combinations.size();
    std::vector<std::vector<double>> lo(C), hi(C);
    std::vector<std::vector<std::size_t>> cnt(C);
    parallel_for(C, jobs, [&](std::size_t l) {
        const auto& c = s.combinations[l];
        std::uint64_t cells = 1;
        for (auto j : c) cells *= r[j];
        lo[l].assign(cells, std::numeric_limits<double>::infinity());
        hi[l].assign(cells, -std::numeric_limits<double>::infinity());
        cnt[l].assign(cells, 0);
        for (std::size_t p = 0; p < values.size(); ++p) {
            std::uint64_t key = 0;
            for (auto j : c) key = key * r[j] + choices[p][j];
            lo[l][key] = std::min(lo[l][key], values[p]);
            hi[l][key] = std::max(hi[l][key], values[p]);
            ++cnt[l][key];
        }
    });
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t l = 0; l < C; ++l) {
        for (std::uint64_t k = 0; k < lo[l].size(); ++k) {
            s.combination.push_back(l);
            s.configuration.push_back(k);
            s.members.push_back(cnt[l][k]);
            if (cnt[l][k] == 0) {
                s.ranges.push_back(kNaN);
                ++s.empty;
            } else {
                s.ranges.push_back(hi[l][k] - lo[l][k]);
                sum += s.ranges.back();
                ++used;
            }
        }
    }
    s.ari = used ? sum / static_cast<double>(used) : kNaN;
    return s;
}

HackingIntervalReport hacking_interval_report(const OutcomeSet& set, Field field, unsigned jobs) {
    const std::size_t J = set.spec().layer_count();
    if (J < 2) throw DomainError("hacking intervals need at least two layers");
    HackingIntervalReport rep;
    rep.field = field;
    rep.layers = J;
    for (const auto& o : set.outcomes()) {
        if (o.status == PathStatus::infeasible) continue;
        if (o.usable() && std::isfinite(field_value(o, field)))
            ++rep.usable;
        else
            ++rep.excluded;
    }
    for (std::size_t K = 1; K < J; ++K) rep.slices.push_back(hacking_intervals(set, K, field, jobs));
    rep.ari_by_free.assign(J - 1, kNaN);
    for (const auto& s : rep.slices) rep.ari_by_free[s.free - 1] = s.ari;
    for (std::size_t n = 2; n < J; ++n) rep.growth.push_back(rep.ari_by_free[n - 1] / rep.ari_by_free[n - 2] - 1);
    if (J >= 3 && std::all_of(rep.ari_by_free.begin(), rep.ari_by_free.end(), [](double a) { return a > 0; }))
        rep.fit = fit_power_law(rep.ari_by_free);
    return rep;
}

nlohmann::json HackingIntervalReport::to_json() const {
    nlohmann::json sl = nlohmann::json::array();
    for (const auto& s : slices) {
        std::vector<double> finite;
        for (double v : s.ranges)
            if (std::isfinite(v)) finite.push_back(v);
        std::sort(finite.begin(), finite.end());
        nlohmann::json j{{"K", s.K},
                         {"free", s.free},
                         {"intervals", s.ranges.size()},
                         {"empty", s.empty},
                         {"ari", number(s.ari)}};
        if (!finite.empty()) {
            j["min"] = finite.front();
            j["median"] = stats::quantile_sorted(finite, 0.5);
            j["max"] = finite.back();
        }
        sl.push_back(j);
    }
    nlohmann::json g = nlohmann::json::array();
    for (double v : growth) g.push_back(number(v));
    nlohmann::json a = nlohmann::json::array();
    for (double v : ari_by_free) a.push_back(number(v));
    return {{"field", field == Field::t ? "t" : "b"},
            {"layers", layers},
            {"usable", usable},
            {"excluded", excluded},
            {"slices", sl},
            {"ari_by_free", a},
            {"growth", g},
            {"power_law", {{"a", number(fit.a)}, {"b", number(fit.b)}, {"method", fit.method}}}};
}

void HackingIntervalReport::write_csv(std::ostream& out, const pathgrid::StudySpec& spec) const {
    out << "free,K,fixed_layers,configuration,members,range\n";
    for (const auto& s : slices) {
        for (std::size_t i = 0; i < s.ranges.size(); ++i) {
            const auto& c = s.combinations[s.combination[i]];
            std::string names, config;
            std::uint64_t key = s.configuration[i];
            std::vector<std::string> ids(c.size());
            for (std::size_t k = c.size(); k-- > 0;) {
                const auto rj = spec.layers()[c[k]].size();
                ids[k] = spec.option(c[k], key % rj).id;
                key /= rj;
            }
            for (std::size_t k = 0; k < c.size(); ++k) {
                names += (k ? "|" : "") + spec.layers()[c[k]].name;
                config += (k ? "|" : "") + ids[k];
            }
            out << s.free << ',' << s.K << ',' << names << ',' << config << ',' << s.members[i] << ',';
            if (std::isfinite(s.ranges[i])) out << s.ranges[i];
            out << '\n';
        }
    }
}

PowerLaw fit_power_law(std::span<const double> ari) {
    if (ari.size() < 2) throw DomainError("power-law fit needs at least two points");
    Eigen::MatrixXd X(static_cast<long>(ari.size()), 2);
    Eigen::VectorXd y(static_cast<long>(ari.size()));
    for (std::size_t i = 0; i < ari.size(); ++i) {
        if (!(ari[i] > 0)) throw DomainError("power-law fit needs positive ARI values");
        X(static_cast<long>(i), 0) = 1;
        X(static_cast<long>(i), 1) = static_cast<double>(i + 1);
        y(static_cast<long>(i)) = std::log(ari[i]);
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    PowerLaw p;
    p.a = std::exp(beta(0));
    p.b = std::exp(beta(1));
    return p;
}

DistributionFit parse_fit(std::string_view s, double nu) {
    if (s == "empirical") return {FitKind::empirical, nu};
    if (s == "gaussian" || s == "normal") return {FitKind::gaussian, nu};
    if (s == "student" || s == "t") {
        if (!(nu > 2)) throw ValidationError("student fit needs nu > 2");
        return {FitKind::student, nu};
    }
    throw ValidationError("fit must be empirical, gaussian or student");
}

std::string to_string(const DistributionFit& f) {
    switch (f.kind) {
        case FitKind::empirical: return "empirical";
        case FitKind::gaussian: return "gaussian";
        case FitKind::student: return "student";
    }
    return "";
}

double odds_of_favorable_outcome(double cdf_at_b, double q) {
    if (!(q > 0 && q < 1)) throw DomainError("q must lie in (0, 1)");
    if (!(cdf_at_b > q)) return 0;
    return std::clamp((cdf_at_b - q) / (1 - q), 0.0, 1.0);
}

EtCReport etc_score(std::span<const double> outcomes, double b_star, double q, DistributionFit fit) {
    if (!(q > 0 && q < 1)) throw DomainError("q must lie in (0, 1)");
    if (outcomes.empty()) throw DomainError("no outcomes to fit");
    EtCReport r;
    r.b_star = b_star;
    r.fit = fit;
    r.q = q;
    r.outcomes = outcomes.size();
    if (fit.kind == FitKind::empirical) {
        r.theta = stats::quantile(outcomes, q);
        const auto below = std::count_if(outcomes.begin(), outcomes.end(), [&](double v) { return v <= b_star; });
        r.cdf_at_b = static_cast<double>(below) / static_cast<double>(outcomes.size());
    } else {
        if (outcomes.size() < 30) throw DomainError("parametric fits need at least 30 outcomes");
        r.location = stats::mean(outcomes);
        const double sd = stats::sd_sample(outcomes);
        if (!(sd > 0) || !std::isfinite(sd)) throw DomainError("degenerate dispersion across outcomes");
        if (fit.kind == FitKind::gaussian) {
            r.scale = sd;
            r.theta = r.location + sd * stats::normal_quantile(q);
            r.cdf_at_b = stats::normal_cdf((b_star - r.location) / sd);
        } else {
            if (!(fit.nu > 2)) throw DomainError("student fit needs nu > 2");
            r.scale = sd * std::sqrt((fit.nu - 2) / fit.nu);
            r.theta = r.location + r.scale * stats::student_quantile(q, fit.nu);
            r.cdf_at_b = stats::student_cdf((b_star - r.location) / r.scale, fit.nu);
        }
    }
    r.ofo = b_star > r.theta ? odds_of_favorable_outcome(r.cdf_at_b, q) : 0.0;
    r.etc = 1 - r.ofo;
    return r;
}

nlohmann::json EtCReport::to_json() const {
    nlohmann::json j{{"b_star", b_star}, {"fit", to_string(fit)}, {"q", q},         {"theta", number(theta)},
                     {"cdf_at_b", number(cdf_at_b)}, {"ofo", ofo}, {"etc", etc}, {"outcomes", outcomes}};
    if (fit.kind == FitKind::student) j["nu"] = fit.nu;
    if (fit.kind != FitKind::empirical) {
        j["location"] = number(location);
        j["scale"] = number(scale);
    }
    return j;
}

std::string kappa_class(double kappa) {
    if (!std::isfinite(kappa)) return "undefined";
    if (kappa < 0.25) return "unnecessary";
    if (kappa <= 0.4) return "possible";
    return "problematic";
}

PCurveReport pcurve_from_counts(std::vector<std::size_t> counts) {
    const std::size_t I = counts.size();
    if (I < 2 || I % 2 != 0) throw DomainError("the number of bins must be even and at least 2");
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw DomainError("no p-values");
    PCurveReport r;
    r.bins = I;
    r.counts = std::move(counts);
    const auto n = [&](std::size_t i) { return static_cast<double>(r.counts[i - 1]); };
    for (std::size_t i = 1; i <= (I - 1) / 2; ++i) {
        if (n(i) <= n(i + 1)) r.monotonicity_violations.push_back(i);
        if (i + 2 > I) continue;
        if (n(i + 1) == 0 || n(i + 2) == 0) {
            r.undefined_ratios.push_back(i);
            continue;
        }
        if (n(i) / n(i + 1) <= n(i + 1) / n(i + 2)) r.convexity_violations.push_back(i);
    }
    double kappa = 0;
    bool any = false;
    for (std::size_t i = 1; i <= I / 2; ++i) {
        if (n(i) == 0) {
            r.complete = false;
            continue;
        }
        kappa += n(i + 1) / n(i) / static_cast<double>(i);
        any = true;
    }
    r.kappa = any ? kappa : kNaN;
    r.label = kappa_class(r.kappa);
    return r;
}

PCurveReport pcurve_report(std::span<const double> p_values, std::size_t bins) {
    if (p_values.empty()) throw DomainError("no p-values");
    if (bins < 2 || bins % 2 != 0) throw DomainError("the number of bins must be even and at least 2");
    std::vector<std::size_t> counts(bins, 0);
    for (double p : p_values) {
        if (!(p >= 0 && p <= 1)) throw DomainError("p-values must lie in [0, 1]");
        ++counts[std::min(static_cast<std::size_t>(p * static_cast<double>(bins)), bins - 1)];
    }
    return pcurve_from_counts(std::move(counts));
}

nlohmann::json PCurveReport::to_json() const {
    return {{"bins", bins},
            {"counts", counts},
            {"monotonicity_violations", monotonicity_violations},
            {"convexity_violations", convexity_violations},
            {"undefined_ratios", undefined_ratios},
            {"kappa", number(kappa)},
            {"complete", complete},
            {"class", label}};
}

std::vector<KappaRow> kappa_table(const OutcomeSet& set, std::string_view group_layer, std::size_t bins) {
    const auto& spec = set.spec();
    const std::size_t j = spec.layer_index(group_layer);
    std::vector<KappaRow> rows;
    for (const auto& opt : spec.layers()[j].options) {
        std::vector<double> p;
        for (const auto* o : set.where(group_layer, opt.id))
            if (std::isfinite(o->t) && o->n > 1) p.push_back(stats::two_sided_p(o->t, static_cast<double>(o->n - 1)));
        KappaRow row;
        row.group = opt.id;
        row.paths = p.size();
        if (!p.empty()) row.report = pcurve_report(p, bins);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_kappa_csv(std::ostream& out, const std::vector<KappaRow>& rows) {
    out << "group,paths,kappa,class,complete,monotonicity_violations,convexity_violations\n";
    for (const auto& r : rows) {
        out << r.group << ',' << r.paths << ',';
        if (std::isfinite(r.report.kappa)) out << r.report.kappa;
        out << ',' << (r.paths ? r.report.label : "undefined") << ',' << (r.report.complete ? 1 : 0) << ','
            << r.report.monotonicity_violations.size() << ',' << r.report.convexity_violations.size() << '\n';
    }
}

}  // namespace forkpath::pathmetrics
