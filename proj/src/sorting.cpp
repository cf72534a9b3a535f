#include "forkpath/sorting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forkpath/error.hpp"
#include "forkpath/regression.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::sorting {

namespace {

constexpr double kNaN = PathOutcome::nan;
constexpr std::size_t kMinStocks = 10;
constexpr std::size_t kMinReturns = 24;

bool special_column(std::string_view n) { return n == "ret" || n == "mvel1" || n == "retvol"; }

void normalize(std::vector<double>& w) {
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
}

}  // namespace

Weighting parse_weighting(std::string_view s) {
    if (s == "EW" || s == "ew") return Weighting::EW;
    if (s == "VW" || s == "vw") return Weighting::VW;
    if (s == "IVW" || s == "ivw") return Weighting::IVW;
    if (s == "CW" || s == "cw") return Weighting::CW;
    throw ValidationError("unknown weighting scheme '" + std::string(s) + "'");
}

std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::EW: return "EW";
        case Weighting::VW: return "VW";
        case Weighting::IVW: return "IVW";
        case Weighting::CW: return "CW";
    }
    return "?";
}

// === StockPanel ===

StockPanel StockPanel::from_long(const datapanel::LongPanel& panel, std::vector<std::string> characteristics) {
    for (const char* need : {"ret", "mvel1", "retvol"})
        if (!panel.find(need)) throw DataError(std::string("stock panel is missing column '") + need + "'");
    if (characteristics.empty())
        for (const auto& n : panel.names)
            if (!special_column(n)) characteristics.push_back(n);
    for (const auto& c : characteristics)
        if (!panel.find(c)) throw DataError("stock panel is missing characteristic '" + c + "'");

    StockPanel p;
    p.dates_ = panel.dates;
    p.ids_ = panel.ids;
    std::sort(p.dates_.begin(), p.dates_.end());
    p.dates_.erase(std::unique(p.dates_.begin(), p.dates_.end()), p.dates_.end());
    std::sort(p.ids_.begin(), p.ids_.end());
    p.ids_.erase(std::unique(p.ids_.begin(), p.ids_.end()), p.ids_.end());
    p.names_ = std::move(characteristics);

    const std::size_t T = p.dates_.size(), S = p.ids_.size();
    p.ret_.assign(T * S, kNaN);
    p.mvel1_.assign(T * S, kNaN);
    p.retvol_.assign(T * S, kNaN);
    p.listed_.assign(T * S, 0);
    p.chars_.assign(p.names_.size(), std::vector<double>(T * S, kNaN));

    const auto& ret = panel.column("ret");
    const auto& mv = panel.column("mvel1");
    const auto& vol = panel.column("retvol");
    std::vector<const datapanel::Series*> cols;
    for (const auto& c : p.names_) cols.push_back(&panel.column(c));
    auto val = [](const datapanel::Cell& c) { return c ? *c : kNaN; };
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        const auto t = static_cast<std::size_t>(
            std::lower_bound(p.dates_.begin(), p.dates_.end(), panel.dates[r]) - p.dates_.begin());
        const auto s = static_cast<std::size_t>(
            std::lower_bound(p.ids_.begin(), p.ids_.end(), panel.ids[r]) - p.ids_.begin());
        const std::size_t cell = t * S + s;
        if (p.listed_[cell])
            throw DataError("duplicate stock-month (" + std::to_string(panel.ids[r]) + ", " +
                            std::to_string(panel.dates[r]) + ")");
        p.listed_[cell] = 1;
        p.ret_[cell] = val(ret[r]);
        p.mvel1_[cell] = val(mv[r]);
        p.retvol_[cell] = val(vol[r]);
        for (std::size_t k = 0; k < cols.size(); ++k) p.chars_[k][cell] = val((*cols[k])[r]);
    }
    return p;
}

const std::vector<double>& StockPanel::raw(std::string_view characteristic) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
        if (names_[k] == characteristic) return chars_[k];
    if (characteristic == "mvel1") return mvel1_;
    if (characteristic == "retvol") return retvol_;
    throw DataError("unknown characteristic '" + std::string(characteristic) + "'");
}

std::vector<double> StockPanel::cleaned(std::string_view characteristic, Cleaning c) const {
    std::vector<double> v = raw(characteristic);
    if (c == Cleaning::remove) return v;
    const std::size_t T = months(), S = stocks();
    for (std::size_t s = 0; s < S; ++s) {
        double last = kNaN;
        for (std::size_t t = 0; t < T; ++t) {
            double& x = v[t * S + s];
            if (std::isfinite(x))
                last = x;
            else if (listed_[t * S + s])
                x = last;
        }
    }
    return v;
}

StockPanel StockPanel::with_characteristic(const std::string& name, std::vector<double> values) const {
    if (values.size() != months() * stocks()) throw DomainError("characteristic size does not match the panel");
    StockPanel p = *this;
    for (std::size_t k = 0; k < p.names_.size(); ++k)
        if (p.names_[k] == name) {
            p.chars_[k] = std::move(values);
            return p;
        }
    p.names_.push_back(name);
    p.chars_.push_back(std::move(values));
    return p;
}

// === portfolios ===

Legs form_portfolio(const StockPanel& panel, std::span<const double> values, const SortConfig& config,
                    std::size_t t) {
    if (!(config.q > 0.0 && config.q < 0.5)) throw DomainError("quantile threshold must lie in (0, 0.5)");
    if (t >= panel.months()) throw DomainError("formation month out of range");
    const std::size_t S = panel.stocks();
    std::vector<std::size_t> universe;
    for (std::size_t s = 0; s < S; ++s) {
        if (!panel.listed(t, s) || !std::isfinite(values[t * S + s])) continue;
        if (config.weighting == Weighting::VW && !(panel.mvel1(t, s) > 0.0)) continue;
        if (config.weighting == Weighting::IVW && !(panel.retvol(t, s) > 0.0)) continue;
        universe.push_back(s);
    }
    const std::size_t N = universe.size();
    if (N < kMinStocks)
        throw DataError("only " + std::to_string(N) + " stocks with '" + config.characteristic + "' at " +
                        std::to_string(panel.dates()[t]));
    std::stable_sort(universe.begin(), universe.end(),
                     [&](std::size_t a, std::size_t b) { return values[t * S + a] < values[t * S + b]; });

    Legs legs;
    if (config.weighting == Weighting::CW) {
        const double centre = (static_cast<double>(N) + 1.0) / 2.0;
        std::vector<std::pair<std::size_t, double>> lo, hi;
        for (std::size_t r = 0; r < N; ++r) {
            const double c = static_cast<double>(r + 1) - centre;
            if (c > 0) hi.emplace_back(universe[r], c);
            if (c < 0) lo.emplace_back(universe[r], -c);
        }
        std::sort(lo.begin(), lo.end());
        std::sort(hi.begin(), hi.end());
        for (auto& [s, w] : hi) legs.long_members.push_back(s), legs.long_weights.push_back(w);
        for (auto& [s, w] : lo) legs.short_members.push_back(s), legs.short_weights.push_back(w);
    } else {
        const auto n = static_cast<std::size_t>(std::floor(config.q * static_cast<double>(N) + 1e-9));
        if (n == 0) throw DataError("empty portfolio leg");
        legs.short_members.assign(universe.begin(), universe.begin() + static_cast<long>(n));
        legs.long_members.assign(universe.end() - static_cast<long>(n), universe.end());
        std::sort(legs.short_members.begin(), legs.short_members.end());
        std::sort(legs.long_members.begin(), legs.long_members.end());
        auto weigh = [&](const std::vector<std::size_t>& m) {
            std::vector<double> w;
            for (std::size_t s : m) {
                switch (config.weighting) {
                    case Weighting::VW: w.push_back(panel.mvel1(t, s)); break;
                    case Weighting::IVW: w.push_back(1.0 / panel.retvol(t, s)); break;
                    default: w.push_back(1.0);
                }
            }
            return w;
        };
        legs.long_weights = weigh(legs.long_members);
        legs.short_weights = weigh(legs.short_members);
    }
    normalize(legs.long_weights);
    normalize(legs.short_weights);
    return legs;
}

Legs form_portfolio(const StockPanel& panel, const SortConfig& config, std::size_t t) {
    const auto v = panel.cleaned(config.characteristic, config.cleaning);
    return form_portfolio(panel, v, config, t);
}

LongShortSeries longshort_returns(const StockPanel& panel, std::span<const double> values, const SortConfig& config) {
    if (config.holding < 1 || config.holding > 3) throw DomainError("holding period must be 1, 2 or 3 months");
    const std::size_t T = panel.months();
    const std::size_t end = std::min(config.window_end, T);
    const std::size_t begin = config.window_begin;
    if (begin >= end || end - begin < kMinReturns + 1)
        throw DataError("window too short for " + std::to_string(kMinReturns) + " monthly returns");
    const auto h = static_cast<std::size_t>(config.holding);

    auto leg_return = [&](const std::vector<std::size_t>& m, const std::vector<double>& w, std::size_t t) {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double r = panel.ret(t, m[i]);
            if (!std::isfinite(r)) continue;
            num += w[i] * r;
            den += w[i];
        }
        return den > 0 ? num / den : kNaN;
    };

    LongShortSeries out;
    for (std::size_t i = begin; i + 1 < end; i += h) {
        const Legs legs = form_portfolio(panel, values, config, i);
        for (std::size_t t = i + 1; t <= std::min(i + h, end - 1); ++t) {
            const double rl = leg_return(legs.long_members, legs.long_weights, t);
            const double rs = leg_return(legs.short_members, legs.short_weights, t);
            if (!std::isfinite(rl) || !std::isfinite(rs)) continue;
            out.dates.push_back(panel.dates()[t]);
            out.returns.push_back(rl - rs);
            out.long_count.push_back(legs.long_members.size());
            out.short_count.push_back(legs.short_members.size());
        }
    }
    if (out.returns.size() < kMinReturns)
        throw DataError("only " + std::to_string(out.returns.size()) + " long-short returns in the window");
    return out;
}

LongShortSeries longshort_returns(const StockPanel& panel, const SortConfig& config) {
    const auto v = panel.cleaned(config.characteristic, config.cleaning);
    return longshort_returns(panel, v, config);
}

double sharpe_tstat(std::span<const double> series) {
    if (series.size() < kMinReturns) throw DomainError("Sharpe t-statistic needs at least 24 returns");
    const double sd = stats::sd_sample(series);
    double scale = 0;
    for (double x : series) scale = std::max(scale, std::abs(x));
    if (!(sd > 1e-13 * scale)) throw DomainError("Sharpe t-statistic undefined for a zero-variance series");
    return std::sqrt(static_cast<double>(series.size())) * stats::mean(series) / sd;
}

PathOutcome series_outcome(std::span<const double> series) {
    PathOutcome o;
    o.t = sharpe_tstat(series);
    const double T = static_cast<double>(series.size());
    o.b = stats::mean(series);
    o.se_iid = stats::sd_sample(series) / std::sqrt(T);
    o.se = o.se_iid;
    o.n = static_cast<long>(series.size());
    o.yvar = stats::variance_pop(series);
    o.rss = o.yvar * T;
    o.aic = regression::aic(o.n, o.rss, 1);
    o.k = 0;
    return o;
}

// === anomalies study ===

const std::vector<std::string>& reference_characteristics() {
    static const std::vector<std::string> names{
        "absacc",   "acc",      "aeavol",    "agr",       "baspread",      "beta",           "betasq",
        "bm",       "bm_ia",    "cash",      "cashdebt",  "cashpr",        "cfp",            "cfp_ia",
        "chatoia",  "chcsho",   "chempia",   "chinv",     "chmom",         "chpmia",         "chtx",
        "cinvest",  "currat",   "depr",      "dolvol",    "dy",            "ear",            "egr",
        "ep",       "gma",      "grcapx",    "grltnoa",   "herf",          "hire",           "idiovol",
        "ill",      "indmom",   "invest",    "lev",       "lgr",           "maxret",         "mom12m",
        "mom1m",    "mom36m",   "mom6m",     "mvel1",     "mve_ia",        "operprof",       "orgcap",
        "pchcapx_ia", "pchcurrat", "pchdepr", "pchgm_pchsale", "pchquick", "pchsale_pchinvt", "pchsale_pchrect",
        "pchsale_pchxsga", "pchsaleinv", "pctacc", "pricedelay", "quick", "rd_mve", "retvol",
        "roaq",     "roavol",   "roeq",      "roic",      "rsup",          "salecash",       "saleinv",
        "salerec",  "secured",  "sgr",       "sp",        "std_dolvol",    "std_turn",       "stdacc",
        "stdcf",    "tang",     "tb",        "turn",      "zerotrade"};
    return names;
}

pathgrid::StudySpec anomalies_spec(const std::vector<std::string>& characteristics) {
    using pathgrid::LayerSpec;
    using pathgrid::Option;
    auto opts = [](std::initializer_list<const char*> ids) {
        std::vector<Option> o;
        for (auto id : ids) o.push_back({id, nullptr});
        return o;
    };
    LayerSpec chars{"characteristic", {}};
    for (const auto& c : characteristics) chars.options.push_back({c, nullptr});
    return pathgrid::StudySpec({
        chars,
        {"cleaning", opts({"impute", "remove"})},
        {"holding", opts({"1m", "2m", "3m"})},
        {"window", opts({"min-t1", "min-t2", "min-max", "t1-t2", "t1-max", "t2-max"})},
        {"threshold", opts({"0.1", "0.2", "0.25", "0.3"})},
        {"weighting", opts({"EW", "VW", "IVW", "CW"})},
    });
}

std::pair<std::size_t, std::size_t> window_bounds(std::string_view window_id, std::size_t months) {
    const auto dash = window_id.find('-');
    if (dash == std::string_view::npos) throw ValidationError("window option '" + std::string(window_id) + "'");
    auto cut = [&](std::string_view b) -> std::size_t {
        if (b == "min") return 0;
        if (b == "t1") return months / 3;
        if (b == "t2") return 2 * months / 3;
        if (b == "max") return months;
        throw ValidationError("window bound '" + std::string(b) + "' (expected min, t1, t2 or max)");
    };
    const std::size_t s = cut(window_id.substr(0, dash)), e = cut(window_id.substr(dash + 1));
    if (s >= e) throw ValidationError("empty window '" + std::string(window_id) + "'");
    return {s, e};
}

AnomaliesStudy::AnomaliesStudy(pathgrid::StudySpec spec, std::shared_ptr<const StockPanel> panel)
    : spec_(std::move(spec)), panel_(std::move(panel)) {
    if (!panel_) throw ValidationError("anomalies study needs a stock panel");
    const auto& layer = spec_.layers()[spec_.layer_index("characteristic")];
    for (const auto& o : layer.options) (void)panel_->raw(pathgrid::option_string(o, "column"));
}

SortConfig AnomaliesStudy::resolve(const pathgrid::PathAssignment& path) const {
    SortConfig c;
    c.window_end = panel_->months();
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
        const auto& name = spec_.layers()[l].name;
        const auto& opt = spec_.option(l, path.choices.at(l));
        if (name == "characteristic") {
            c.characteristic = pathgrid::option_string(opt, "column");
        } else if (name == "cleaning") {
            const auto v = pathgrid::option_string(opt, "method");
            if (v == "impute")
                c.cleaning = Cleaning::impute;
            else if (v == "remove")
                c.cleaning = Cleaning::remove;
            else
                throw ValidationError("unknown cleaning option '" + v + "'");
        } else if (name == "holding") {
            c.holding = static_cast<int>(pathgrid::option_number(opt, "months").value_or(1));
        } else if (name == "window") {
            std::tie(c.window_begin, c.window_end) = window_bounds(opt.id, panel_->months());
        } else if (name == "threshold") {
            c.q = pathgrid::option_number(opt, "q").value_or(0.2);
        } else if (name == "weighting") {
            c.weighting = parse_weighting(pathgrid::option_string(opt, "scheme"));
        } else {
            throw ValidationError("anomalies study has no layer '" + name + "'");
        }
    }
    return c;
}

std::shared_ptr<const std::vector<double>> AnomaliesStudy::values(const std::string& name, Cleaning c) const {
    const auto key = std::make_pair(name, static_cast<int>(c));
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto v = std::make_shared<const std::vector<double>>(panel_->cleaned(name, c));
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(key, std::move(v)).first->second;
}

LongShortSeries AnomaliesStudy::path_returns(const pathgrid::PathAssignment& path) const {
    const auto c = resolve(path);
    return longshort_returns(*panel_, *values(c.characteristic, c.cleaning), c);
}

PathOutcome AnomaliesStudy::run_path(const pathgrid::PathAssignment& path) const {
    const auto series = path_returns(path);
    PathOutcome o = series_outcome(series.returns);
    o.path_index = path.index;
    return o;
}

std::uint64_t AnomaliesStudy::default_path(std::size_t characteristic) const {
    std::vector<std::size_t> choices(spec_.layer_count(), 0);
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
        const auto& name = spec_.layers()[l].name;
        if (name == "characteristic") {
            if (characteristic >= spec_.layers()[l].size()) throw DomainError("characteristic position out of range");
            choices[l] = characteristic;
        } else if (name == "cleaning") {
            choices[l] = spec_.option_index(l, "impute");
        } else if (name == "holding") {
            choices[l] = spec_.option_index(l, "1m");
        } else if (name == "window") {
            choices[l] = spec_.option_index(l, "min-max");
        } else if (name == "threshold") {
            choices[l] = spec_.option_index(l, "0.2");
        } else if (name == "weighting") {
            choices[l] = spec_.option_index(l, "EW");
        }
    }
    return spec_.encode(choices);
}

std::vector<std::uint64_t> AnomaliesStudy::robustness_paths(std::size_t characteristic) const {
    const auto base = spec_.decode(default_path(characteristic));
    const std::size_t fixed = spec_.layer_index("characteristic");
    std::vector<std::uint64_t> out;
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
        if (l == fixed) continue;
        for (std::size_t o = 0; o < spec_.layers()[l].size(); ++o) {
            if (o == base[l]) continue;
            auto c = base;
            c[l] = o;
            if (spec_.feasible(c)) out.push_back(spec_.encode(c));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CharacteristicSummary> summarize(const AnomaliesStudy& study, const OutcomeSet& outcomes) {
    const auto& spec = study.spec();
    const std::size_t cl = spec.layer_index("characteristic");
    std::vector<CharacteristicSummary> out;
    for (std::size_t c = 0; c < spec.layers()[cl].size(); ++c) {
        CharacteristicSummary s;
        s.characteristic = spec.layers()[cl].options[c].id;
        std::vector<double> ts;
        for (const auto* o : outcomes.where("characteristic", s.characteristic))
            if (std::isfinite(o->t)) ts.push_back(o->t);
        s.usable = ts.size();
        if (!ts.empty()) {
            s.median_t = stats::quantile(ts, 0.5);
            const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
            s.full_lo = *lo;
            s.full_hi = *hi;
        }
        if (const auto* d = outcomes.find(study.default_path(c)); d && d->usable()) s.default_t = d->t;
        for (auto idx : study.robustness_paths(c)) {
            const auto* o = outcomes.find(idx);
            if (!o || !o->usable() || !std::isfinite(o->t)) continue;
            s.robust_lo = std::isnan(s.robust_lo) ? o->t : std::min(s.robust_lo, o->t);
            s.robust_hi = std::isnan(s.robust_hi) ? o->t : std::max(s.robust_hi, o->t);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace forkpath::sorting
