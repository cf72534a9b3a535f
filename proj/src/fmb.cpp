#include "forkpath/fmb.hpp"

#include <algorithm>
#include <cmath>

#include "forkpath/error.hpp"
#include "forkpath/regression.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::fmb {

using datapanel::DataPanel;
using datapanel::Frequency;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = PathOutcome::nan;

struct Fit {
    VectorXd coef;
    double rss = 0;
    bool ok = false;
};

Fit least_squares(const MatrixXd& X, const VectorXd& y) {
    Fit f;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) return f;
    f.coef = qr.solve(y);
    f.rss = (y - X * f.coef).squaredNorm();
    f.ok = true;
    return f;
}

// clamp the finite entries of v at the k-th order statistics of each tail
void winsorize_finite(VectorXd& v, double fraction) {
    if (fraction <= 0) return;
    std::vector<double> x;
    std::vector<long> at;
    for (long i = 0; i < v.size(); ++i)
        if (std::isfinite(v(i))) x.push_back(v(i)), at.push_back(i);
    const std::size_t k = datapanel::winsor_count(fraction, x.size());
    if (k == 0 || 2 * k >= x.size()) return;
    const auto w = datapanel::winsorize(x, k);
    for (std::size_t i = 0; i < at.size(); ++i) v(at[i]) = w[i];
}

std::string winsor_key(double w) { return std::to_string(static_cast<long>(std::lround(w * 10000))); }

}  // namespace

PassMode parse_pass_mode(std::string_view s) {
    if (s == "full") return PassMode::full;
    if (s == "rolling_short") return PassMode::rolling_short;
    if (s == "rolling_long") return PassMode::rolling_long;
    throw ValidationError("unknown regression type '" + std::string(s) + "' (full, rolling_short, rolling_long)");
}

std::size_t window_length(PassMode mode, Frequency f) {
    const bool daily = f == Frequency::daily;
    switch (mode) {
        case PassMode::full: return 0;
        case PassMode::rolling_short: return daily ? 120 : 24;
        case PassMode::rolling_long: return daily ? 300 : 60;
    }
    return 0;
}

ReturnFrame to_frame(const DataPanel& panel, std::vector<std::string> columns) {
    if (columns.empty()) columns = panel.column_names();
    ReturnFrame f;
    f.dates = panel.dates();
    f.names = columns;
    f.values.resize(static_cast<long>(f.dates.size()), static_cast<long>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& c = panel.column(columns[j]);
        for (std::size_t t = 0; t < c.size(); ++t)
            f.values(static_cast<long>(t), static_cast<long>(j)) = c[t] && *c[t] > -99.99 ? *c[t] : kNaN;
    }
    return f;
}

DataPanel normalize_factor_names(const DataPanel& factors) {
    std::vector<std::pair<std::string, datapanel::Series>> cols;
    for (const auto& n : factors.column_names())
        cols.emplace_back(n == "Mkt-RF" || n == "Mkt_RF" || n == "MKT_RF" ? "MKT" : n, factors.column(n));
    return DataPanel(factors.frequency(), factors.dates(), std::move(cols));
}

std::pair<ReturnFrame, ReturnFrame> excess_returns(const DataPanel& assets, const DataPanel& factors) {
    if (!factors.has_column("RF")) throw DataError("factor data has no RF column");
    std::vector<std::string> fnames;
    for (const auto& n : factors.column_names())
        if (n != "RF") fnames.push_back(n);
    const auto A = to_frame(assets);
    const auto F = to_frame(factors, fnames);
    const auto RF = to_frame(factors, {"RF"});

    std::vector<std::size_t> ra, rf;
    const auto& da = assets.dates();
    const auto& df = factors.dates();
    for (std::size_t i = 0, j = 0; i < da.size() && j < df.size();) {
        if (da[i] < df[j]) {
            ++i;
        } else if (df[j] < da[i]) {
            ++j;
        } else {
            ra.push_back(i++);
            rf.push_back(j++);
        }
    }
    if (ra.empty()) throw DataError("asset and factor files share no dates");
    ReturnFrame ex, fac;
    ex.names = A.names;
    fac.names = F.names;
    ex.values.resize(static_cast<long>(ra.size()), A.values.cols());
    fac.values.resize(static_cast<long>(ra.size()), F.values.cols());
    for (std::size_t r = 0; r < ra.size(); ++r) {
        ex.dates.push_back(da[ra[r]]);
        fac.dates.push_back(df[rf[r]]);
        const double rfree = RF.values(static_cast<long>(rf[r]), 0);
        ex.values.row(static_cast<long>(r)) = A.values.row(static_cast<long>(ra[r])).array() - rfree;
        fac.values.row(static_cast<long>(r)) = F.values.row(static_cast<long>(rf[r]));
    }
    return {std::move(ex), std::move(fac)};
}

// === passes ===

FirstPassLoadings first_pass(const ReturnFrame& assets, const ReturnFrame& factors, PassMode mode, Frequency frequency,
                             const std::vector<std::int64_t>& months, double winsor) {
    if (assets.rows() != factors.rows()) throw DomainError("asset and factor frames are not aligned");
    const long N = static_cast<long>(assets.cols()), K = static_cast<long>(factors.cols());
    const std::size_t W = window_length(mode, frequency);
    if (W != 0 && W <= static_cast<std::size_t>(K + 1)) throw DomainError("rolling window shorter than factor count");

    auto estimate = [&](std::size_t begin, std::size_t end, MatrixXd& B, VectorXd& a) {
        B = MatrixXd::Constant(N, K, kNaN);
        a = VectorXd::Constant(N, kNaN);
        std::vector<long> rows;
        for (std::size_t r = begin; r < end; ++r)
            if (factors.values.row(static_cast<long>(r)).allFinite()) rows.push_back(static_cast<long>(r));
        const std::size_t need = std::max<std::size_t>(static_cast<std::size_t>(K) + 2, W / 2);
        if (rows.size() < need) return;
        MatrixXd X(static_cast<long>(rows.size()), K + 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            X(static_cast<long>(i), 0) = 1.0;
            X.row(static_cast<long>(i)).tail(K) = factors.values.row(rows[i]);
        }
        Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        const bool full_rank = qr.rank() == X.cols();
        for (long n = 0; n < N; ++n) {
            VectorXd y(static_cast<long>(rows.size()));
            std::vector<long> keep;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                y(static_cast<long>(i)) = assets.values(rows[i], n);
                if (std::isfinite(y(static_cast<long>(i)))) keep.push_back(static_cast<long>(i));
            }
            if (keep.size() < need) continue;
            VectorXd coef;
            if (keep.size() == rows.size() && full_rank) {
                winsorize_finite(y, winsor);
                coef = qr.solve(y);
            } else {
                MatrixXd Xs(static_cast<long>(keep.size()), K + 1);
                VectorXd ys(static_cast<long>(keep.size()));
                for (std::size_t i = 0; i < keep.size(); ++i) {
                    Xs.row(static_cast<long>(i)) = X.row(keep[i]);
                    ys(static_cast<long>(i)) = y(keep[i]);
                }
                winsorize_finite(ys, winsor);
                const Fit f = least_squares(Xs, ys);
                if (!f.ok) continue;
                coef = f.coef;
            }
            a(n) = coef(0);
            B.row(n) = coef.tail(K).transpose();
        }
    };

    FirstPassLoadings out;
    out.months = months;
    if (mode == PassMode::full) {
        out.window = "full";
        out.betas.resize(1);
        out.alphas.resize(1);
        estimate(0, assets.rows(), out.betas[0], out.alphas[0]);
        return out;
    }
    out.window = "rolling " + std::to_string(W) + (frequency == Frequency::daily ? " days" : " months");
    out.betas.resize(months.size());
    out.alphas.resize(months.size());
    std::size_t end = 0;
    for (std::size_t i = 0; i < months.size(); ++i) {
        while (end < assets.rows() && assets.month(end) < months[i]) ++end;
        if (end < W) {
            out.betas[i] = MatrixXd::Constant(N, K, kNaN);
            out.alphas[i] = VectorXd::Constant(N, kNaN);
            continue;
        }
        estimate(end - W, end, out.betas[i], out.alphas[i]);
    }
    return out;
}

PremiumSeries second_pass(const ReturnFrame& monthly_excess, const FirstPassLoadings& loadings, double winsor) {
    if (loadings.betas.empty()) throw DomainError("no first-pass loadings");
    const long N = static_cast<long>(monthly_excess.cols());
    const long K = loadings.betas[0].cols();
    if (loadings.betas[0].rows() != N) throw DomainError("loadings do not match the asset count");

    PremiumSeries out;
    std::vector<VectorXd> gammas;
    std::size_t row = 0;
    for (std::size_t i = 0; i < loadings.months.size(); ++i) {
        const std::int64_t m = loadings.months[i];
        while (row < monthly_excess.rows() && monthly_excess.month(row) < m) ++row;
        if (row >= monthly_excess.rows() || monthly_excess.month(row) != m) {
            out.skipped.emplace_back(m, "no returns");
            continue;
        }
        const MatrixXd& B = loadings.beta(i);
        std::vector<long> keep;
        for (long n = 0; n < N; ++n)
            if (std::isfinite(monthly_excess.values(static_cast<long>(row), n)) && B.row(n).allFinite())
                keep.push_back(n);
        if (keep.size() < static_cast<std::size_t>(K + 2)) {
            out.skipped.emplace_back(m, "too few assets");
            continue;
        }
        const long n = static_cast<long>(keep.size());
        MatrixXd X(n, K + 1);
        VectorXd y(n);
        for (long j = 0; j < n; ++j) {
            X(j, 0) = 1.0;
            X.row(j).tail(K) = B.row(keep[static_cast<std::size_t>(j)]);
            y(j) = monthly_excess.values(static_cast<long>(row), keep[static_cast<std::size_t>(j)]);
        }
        for (long k = 0; k < K; ++k) {
            VectorXd c = X.col(k + 1);
            winsorize_finite(c, winsor);
            X.col(k + 1) = c;
        }
        const Fit f = least_squares(X, y);
        if (!f.ok) {
            out.skipped.emplace_back(m, "rank-deficient cross-section");
            continue;
        }
        out.months.push_back(m);
        gammas.push_back(f.coef);
        out.rss.push_back(f.rss);
        out.aic.push_back(regression::aic(n, f.rss, K + 1));
        out.yvar.push_back((y.array() - y.mean()).square().mean());
        out.assets.push_back(keep.size());
    }
    out.gamma.resize(static_cast<long>(gammas.size()), K + 1);
    for (std::size_t t = 0; t < gammas.size(); ++t) out.gamma.row(static_cast<long>(t)) = gammas[t].transpose();
    return out;
}

// === study ===

pathgrid::StudySpec fmb_default_spec() {
    using pathgrid::LayerSpec;
    using pathgrid::Option;
    auto opts = [](std::initializer_list<const char*> ids) {
        std::vector<Option> o;
        for (auto id : ids) o.push_back({id, nullptr});
        return o;
    };
    return pathgrid::StudySpec({
        {"factor", opts({"MKT", "SMB", "HML", "RMW", "CMA"})},
        {"assets", opts({"bm25_ew", "bm25_vw", "bm100_ew", "bm100_vw", "ind12_ew", "ind12_vw", "ind49_ew", "ind49_vw",
                         "stocks"})},
        {"frequency", opts({"monthly", "daily"})},
        {"pre_winsor", opts({"0%", "1%", "2%"})},
        {"regression", opts({"full", "rolling_short", "rolling_long"})},
        {"post_winsor", opts({"0%", "1%", "2%"})},
    });
}

FmbStudy::FmbStudy(pathgrid::StudySpec spec, FmbData data) : spec_(std::move(spec)), data_(std::move(data)) {
    data_.factors_monthly = normalize_factor_names(data_.factors_monthly);
    if (data_.factors_daily) data_.factors_daily = normalize_factor_names(*data_.factors_daily);

    std::vector<std::string> factors;
    if (auto l = spec_.find_layer("factor"))
        for (const auto& o : spec_.layers()[*l].options) factors.push_back(pathgrid::option_string(o, "column"));
    else
        factors = kFactors;
    factors.push_back("RF");
    datapanel::require_columns(data_.factors_monthly, factors, "monthly factor file");
    auto keep_factors = [&](const DataPanel& p) {
        std::vector<std::pair<std::string, datapanel::Series>> cols;
        for (const auto& f : factors) cols.emplace_back(f, p.column(f));
        return DataPanel(p.frequency(), p.dates(), std::move(cols));
    };
    data_.factors_monthly = keep_factors(data_.factors_monthly);

    bool daily = false;
    if (auto l = spec_.find_layer("frequency"))
        for (const auto& o : spec_.layers()[*l].options)
            if (datapanel::parse_frequency(pathgrid::option_string(o, "frequency")) == Frequency::daily) daily = true;
    if (daily) {
        if (!data_.factors_daily) throw DataError("daily paths need a daily factor file");
        datapanel::require_columns(*data_.factors_daily, factors, "daily factor file");
        data_.factors_daily = keep_factors(*data_.factors_daily);
    }
    std::vector<std::string> sets;
    if (auto l = spec_.find_layer("assets"))
        for (const auto& o : spec_.layers()[*l].options) sets.push_back(pathgrid::option_string(o, "set"));
    else if (data_.assets.size() == 1)
        sets.push_back(data_.assets.begin()->first);
    else
        throw ValidationError("study without an assets layer needs exactly one asset set");
    for (const auto& s : sets) {
        auto it = data_.assets.find(s);
        if (it == data_.assets.end()) throw DataError("no data for asset set '" + s + "'");
        if (daily && !it->second.daily) throw DataError("asset set '" + s + "' has no daily returns");
    }
}

FmbStudy::PathConfig FmbStudy::resolve(const pathgrid::PathAssignment& path) const {
    PathConfig c;
    if (data_.assets.size() == 1) c.assets = data_.assets.begin()->first;
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
        const auto& name = spec_.layers()[l].name;
        const auto& opt = spec_.option(l, path.choices.at(l));
        if (name == "factor") {
            c.factor = pathgrid::option_string(opt, "column");
        } else if (name == "assets") {
            c.assets = pathgrid::option_string(opt, "set");
        } else if (name == "frequency") {
            c.frequency = datapanel::parse_frequency(pathgrid::option_string(opt, "frequency"));
            if (c.frequency != Frequency::monthly && c.frequency != Frequency::daily)
                throw ValidationError("first-pass frequency must be monthly or daily");
        } else if (name == "pre_winsor") {
            c.pre_winsor = pathgrid::option_number(opt, "fraction").value_or(0.0);
        } else if (name == "regression") {
            c.mode = parse_pass_mode(pathgrid::option_string(opt, "mode"));
        } else if (name == "post_winsor") {
            c.post_winsor = pathgrid::option_number(opt, "fraction").value_or(0.0);
        } else {
            throw ValidationError("Fama-MacBeth study has no layer '" + name + "'");
        }
    }
    return c;
}

std::shared_ptr<const PremiumSeries> FmbStudy::premiums(const PathConfig& c) const {
    const std::string key = c.assets + "|" + datapanel::to_string(c.frequency) + "|" + winsor_key(c.pre_winsor) + "|" +
                            std::to_string(static_cast<int>(c.mode)) + "|" + winsor_key(c.post_winsor);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const AssetSet& set = data_.assets.at(c.assets);
    const auto [monthly, mfactors] = excess_returns(set.monthly, data_.factors_monthly);
    std::vector<std::int64_t> months;
    for (std::size_t r = 0; r < monthly.rows(); ++r) months.push_back(monthly.month(r));
    FirstPassLoadings loadings;
    if (c.frequency == Frequency::daily) {
        const auto [daily, dfactors] = excess_returns(*set.daily, *data_.factors_daily);
        loadings = first_pass(daily, dfactors, c.mode, Frequency::daily, months, c.pre_winsor);
    } else {
        loadings = first_pass(monthly, mfactors, c.mode, Frequency::monthly, months, c.pre_winsor);
    }
    auto p = std::make_shared<const PremiumSeries>(second_pass(monthly, loadings, c.post_winsor));
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(p)).first->second;
}

namespace {

long factor_column(const pathgrid::StudySpec& spec, const std::string& factor) {
    if (auto l = spec.find_layer("factor")) {
        const auto& opts = spec.layers()[*l].options;
        for (std::size_t j = 0; j < opts.size(); ++j)
            if (pathgrid::option_string(opts[j], "column") == factor) return static_cast<long>(j) + 1;
    }
    for (std::size_t j = 0; j < kFactors.size(); ++j)
        if (kFactors[j] == factor) return static_cast<long>(j) + 1;
    throw ValidationError("unknown factor '" + factor + "'");
}

}  // namespace

PathOutcome FmbStudy::run_path(const pathgrid::PathAssignment& path) const {
    const auto c = resolve(path);
    const auto p = premiums(c);
    PathOutcome o;
    o.path_index = path.index;
    const long T = p->gamma.rows();
    if (T < 2) {
        o.status = PathStatus::discarded;
        o.note = "fewer than 2 second-pass dates";
        return o;
    }
    const VectorXd g = p->gamma.col(factor_column(spec_, c.factor));
    const std::vector<double> gv(g.data(), g.data() + g.size());
    o.b = stats::mean(gv);
    o.se_iid = stats::sd_sample(gv) / std::sqrt(static_cast<double>(T));
    o.se = o.se_iid;
    o.t = o.b / o.se;
    o.n = T;
    o.aic = stats::mean(p->aic);
    o.rss = stats::mean(p->rss);
    o.yvar = stats::mean(p->yvar);
    o.k = static_cast<int>(p->gamma.cols() - 1);
    if (!p->skipped.empty()) o.note = std::to_string(p->skipped.size()) + " dates skipped";
    return o;
}

PathSeries FmbStudy::path_series(const pathgrid::PathAssignment& path) const {
    const auto c = resolve(path);
    const auto p = premiums(c);
    PathSeries s;
    s.dates = p->months;
    const VectorXd g = p->gamma.col(factor_column(spec_, c.factor));
    const VectorXd g0 = p->gamma.col(0);
    s.values["premium"].assign(g.data(), g.data() + g.size());
    s.values["intercept"].assign(g0.data(), g0.data() + g0.size());
    s.values["aic"] = p->aic;
    return s;
}

}  // namespace forkpath::fmb
