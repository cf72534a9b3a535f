#include "forkpath/regression.hpp"

#include <algorithm>
#include <cmath>

#include "forkpath/error.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::regression {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double aic(long n, double rss, long columns) {
    return static_cast<double>(n) * std::log(rss / static_cast<double>(n)) + 2.0 * static_cast<double>(columns + 1);
}

RegressionResult ols(const MatrixXd& X, const VectorXd& y) {
    const long n = X.rows();
    const long K = X.cols();
    if (y.size() != n) throw DomainError("design and response lengths differ");
    if (n <= K) throw DomainError("OLS needs more observations than regressors (n=" + std::to_string(n) + ")");
    Eigen::JacobiSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(K - 1) / sv(0) < 1e-10) throw SingularDesignError("design matrix is rank deficient");

    RegressionResult r;
    r.n = n;
    r.k = static_cast<int>(K - 1);
    r.coefficients = svd.solve(y);
    r.residuals = y - X * r.coefficients;
    r.rss = r.residuals.squaredNorm();
    const double ybar = y.mean();
    r.yvar = (y.array() - ybar).square().sum() / static_cast<double>(n);
    r.aic = aic(n, r.rss, K);
    const VectorXd inv_sq = sv.array().square().inverse();
    r.xtx_inv = svd.matrixV() * inv_sq.asDiagonal() * svd.matrixV().transpose();
    const double s2 = r.rss / static_cast<double>(n - K);
    r.se_iid = (s2 * r.xtx_inv.diagonal().array()).sqrt();
    r.t_iid = r.coefficients.array() / r.se_iid.array();
    for (long i = 0; i < K; ++i)
        if (!(r.se_iid(i) > 0.0)) r.t_iid(i) = r.coefficients(i) == 0.0 ? 0.0 : std::copysign(HUGE_VAL, r.coefficients(i));
    return r;
}

VectorXd newey_west_se(const MatrixXd& X, const VectorXd& residuals, int lag, const MatrixXd* xtx_inv) {
    const long n = X.rows();
    if (lag < 0) throw DomainError("HAC lag must be >= 0");
    if (lag >= n) throw DomainError("HAC lag must be smaller than the sample size");
    if (residuals.size() != n) throw DomainError("residual length does not match design");
    const MatrixXd U = X.array().colwise() * residuals.array();
    MatrixXd S = U.transpose() * U;
    for (int l = 1; l <= lag; ++l) {
        const double w = 1.0 - static_cast<double>(l) / (lag + 1.0);
        const MatrixXd G = U.bottomRows(n - l).transpose() * U.topRows(n - l);
        S += w * (G + G.transpose());
    }
    MatrixXd B;
    if (xtx_inv) {
        B = *xtx_inv;
    } else {
        B = (X.transpose() * X).inverse();
    }
    const MatrixXd V = B * S * B;
    return V.diagonal().array().max(0.0).sqrt();
}

int default_hac_lag(long n) {
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

void attach_hac(RegressionResult& r, const MatrixXd& X, int lag) {
    r.hac_lag = lag < 0 ? default_hac_lag(r.n) : lag;
    r.hac_lag = std::min<int>(r.hac_lag, static_cast<int>(r.n) - 1);
    r.se_hac = newey_west_se(X, r.residuals, r.hac_lag, &r.xtx_inv);
    r.t_hac = r.coefficients.array() / r.se_hac.array();
}

double amihud_corrected(double delta, long n) {
    if (n <= 0) throw DomainError("sample size must be positive");
    const double nn = static_cast<double>(n);
    return delta + (1.0 + 3.0 * delta) / nn + 3.0 * (1.0 + 3.0 * delta) / (nn * nn);
}

namespace {

void check_inputs(std::span<const double> x, std::span<const double> y, int horizon) {
    if (x.size() != y.size()) throw DomainError("predictor and return series differ in length");
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    if (x.size() <= static_cast<std::size_t>(horizon) + 2) throw DomainError("too few observations for the horizon");
}

VectorXd forward_sums(std::span<const double> y, int h, long rows) {
    VectorXd Y(rows);
    for (long t = 0; t < rows; ++t) {
        double s = 0.0;
        for (int k = 1; k <= h; ++k) s += y[static_cast<std::size_t>(t + k)];
        Y(t) = s;
    }
    return Y;
}

MatrixXd predictive_design(std::span<const double> x, int horizon, bool augmented, bool correction) {
    const long N = static_cast<long>(x.size());
    const long rows = N - horizon;
    double delta = 0.0;
    if (augmented) {
        if (stats::variance_pop(x) <= 0.0) throw DomainError("predictor has zero variance");
        MatrixXd A(N - 1, 2);
        VectorXd a(N - 1);
        for (long t = 1; t < N; ++t) {
            A(t - 1, 0) = 1.0;
            A(t - 1, 1) = x[static_cast<std::size_t>(t - 1)];
            a(t - 1) = x[static_cast<std::size_t>(t)];
        }
        delta = ols(A, a).coefficients(1);
        if (correction) delta = amihud_corrected(delta, N - 1);
    }
    MatrixXd X(rows, augmented ? 3 : 2);
    for (long t = 0; t < rows; ++t) {
        const auto i = static_cast<std::size_t>(t);
        X(t, 0) = 1.0;
        X(t, 1) = x[i];
        if (augmented) X(t, 2) = x[i + 1] - delta * x[i];
    }
    return X;
}

}  // namespace

RegressionResult predictive(std::span<const double> x, std::span<const double> y, int horizon) {
    check_inputs(x, y, horizon);
    const MatrixXd X = predictive_design(x, horizon, false, false);
    return ols(X, forward_sums(y, horizon, X.rows()));
}

RegressionResult augmented_predictive(std::span<const double> x, std::span<const double> y, int horizon,
                                      bool use_amihud_correction) {
    check_inputs(x, y, horizon);
    const MatrixXd X = predictive_design(x, horizon, true, use_amihud_correction);
    return ols(X, forward_sums(y, horizon, X.rows()));
}

// === equity-premium study ===

using datapanel::Cell;
using datapanel::DataPanel;
using datapanel::Frequency;
using datapanel::Series;

DataPanel prepare_macro_panel(const DataPanel& raw) {
    DataPanel p = raw;
    auto binary = [&](const char* a, const char* b, auto op) {
        const auto& sa = p.column(a);
        const auto& sb = p.column(b);
        Series out(sa.size());
        for (std::size_t i = 0; i < sa.size(); ++i)
            if (sa[i] && sb[i]) out[i] = op(*sa[i], *sb[i]);
        return out;
    };
    if (!p.has_column("premium")) {
        if (!p.has_column("CRSP_SPvw") || !p.has_column("Rfree"))
            throw DataError("macro data needs a 'premium' column or both 'CRSP_SPvw' and 'Rfree'");
        p = p.with_column("premium", binary("CRSP_SPvw", "Rfree", [](double a, double b) { return a - b; }));
    }
    if (!p.has_column("payout") && p.has_column("D12") && p.has_column("E12"))
        p = p.with_column("payout", binary("D12", "E12", [](double d, double e) {
                              return d > 0 && e > 0 ? std::log(d) - std::log(e) : std::nan("");
                          }));
    if (!p.has_column("dfy") && p.has_column("BAA") && p.has_column("AAA"))
        p = p.with_column("dfy", binary("BAA", "AAA", [](double a, double b) { return a - b; }));
    if (!p.has_column("dfr") && p.has_column("corpr") && p.has_column("ltr"))
        p = p.with_column("dfr", binary("corpr", "ltr", [](double a, double b) { return a - b; }));
    for (const auto& name : p.column_names()) {
        const auto& s = p.column(name);
        if (std::any_of(s.begin(), s.end(), [](const Cell& c) { return c && !std::isfinite(*c); })) {
            Series t = s;
            for (auto& c : t)
                if (c && !std::isfinite(*c)) c.reset();
            p = p.with_column(name, std::move(t));
        }
    }
    return p;
}

DataPanel aggregate_panel(const DataPanel& monthly, Frequency target) {
    if (target == Frequency::monthly) return monthly;
    if (target == Frequency::daily) throw DomainError("cannot aggregate to daily frequency");
    const int step = datapanel::months_per_period(target);
    const auto& dates = monthly.dates();
    std::vector<std::size_t> start;
    std::vector<std::int64_t> out_dates;
    auto period_of = [&](std::int64_t d) {
        const long y = d / 10000;
        const long m = (d / 100) % 100;
        return y * 12 + (m - 1) / step;
    };
    for (std::size_t i = 0; i < dates.size(); ++i)
        if (i == 0 || period_of(dates[i]) != period_of(dates[i - 1])) start.push_back(i);
    start.push_back(dates.size());
    std::vector<std::pair<std::string, Series>> cols;
    for (const auto& name : monthly.column_names()) {
        const auto& s = monthly.column(name);
        const bool summed = name == "premium" || name == "svar";
        Series out;
        for (std::size_t g = 0; g + 1 < start.size(); ++g) {
            const auto a = start[g], b = start[g + 1];
            if (summed) {
                double sum = 0.0;
                bool all = (b - a) == static_cast<std::size_t>(step);
                for (auto i = a; i < b && all; ++i) {
                    if (!s[i]) all = false;
                    else sum += *s[i];
                }
                out.push_back(all ? Cell(sum) : Cell());
            } else {
                out.push_back(s[b - 1]);
            }
        }
        cols.emplace_back(name, std::move(out));
    }
    for (std::size_t g = 0; g + 1 < start.size(); ++g) out_dates.push_back(dates[start[g + 1] - 1]);
    return DataPanel(target, std::move(out_dates), std::move(cols));
}

pathgrid::StudySpec premium_default_spec() {
    using pathgrid::LayerSpec;
    using pathgrid::Option;
    auto opts = [](std::initializer_list<const char*> ids) {
        std::vector<Option> o;
        for (auto id : ids) o.push_back({id, nullptr});
        return o;
    };
    std::vector<LayerSpec> layers{
        {"frequency", opts({"monthly", "quarterly", "annual"})},
        {"missing", opts({"impute", "remove"})},
        {"winsorization", opts({"0%", "1%", "2%", "3%"})},
        {"transform", opts({"level", "difference"})},
        {"predictor", opts({"payout", "b/m", "svar", "dfr", "dfy", "ntis"})},
        {"horizon", opts({"h1", "h3", "h12"})},
        {"start", opts({"first", "middle"})},
        {"end", opts({"middle", "last"})},
        {"estimator", opts({"ols_iid", "ols_hac", "aug_iid", "aug_hac"})},
        {"post_treatment", opts({"none", "adjusted"})},
    };
    std::vector<pathgrid::Constraint> cons{{{{"start", "middle"}, {"end", "middle"}}, "empty subsample"}};
    return pathgrid::StudySpec(std::move(layers), std::move(cons));
}

PremiumStudy::PremiumStudy(pathgrid::StudySpec spec, std::map<Frequency, DataPanel> panels, PremiumSettings settings)
    : spec_(std::move(spec)), settings_(std::move(settings)) {
    auto it = panels.find(Frequency::monthly);
    if (it == panels.end()) throw DataError("premium study needs a monthly macro panel");
    for (auto& [f, p] : panels) panels_[f] = prepare_macro_panel(p);
    for (Frequency f : {Frequency::quarterly, Frequency::annual})
        if (!panels_.count(f)) panels_[f] = aggregate_panel(panels_.at(Frequency::monthly), f);

    if (auto j = spec_.find_layer("predictor")) {
        for (const auto& o : spec_.layers()[*j].options) predictors_.push_back(pathgrid::option_string(o, "column"));
    } else {
        predictors_.push_back("b/m");
    }
    for (const auto& [f, p] : panels_) {
        for (const auto& c : predictors_)
            if (!p.has_column(c))
                throw DataError(datapanel::to_string(f) + " macro data is missing predictor column '" + c + "'");
    }
}

PremiumStudy::PathConfig PremiumStudy::resolve(const pathgrid::PathAssignment& path) const {
    PathConfig c;
    auto opt = [&](const char* layer) -> const pathgrid::Option* {
        auto j = spec_.find_layer(layer);
        if (!j) return nullptr;
        return &spec_.option(*j, path.choices.at(*j));
    };
    auto bad = [](const char* layer, const std::string& id) {
        return ValidationError("layer '" + std::string(layer) + "': unsupported option '" + id + "'");
    };
    if (auto o = opt("frequency")) c.frequency = datapanel::parse_frequency(pathgrid::option_string(*o, "frequency"));
    if (c.frequency == Frequency::daily) throw bad("frequency", "daily");
    if (auto o = opt("missing")) {
        const auto v = pathgrid::option_string(*o, "mode");
        if (v != "impute" && v != "remove") throw bad("missing", v);
        c.impute = v == "impute";
    }
    if (auto o = opt("winsorization")) c.winsor = pathgrid::option_number(*o, "fraction").value_or(0.0);
    if (auto o = opt("transform")) {
        const auto v = pathgrid::option_string(*o, "mode");
        if (v != "level" && v != "difference") throw bad("transform", v);
        c.difference = v == "difference";
    }
    if (auto o = opt("predictor")) c.predictor = pathgrid::option_string(*o, "column");
    if (auto o = opt("horizon")) c.horizon = static_cast<int>(pathgrid::option_number(*o, "periods").value_or(1.0));
    if (auto o = opt("start")) {
        const auto v = pathgrid::option_string(*o, "at");
        if (v != "first" && v != "middle") throw bad("start", v);
        c.start_middle = v == "middle";
    }
    if (auto o = opt("end")) {
        const auto v = pathgrid::option_string(*o, "at");
        if (v != "middle" && v != "last") throw bad("end", v);
        c.end_middle = v == "middle";
    }
    if (auto o = opt("estimator")) {
        const auto v = pathgrid::option_string(*o, "kind");
        if (v == "ols_iid") {
        } else if (v == "ols_hac") {
            c.hac = true;
        } else if (v == "aug_iid") {
            c.augmented = true;
        } else if (v == "aug_hac") {
            c.augmented = c.hac = true;
        } else {
            throw bad("estimator", v);
        }
    }
    if (auto o = opt("post_treatment")) c.adjusted = pathgrid::option_string(*o, "mode") != "none";
    return c;
}

PathOutcome PremiumStudy::run_path(const pathgrid::PathAssignment& path) const {
    const auto c = resolve(path);
    const auto& panel = panels_.at(c.frequency);
    const auto& ycol = panel.column("premium");
    const auto& xcol = panel.column(c.predictor);

    std::vector<double> x, y;
    if (c.impute) {
        std::size_t first = 0;
        while (first < xcol.size() && !xcol[first]) ++first;
        Cell last;
        for (std::size_t i = first; i < xcol.size(); ++i) {
            if (xcol[i]) last = xcol[i];
            if (ycol[i]) {
                x.push_back(*last);
                y.push_back(*ycol[i]);
            }
        }
    } else {
        for (std::size_t i = 0; i < xcol.size(); ++i) {
            bool all = ycol[i].has_value();
            for (const auto& p : predictors_) all = all && panel.column(p)[i].has_value();
            if (all) {
                x.push_back(*xcol[i]);
                y.push_back(*ycol[i]);
            }
        }
    }

    PathOutcome out;
    out.path_index = path.index;
    auto discard = [&](const std::string& why) {
        out.status = PathStatus::discarded;
        out.note = why;
        out.n = 0;
        return out;
    };
    if (x.size() < 8) return discard("too few observations");

    if (c.winsor > 0.0) {
        const auto k = datapanel::winsor_count(c.winsor, x.size());
        x = datapanel::winsorize(x, k);
        y = datapanel::winsorize(y, k);
    }
    if (c.difference) {
        x = datapanel::difference(x);
        y.erase(y.begin());
    }
    const std::size_t N = x.size();
    const std::size_t mid = N / 2;
    const std::size_t s = c.start_middle ? mid : 0;
    const std::size_t e = c.end_middle ? mid : N;
    if (e <= s + static_cast<std::size_t>(c.horizon) + 4) return discard("subsample too short");
    std::vector<double> xw(x.begin() + static_cast<long>(s), x.begin() + static_cast<long>(e));
    std::vector<double> yw(y.begin() + static_cast<long>(s), y.begin() + static_cast<long>(e));
    if (stats::variance_pop(xw) <= 0.0) return discard("predictor has zero variance in the subsample");
    xw = datapanel::standardize(xw);
    yw = datapanel::scale_dependent(yw, c.horizon, datapanel::months_per_period(c.frequency));

    const Eigen::MatrixXd X = predictive_design(xw, c.horizon, c.augmented, settings_.amihud_correction);
    RegressionResult r = ols(X, forward_sums(yw, c.horizon, X.rows()));
    attach_hac(r, X, settings_.hac_lag);

    out.b = r.coefficients(1);
    out.se_iid = r.se_iid(1);
    out.se_hac = r.se_hac(1);
    out.se = c.hac ? out.se_hac : out.se_iid;
    out.t = out.b / out.se;
    out.aic = r.aic;
    out.n = r.n;
    out.rss = r.rss;
    out.yvar = r.yvar;
    out.k = r.k;
    if (r.n < settings_.min_observations) {
        out.status = PathStatus::discarded;
        out.note = "fewer than " + std::to_string(settings_.min_observations) + " observations";
    }
    if (c.adjusted && settings_.post_treatment) settings_.post_treatment(out);
    return out;
}

OutcomeSet run_premium_study(const pathgrid::StudySpec& spec, const DataPanel& monthly, PremiumSettings settings,
                             unsigned jobs) {
    PremiumStudy study(spec, {{Frequency::monthly, monthly}}, std::move(settings));
    return run_study(study, jobs);
}

}  // namespace forkpath::regression
