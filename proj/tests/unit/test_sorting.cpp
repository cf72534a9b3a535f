#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "forkpath/error.hpp"
#include "forkpath/sorting.hpp"
#include "forkpath/synthetic.hpp"

using namespace forkpath;
using namespace forkpath::sorting;

namespace {

// months x stocks panel: characteristic "x", returns drawn around `signal * rank`
datapanel::LongPanel fixture(std::size_t S, std::size_t T, double signal, std::uint64_t seed, double noise = 0.05) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    datapanel::LongPanel p;
    p.names = {"ret", "mvel1", "retvol", "x"};
    p.columns.resize(4);
    std::vector<double> prev(S, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> x(S);
        for (auto& v : x) v = g(rng);
        for (std::size_t s = 0; s < S; ++s) {
            p.ids.push_back(static_cast<std::int64_t>(s + 1));
            p.dates.push_back(static_cast<std::int64_t>((2000 + t / 12) * 10000 + (t % 12 + 1) * 100));
            p.columns[0].push_back(t == 0 ? datapanel::Cell() : datapanel::Cell(signal * prev[s] + noise * g(rng)));
            p.columns[1].push_back(std::exp(g(rng)));
            p.columns[2].push_back(0.05 * std::exp(0.3 * g(rng)));
            p.columns[3].push_back(x[s]);
        }
        prev = x;
    }
    return p;
}

// EW oracle: sort a copy, take n = floor(qN) from each end, average next-month returns
std::vector<double> ew_oracle(const StockPanel& p, const std::vector<double>& v, double q, std::size_t h) {
    const std::size_t S = p.stocks(), T = p.months();
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < T; i += h) {
        std::vector<std::pair<double, std::size_t>> xs;
        for (std::size_t s = 0; s < S; ++s)
            if (p.listed(i, s) && std::isfinite(v[i * S + s])) xs.emplace_back(v[i * S + s], s);
        std::sort(xs.begin(), xs.end());
        const auto n = static_cast<std::size_t>(std::floor(q * static_cast<double>(xs.size()) + 1e-9));
        for (std::size_t t = i + 1; t <= std::min(i + h, T - 1); ++t) {
            double lo = 0, hi = 0;
            for (std::size_t k = 0; k < n; ++k) {
                lo += p.ret(t, xs[k].second);
                hi += p.ret(t, xs[xs.size() - 1 - k].second);
            }
            out.push_back((hi - lo) / static_cast<double>(n));
        }
    }
    return out;
}

}  // namespace

TEST(Sorting, TenStockFixture) {
    auto lp = fixture(10, 30, 0.0, 1);
    auto p = StockPanel::from_long(lp);
    SortConfig c{"x"};
    auto legs = form_portfolio(p, c, 5);
    ASSERT_EQ(legs.long_members.size(), 2u);
    ASSERT_EQ(legs.short_members.size(), 2u);
    for (double w : legs.long_weights) EXPECT_DOUBLE_EQ(w, 0.5);
    for (double w : legs.short_weights) EXPECT_DOUBLE_EQ(w, 0.5);
    const auto& x = p.raw("x");
    double min_long = 1e9, max_short = -1e9;
    for (auto s : legs.long_members) min_long = std::min(min_long, x[5 * 10 + s]);
    for (auto s : legs.short_members) max_short = std::max(max_short, x[5 * 10 + s]);
    EXPECT_GT(min_long, max_short);
}

TEST(Sorting, LegWeightsSumToOne) {
    auto p = StockPanel::from_long(fixture(57, 40, 0.0, 2));
    for (auto w : {Weighting::EW, Weighting::VW, Weighting::IVW, Weighting::CW})
        for (double q : {0.1, 0.2, 0.25, 0.3})
            for (std::size_t t = 0; t < p.months(); ++t) {
                SortConfig c{"x", q, 1, w};
                auto legs = form_portfolio(p, c, t);
                const double sl = std::accumulate(legs.long_weights.begin(), legs.long_weights.end(), 0.0);
                const double ss = std::accumulate(legs.short_weights.begin(), legs.short_weights.end(), 0.0);
                EXPECT_NEAR(sl, 1.0, 1e-12);
                EXPECT_NEAR(ss, 1.0, 1e-12);
                for (double v : legs.long_weights) EXPECT_GE(v, 0.0);
                for (double v : legs.short_weights) EXPECT_GE(v, 0.0);
            }
}

TEST(Sorting, ValueWeightDominance) {
    auto lp = fixture(20, 30, 0.0, 3);
    auto p = StockPanel::from_long(lp);
    SortConfig c{"x", 0.25, 1, Weighting::VW};
    auto legs = form_portfolio(p, c, 4);
    const std::size_t big = legs.long_members[0];
    for (std::size_t r = 0; r < lp.rows(); ++r)
        if (lp.dates[r] == p.dates()[4] && lp.ids[r] == p.ids()[big]) lp.columns[1][r] = 1e9;
    auto p2 = StockPanel::from_long(lp);
    auto legs2 = form_portfolio(p2, c, 4);
    double cap = 0;
    for (auto s : legs2.long_members) cap += p2.mvel1(4, s);
    EXPECT_NEAR(legs2.long_weights[0], 1e9 / cap, 1e-15);
    EXPECT_GT(legs2.long_weights[0], 0.999);
}

TEST(Sorting, SignAntiSymmetry) {
    auto p = StockPanel::from_long(fixture(60, 60, 0.01, 4));
    auto neg = p.raw("x");
    for (auto& v : neg) v = -v;
    auto pn = p.with_characteristic("x", neg);
    for (auto w : {Weighting::EW, Weighting::VW, Weighting::IVW, Weighting::CW})
        for (int h : {1, 2, 3}) {
            SortConfig c{"x", 0.2, h, w};
            auto a = longshort_returns(p, c);
            auto b = longshort_returns(pn, c);
            ASSERT_EQ(a.returns.size(), b.returns.size());
            for (std::size_t i = 0; i < a.returns.size(); ++i) EXPECT_EQ(a.returns[i], -b.returns[i]);
        }
}

TEST(Sorting, MonotoneTransformInvariance) {
    auto p = StockPanel::from_long(fixture(45, 50, 0.01, 5));
    auto tr = p.raw("x");
    for (auto& v : tr) v = std::exp(3.0 * v) + 2.0;
    auto pt = p.with_characteristic("x", tr);
    SortConfig c{"x", 0.3, 2};
    EXPECT_EQ(longshort_returns(p, c).returns, longshort_returns(pt, c).returns);
}

TEST(Sorting, AgreesWithOracle) {
    auto p = StockPanel::from_long(fixture(37, 50, 0.01, 6));
    for (int h : {1, 2, 3})
        for (double q : {0.1, 0.25}) {
            SortConfig c{"x", q, h};
            auto got = longshort_returns(p, c).returns;
            auto want = ew_oracle(p, p.raw("x"), q, static_cast<std::size_t>(h));
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
        }
}

TEST(Sorting, PerfectPredictorAndNull) {
    auto p = StockPanel::from_long(fixture(50, 60, 1.0, 7, 0.0));
    for (int h : {1, 3}) {
        auto s = longshort_returns(p, SortConfig{"x", 0.2, h});
        for (std::size_t i = 0; i < s.returns.size(); i += static_cast<std::size_t>(h)) EXPECT_GT(s.returns[i], 0.0);
    }
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto q = StockPanel::from_long(fixture(50, 80, 0.0, 100 + seed));
        auto o = series_outcome(longshort_returns(q, SortConfig{"x"}).returns);
        if (std::abs(o.b) <= 3 * o.se) ++inside;
    }
    EXPECT_GE(inside, 19);
}

TEST(Sorting, ImputationAndErrors) {
    auto lp = fixture(12, 40, 0.0, 8);
    for (std::size_t r = 0; r < lp.rows(); ++r)
        if (lp.ids[r] == 3 && lp.dates[r] > 20000500) lp.columns[3][r] = std::nullopt;
    auto p = StockPanel::from_long(lp);
    const auto imp = p.cleaned("x", Cleaning::impute);
    const auto raw = p.cleaned("x", Cleaning::remove);
    EXPECT_TRUE(std::isnan(raw[10 * 12 + 2]));
    EXPECT_EQ(imp[10 * 12 + 2], raw[4 * 12 + 2]);
    // 11 stocks remain under removal, 12 under imputation
    EXPECT_EQ(form_portfolio(p, SortConfig{"x", 0.1, 1, Weighting::EW, Cleaning::remove}, 10).long_members.size(), 1u);
    auto lp2 = fixture(9, 40, 0.0, 9);
    EXPECT_THROW((void)form_portfolio(StockPanel::from_long(lp2), SortConfig{"x"}, 3), DataError);
    SortConfig shortwin{"x"};
    shortwin.window_begin = 0;
    shortwin.window_end = 20;
    EXPECT_THROW((void)longshort_returns(p, shortwin), DataError);
    EXPECT_THROW((void)form_portfolio(p, SortConfig{"x", 0.5}, 3), DomainError);
}

TEST(Sorting, SharpeStatistic) {
    std::vector<double> v(100);
    const double a = 0.05 * std::sqrt(99.0 / 100.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 + (i % 2 ? a : -a);
    EXPECT_NEAR(sharpe_tstat(v), 2.0, 1e-12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2 ? 0.03 : -0.03;
    EXPECT_NEAR(sharpe_tstat(v), 0.0, 1e-14);
    EXPECT_THROW((void)sharpe_tstat(std::vector<double>(30, 0.01)), DomainError);
    EXPECT_THROW((void)sharpe_tstat(std::vector<double>(23, 0.01)), DomainError);
}

TEST(Sorting, GridCounts) {
    const auto& names = reference_characteristics();
    EXPECT_EQ(names.size(), 82u);
    auto spec = anomalies_spec(names);
    EXPECT_EQ(spec.path_count(), 47232u);
    EXPECT_EQ(anomalies_spec({"x", "y"}).path_count(), 2u * 576u);
    EXPECT_EQ(window_bounds("min-max", 90), (std::pair<std::size_t, std::size_t>{0, 90}));
    EXPECT_EQ(window_bounds("t1-t2", 90), (std::pair<std::size_t, std::size_t>{30, 60}));
    EXPECT_THROW((void)window_bounds("t2-t1", 90), ValidationError);
}

TEST(Sorting, DefaultAndRobustnessPaths) {
    auto lp = synthetic::stock_panel({.stocks = 60, .months = 150, .characteristics = 3, .seed = 4});
    auto panel = std::make_shared<const StockPanel>(StockPanel::from_long(lp));
    AnomaliesStudy study(anomalies_spec({"c1", "c2", "c3"}), panel);
    const auto& spec = study.spec();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto d = spec.assignment(study.default_path(c));
        EXPECT_EQ(spec.choice_ids(d),
                  (std::vector<std::string>{"c" + std::to_string(c + 1), "impute", "1m", "min-max", "0.2", "EW"}));
        const auto cfg = study.resolve(d);
        EXPECT_EQ(cfg.q, 0.2);
        EXPECT_EQ(cfg.window_end, 150u);
        const auto rob = study.robustness_paths(c);
        EXPECT_EQ(rob.size(), 14u);
        for (auto r : rob) EXPECT_EQ(pathgrid::path_distance(d, spec.assignment(r)), 1u);
    }
    auto outcomes = run_study(study, 1);
    EXPECT_EQ(outcomes.size(), 3u * 576u);
    EXPECT_EQ(outcomes.usable().size(), outcomes.size());
    for (const auto& s : summarize(study, outcomes)) {
        EXPECT_EQ(s.usable, 576u);
        EXPECT_LE(s.full_lo, s.robust_lo);
        EXPECT_GE(s.full_hi, s.robust_hi);
        EXPECT_LE(s.full_lo, s.median_t);
        EXPECT_GE(s.full_hi, s.median_t);
        EXPECT_TRUE(std::isfinite(s.default_t));
    }
    const auto* d = outcomes.find(study.default_path(1));
    ASSERT_NE(d, nullptr);
    EXPECT_DOUBLE_EQ(d->t, sharpe_tstat(longshort_returns(*panel, SortConfig{"c2"}).returns));
}
