#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "forkpath/error.hpp"
#include "forkpath/fmb.hpp"
#include "forkpath/synthetic.hpp"

using namespace forkpath;
using namespace forkpath::fmb;
using datapanel::Frequency;

namespace {

ReturnFrame frame(std::vector<std::int64_t> dates, std::vector<std::string> names, Eigen::MatrixXd v) {
    return ReturnFrame{std::move(dates), std::move(names), std::move(v)};
}

std::vector<std::int64_t> month_dates(std::size_t T) {
    std::vector<std::int64_t> d;
    for (std::size_t t = 0; t < T; ++t) d.push_back(static_cast<std::int64_t>((1990 + t / 12) * 10000 + (t % 12 + 1) * 100));
    return d;
}

std::vector<std::int64_t> months_of(const ReturnFrame& f) {
    std::vector<std::int64_t> m;
    for (std::size_t r = 0; r < f.rows(); ++r) m.push_back(f.month(r));
    return m;
}

}  // namespace

TEST(Fmb, ExactSingleFactorLoading) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::MatrixXd F(40, 1), A(40, 1);
    for (int t = 0; t < 40; ++t) A(t, 0) = F(t, 0) = g(rng);
    auto d = month_dates(40);
    auto lf = first_pass(frame(d, {"A"}, A), frame(d, {"F"}, F), PassMode::full, Frequency::monthly, {});
    EXPECT_NEAR(lf.beta(0)(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(lf.alpha(0)(0), 0.0, 1e-12);
}

TEST(Fmb, PlantedLoadingsRecovered) {
    synthetic::FactorOptions opt;
    opt.months = 240;
    opt.assets = 10;
    auto e = synthetic::factor_economy(opt);
    auto [ex, fac] = excess_returns(e.assets_monthly, e.factors_monthly);
    auto lf = first_pass(ex, fac, PassMode::full, Frequency::monthly, months_of(ex));
    // se of a loading ~ idio_sd / (factor_sd sqrt(T)); factors are close to orthogonal
    const double se = opt.idio_sd / (opt.factor_sd * std::sqrt(240.0));
    for (long n = 0; n < 10; ++n)
        for (long k = 0; k < 5; ++k) EXPECT_NEAR(lf.beta(0)(n, k), e.loadings(n, k), 4.5 * se);
    auto [dex, dfac] = excess_returns(e.assets_daily, e.factors_daily);
    auto ld = first_pass(dex, dfac, PassMode::full, Frequency::daily, months_of(ex));
    for (long n = 0; n < 10; ++n)
        for (long k = 0; k < 5; ++k) EXPECT_NEAR(ld.beta(0)(n, k), e.loadings(n, k), 4.5 * se);
}

TEST(Fmb, RollingHasNoLookAhead) {
    synthetic::FactorOptions opt;
    opt.months = 90;
    opt.assets = 8;
    auto e = synthetic::factor_economy(opt);
    for (auto freq : {Frequency::monthly, Frequency::daily}) {
        const auto& ap = freq == Frequency::daily ? e.assets_daily : e.assets_monthly;
        const auto& fp = freq == Frequency::daily ? e.factors_daily : e.factors_monthly;
        auto [ex, fac] = excess_returns(ap, fp);
        auto [mex, mfac] = excess_returns(e.assets_monthly, e.factors_monthly);
        const auto months = months_of(mex);
        for (auto mode : {PassMode::rolling_short, PassMode::rolling_long}) {
            auto base = first_pass(ex, fac, mode, freq, months, 0.01);
            const std::size_t cut = 70;
            auto ex2 = ex;
            auto fac2 = fac;
            for (std::size_t r = 0; r < ex.rows(); ++r)
                if (ex.month(r) >= months[cut]) {
                    ex2.values.row(static_cast<long>(r)).array() += 50.0;
                    fac2.values.row(static_cast<long>(r)).array() *= -3.0;
                }
            auto pert = first_pass(ex2, fac2, mode, freq, months, 0.01);
            for (std::size_t i = 0; i <= cut; ++i) {
                const auto& a = base.beta(i);
                const auto& b = pert.beta(i);
                for (long n = 0; n < a.rows(); ++n)
                    for (long k = 0; k < a.cols(); ++k)
                        if (std::isnan(a(n, k)))
                            EXPECT_TRUE(std::isnan(b(n, k)));
                        else
                            EXPECT_EQ(a(n, k), b(n, k));
            }
            EXPECT_FALSE(base.beta(cut + 1).isApprox(pert.beta(cut + 1)));
            // first window needs W prior periods
            EXPECT_TRUE(std::isnan(base.beta(0)(0, 0)));
        }
    }
}

TEST(Fmb, SecondPassRecovery) {
    const long N = 30, T = 200;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    FirstPassLoadings L;
    L.betas.push_back(Eigen::MatrixXd(N, 1));
    L.alphas.push_back(Eigen::VectorXd::Zero(N));
    for (long n = 0; n < N; ++n) L.betas[0](n, 0) = 0.5 + g(rng);
    auto dates = month_dates(T);
    for (auto d : dates) L.months.push_back(d / 100);
    Eigen::MatrixXd exact(T, N), noisy(T, N);
    std::vector<double> g1(T);
    for (long t = 0; t < T; ++t) {
        g1[t] = 0.5 + g(rng);
        for (long n = 0; n < N; ++n) {
            exact(t, n) = 0.1 + g1[t] * L.betas[0](n, 0);
            noisy(t, n) = 0.1 + 0.5 * L.betas[0](n, 0) + g(rng);
        }
    }
    auto ps = second_pass(frame(dates, std::vector<std::string>(N, "a"), exact), L);
    ASSERT_EQ(ps.gamma.rows(), T);
    for (long t = 0; t < T; ++t) {
        EXPECT_NEAR(ps.gamma(t, 0), 0.1, 1e-10);
        EXPECT_NEAR(ps.gamma(t, 1), g1[t], 1e-10);
    }
    auto pn = second_pass(ReturnFrame{dates, std::vector<std::string>(N, "a"), noisy}, L);
    const Eigen::VectorXd gam = pn.gamma.col(1);
    const double m = gam.mean();
    const double sd = std::sqrt((gam.array() - m).square().sum() / (T - 1));
    EXPECT_LT(std::abs(m - 0.5), 3 * sd / std::sqrt(double(T)));

    FirstPassLoadings flat = L;
    flat.betas[0].setConstant(1.2);
    auto pf = second_pass(ReturnFrame{dates, std::vector<std::string>(N, "a"), noisy}, flat);
    EXPECT_EQ(pf.gamma.rows(), 0);
    ASSERT_EQ(pf.skipped.size(), static_cast<std::size_t>(T));
    EXPECT_EQ(pf.skipped[0].second, "rank-deficient cross-section");

    // 0% post-pass winsorization is the identity
    auto p0 = second_pass(ReturnFrame{dates, std::vector<std::string>(N, "a"), noisy}, L, 0.0);
    EXPECT_EQ(p0.gamma, pn.gamma);
    auto p2 = second_pass(ReturnFrame{dates, std::vector<std::string>(N, "a"), noisy}, L, 0.1);
    EXPECT_FALSE(p2.gamma.isApprox(pn.gamma));
}

TEST(Fmb, AssetOrderInvariance) {
    synthetic::FactorOptions opt;
    opt.months = 120;
    opt.assets = 12;
    auto e = synthetic::factor_economy(opt);
    auto [ex, fac] = excess_returns(e.assets_monthly, e.factors_monthly);
    auto months = months_of(ex);
    auto base = second_pass(ex, first_pass(ex, fac, PassMode::full, Frequency::monthly, months));
    ReturnFrame rev = ex;
    rev.values = ex.values.rowwise().reverse();
    std::reverse(rev.names.begin(), rev.names.end());
    auto other = second_pass(rev, first_pass(rev, fac, PassMode::full, Frequency::monthly, months));
    ASSERT_EQ(base.gamma.rows(), other.gamma.rows());
    EXPECT_LT((base.gamma - other.gamma).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fmb, GridAndStudy) {
    auto spec = fmb_default_spec();
    EXPECT_EQ(spec.path_count(), 5u * 486u);
    EXPECT_EQ(spec.path_count() / spec.layers()[0].size(), 486u);

    synthetic::FactorOptions opt;
    opt.months = 96;
    opt.assets = 20;
    opt.days_per_month = 15;
    auto e = synthetic::factor_economy(opt);
    FmbData data{e.factors_monthly, e.factors_daily, {}};
    data.assets["p"] = {e.assets_monthly, e.assets_daily};
    auto small = pathgrid::StudySpec::from_json(nlohmann::json::parse(R"({"layers": [
        {"name": "factor", "options": ["MKT", "SMB", "HML", "RMW", "CMA"]},
        {"name": "frequency", "options": ["monthly", "daily"]},
        {"name": "pre_winsor", "options": ["0%", "2%"]},
        {"name": "regression", "options": ["full", "rolling_short", "rolling_long"]},
        {"name": "post_winsor", "options": ["0%", "2%"]}]})"));
    FmbStudy study(small, data);
    auto out = run_study(study, 2);
    EXPECT_EQ(out.size(), 120u);
    EXPECT_EQ(out.usable().size(), 120u);
    for (const auto* o : out.usable()) {
        EXPECT_TRUE(std::isfinite(o->b));
        EXPECT_TRUE(std::isfinite(o->aic));
        EXPECT_EQ(o->k, 5);
    }
    const auto s = study.path_series(small.assignment(0));
    EXPECT_EQ(s.dates.size(), 96u);
    EXPECT_EQ(s.values.at("premium").size(), 96u);
    // rolling long monthly: 60 months lost
    const std::vector<std::size_t> choice{0, 0, 0, 2, 0};
    EXPECT_EQ(study.path_series(small.assignment(small.encode(choice))).dates.size(), 36u);

    FmbData missing{e.factors_monthly, std::nullopt, {}};
    missing.assets["p"] = {e.assets_monthly, std::nullopt};
    EXPECT_THROW(FmbStudy(small, missing), DataError);
    EXPECT_THROW(FmbStudy(spec, data), DataError);
}
