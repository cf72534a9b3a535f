#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "forkpath/error.hpp"
#include "forkpath/pathmetrics.hpp"
#include "forkpath/stats.hpp"

using namespace forkpath;
using namespace forkpath::pathmetrics;

namespace {

OutcomeSet grid_outcomes(const std::vector<std::size_t>& radices, const std::vector<double>& t) {
    auto spec = pathgrid::make_grid(radices);
    std::vector<PathOutcome> outs;
    for (std::uint64_t i = 0; i < spec.path_count(); ++i) {
        PathOutcome o;
        o.path_index = i;
        o.t = o.b = t[i];
        o.n = 100;
        outs.push_back(o);
    }
    return OutcomeSet(std::move(spec), std::move(outs));
}

OutcomeSet random_outcomes(const std::vector<std::size_t>& radices, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uint64_t P = 1;
    for (auto r : radices) P *= r;
    std::vector<double> t(P);
    for (auto& v : t) v = g(rng);
    return grid_outcomes(radices, t);
}

// ranges by brute force: for every K-subset and configuration, scan all paths
std::multiset<double> oracle_ranges(const OutcomeSet& set, std::size_t K) {
    const auto& spec = set.spec();
    const std::size_t J = spec.layer_count();
    std::multiset<double> out;
    for (std::uint32_t mask = 0; mask < (1u << J); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != K) continue;
        std::map<std::vector<std::size_t>, std::pair<double, double>> cells;
        for (const auto& o : set.outcomes()) {
            const auto c = spec.decode(o.path_index);
            std::vector<std::size_t> key;
            for (std::size_t j = 0; j < J; ++j)
                if (mask & (1u << j)) key.push_back(c[j]);
            auto [it, fresh] = cells.try_emplace(key, o.t, o.t);
            if (!fresh) {
                it->second.first = std::min(it->second.first, o.t);
                it->second.second = std::max(it->second.second, o.t);
            }
        }
        for (const auto& [k, mm] : cells) out.insert(mm.second - mm.first);
    }
    return out;
}

}  // namespace

TEST(HackingIntervals, ConstantOutcomesHaveZeroRanges) {
    const auto set = grid_outcomes({2, 3, 2}, std::vector<double>(12, 1.5));
    for (std::size_t K = 1; K < 3; ++K) {
        const auto s = hacking_intervals(set, K);
        EXPECT_DOUBLE_EQ(s.ari, 0.0);
        for (double r : s.ranges) EXPECT_DOUBLE_EQ(r, 0.0);
    }
}

TEST(HackingIntervals, TwoByTwoHandEnumeration) {
    const auto set = grid_outcomes({2, 2}, {0, 1, 2, 4});
    const auto s = hacking_intervals(set, 1);
    ASSERT_EQ(s.ranges.size(), 4u);
    // fixing layer 1: {0,1} and {2,4}; fixing layer 2: {0,2} and {1,4}
    EXPECT_EQ(std::multiset<double>(s.ranges.begin(), s.ranges.end()), (std::multiset<double>{1, 2, 2, 3}));
    EXPECT_DOUBLE_EQ(s.ari, 2.0);
    EXPECT_THROW((void)hacking_intervals(set, 0), DomainError);
    EXPECT_THROW((void)hacking_intervals(set, 2), DomainError);
}

TEST(HackingIntervals, MatchesBruteForceAndCountsOnRandomGrids) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t J = 2 + rng() % 4;
        std::vector<std::size_t> radices(J);
        for (auto& r : radices) r = 2 + rng() % 3;
        const auto set = random_outcomes(radices, rng());
        const auto rep = hacking_interval_report(set, Field::t, 2);
        ASSERT_EQ(rep.slices.size(), J - 1);
        for (const auto& s : rep.slices) {
            EXPECT_EQ(s.ranges.size(), interval_count(set.spec(), s.K));
            const auto oracle = oracle_ranges(set, s.K);
            const std::multiset<double> got(s.ranges.begin(), s.ranges.end());
            EXPECT_EQ(got, oracle);
            for (double r : s.ranges) EXPECT_GE(r, 0.0);
        }
        // more free mappings never shrink the average range
        for (std::size_t n = 1; n + 1 <= rep.ari_by_free.size(); ++n)
            EXPECT_GE(rep.ari_by_free[n], rep.ari_by_free[n - 1] - 1e-12);
        for (std::size_t n = 2; n < J; ++n)
            EXPECT_NEAR(rep.growth[n - 2], rep.ari_by_free[n - 1] / rep.ari_by_free[n - 2] - 1, 1e-12);
    }
}

TEST(HackingIntervals, UnusablePathsAreExcludedAndCounted) {
    auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 2, 2});
    std::vector<PathOutcome> outs;
    for (std::uint64_t i = 0; i < 8; ++i) {
        PathOutcome o;
        o.path_index = i;
        o.t = static_cast<double>(i);
        if (i == 7) {
            o.status = PathStatus::error;
            o.t = 1000;
        }
        outs.push_back(o);
    }
    const OutcomeSet set(spec, outs);
    const auto rep = hacking_interval_report(set);
    EXPECT_EQ(rep.usable, 7u);
    EXPECT_EQ(rep.excluded, 1u);
    for (const auto& s : rep.slices)
        for (double r : s.ranges)
            if (std::isfinite(r)) EXPECT_LE(r, 6.0);
    std::ostringstream csv;
    rep.write_csv(csv, spec);
    EXPECT_NE(csv.str().find("free,K,fixed_layers"), std::string::npos);
    EXPECT_NE(csv.str().find("L1|L2,o2|o2,1,0"), std::string::npos);  // only path 6 survives
}

TEST(PowerLaw, ExactGeometricAndTableShapedInput) {
    std::vector<double> g;
    for (int n = 1; n <= 6; ++n) g.push_back(2 * std::pow(3.0, n));
    const auto p = fit_power_law(g);
    EXPECT_NEAR(p.a, 2.0, 1e-10);
    EXPECT_NEAR(p.b, 3.0, 1e-10);
    const std::vector<double> table{0.779, 1.656, 2.662, 3.847, 5.278, 7.048, 9.285, 12.149, 15.745};
    const auto q = fit_power_law(table);
    EXPECT_GE(q.b, 1.35);
    EXPECT_LE(q.b, 1.50);
    EXPECT_THROW((void)fit_power_law(std::vector<double>{1.0}), DomainError);
    EXPECT_THROW((void)fit_power_law(std::vector<double>{1.0, 0.0}), DomainError);
}

TEST(EtC, OddsOfFavorableOutcomeExamples) {
    EXPECT_NEAR(1 - odds_of_favorable_outcome(0.998, 0.9), 0.02, 1e-12);
    EXPECT_NEAR(1 - odds_of_favorable_outcome(0.998, 0.95), 0.04, 1e-12);
}

TEST(EtC, GaussianFitReproducesTheExamples) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(1.0, 2.0);
    std::vector<double> x(500);
    for (auto& v : x) v = g(rng);
    const double mu = stats::mean(x), sd = stats::sd_sample(x);
    const double b = mu + sd * stats::normal_quantile(0.998);
    EXPECT_NEAR(etc_score(x, b, 0.9).etc, 0.02, 1e-9);
    EXPECT_NEAR(etc_score(x, b, 0.95).etc, 0.04, 1e-9);
    const auto low = etc_score(x, mu, 0.9);
    EXPECT_DOUBLE_EQ(low.etc, 1.0);
    EXPECT_DOUBLE_EQ(low.ofo, 0.0);
}

TEST(EtC, MonotoneInReferenceValueForEveryFit) {
    std::mt19937_64 rng(5);
    std::student_t_distribution<double> g(4);
    std::vector<double> x(300);
    for (auto& v : x) v = g(rng);
    for (const auto& fit : {parse_fit("empirical"), parse_fit("gaussian"), parse_fit("student", 3)}) {
        double prev = 2;
        for (double b = -3; b <= 8; b += 0.25) {
            const auto r = etc_score(x, b, 0.9, fit);
            EXPECT_GE(r.ofo, 0.0);
            EXPECT_LE(r.ofo, 1.0);
            EXPECT_LE(r.etc, prev + 1e-12);
            prev = r.etc;
            const auto r95 = etc_score(x, b, 0.95, fit);
            if (b > r.theta && b > r95.theta && fit.kind == FitKind::gaussian) EXPECT_GE(r95.etc, r.etc - 1e-12);
        }
    }
}

TEST(EtC, StudentScaleIsMomentMatched) {
    std::vector<double> x;
    for (int i = 0; i < 40; ++i) x.push_back(i % 2 ? 1.0 : -1.0);
    const auto r = etc_score(x, 0.0, 0.9, parse_fit("student", 3));
    EXPECT_NEAR(r.scale, stats::sd_sample(x) * std::sqrt(1.0 / 3.0), 1e-12);
    EXPECT_NEAR(r.theta, r.scale * stats::student_quantile(0.9, 3), 1e-12);
}

TEST(EtC, Errors) {
    EXPECT_THROW((void)etc_score(std::vector<double>(10, 1.0), 1, 0.9), DomainError);
    EXPECT_THROW((void)etc_score(std::vector<double>(40, 1.0), 1, 0.9), DomainError);
    EXPECT_THROW((void)etc_score(std::vector<double>(40, 1.0), 1, 1.0, parse_fit("empirical")), DomainError);
    EXPECT_NO_THROW((void)etc_score(std::vector<double>(10, 1.0), 1, 0.9, parse_fit("empirical")));
    EXPECT_THROW((void)parse_fit("cauchy"), ValidationError);
}

TEST(PCurve, HarmonicAndGeometricKappa) {
    const auto u = pcurve_from_counts(std::vector<std::size_t>(10, 50));
    EXPECT_NEAR(u.kappa, 1 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5, 1e-12);
    EXPECT_EQ(u.label, "problematic");
    std::vector<std::size_t> geo;
    std::size_t c = 1000000000;
    for (int i = 0; i < 10; ++i, c /= 10) geo.push_back(c);
    const auto gk = pcurve_from_counts(geo);
    EXPECT_NEAR(gk.kappa, 0.1 * (1 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5), 1e-12);
    EXPECT_EQ(gk.label, "unnecessary");
}

TEST(PCurve, ConvexDecreasingHasNoViolations) {
    const auto r = pcurve_from_counts({400, 160, 80, 48, 32, 24, 20, 18, 17, 16});
    EXPECT_TRUE(r.monotonicity_violations.empty());
    EXPECT_TRUE(r.convexity_violations.empty());
    EXPECT_TRUE(r.complete);
    const auto bad = pcurve_from_counts({10, 20, 10, 10, 10, 10, 10, 10, 10, 10});
    EXPECT_EQ(bad.monotonicity_violations, (std::vector<std::size_t>{1, 3, 4}));
}

TEST(PCurve, ClassBoundaries) {
    EXPECT_EQ(kappa_class(0.2499), "unnecessary");
    EXPECT_EQ(kappa_class(0.25), "possible");
    EXPECT_EQ(kappa_class(0.4), "possible");
    EXPECT_EQ(kappa_class(0.41), "problematic");
}

TEST(PCurve, BinningScaleFreeAndZeroBins) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u;
    std::vector<double> p(300);
    for (auto& v : p) v = std::pow(u(rng), 3);
    const auto a = pcurve_report(p);
    std::size_t total = 0;
    for (auto n : a.counts) total += n;
    EXPECT_EQ(total, p.size());
    auto twice = p;
    twice.insert(twice.end(), p.begin(), p.end());
    EXPECT_NEAR(pcurve_report(twice).kappa, a.kappa, 1e-12);
    EXPECT_EQ(pcurve_report(std::vector<double>{1.0}).counts.back(), 1u);

    const auto z = pcurve_from_counts({5, 0, 3, 2, 1, 1, 1, 1, 1, 1});
    EXPECT_FALSE(z.complete);
    EXPECT_NEAR(z.kappa, 0.0 + 2.0 / 3 / 3 + 1.0 / 2 / 4 + 1.0 / 1 / 5, 1e-12);
    EXPECT_FALSE(z.undefined_ratios.empty());
    EXPECT_THROW((void)pcurve_report(std::vector<double>{}), DomainError);
    EXPECT_THROW((void)pcurve_report(std::vector<double>{0.5}, 7), DomainError);
    EXPECT_THROW((void)pcurve_report(std::vector<double>{1.5}), DomainError);
}

TEST(PCurve, KappaTablePerGroup) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    std::vector<double> t(2 * 60);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (i < 60 ? 4.0 : 0.0) + g(rng);
    const auto set = grid_outcomes({2, 60}, t);
    const auto rows = kappa_table(set, "L1");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].paths, 60u);
    EXPECT_LT(rows[0].report.counts[0], 61u);
    EXPECT_GT(rows[0].report.counts[0], rows[1].report.counts[0]);
    std::ostringstream csv;
    write_kappa_csv(csv, rows);
    EXPECT_NE(csv.str().find("group,paths,kappa"), std::string::npos);
}
