#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "forkpath/averaging.hpp"
#include "forkpath/error.hpp"
#include "forkpath/pathgrid.hpp"

using namespace forkpath;
using namespace forkpath::averaging;

namespace {

PathOutcome outcome(std::uint64_t idx, double b, double se, double aic = 0.0, long n = 100) {
    PathOutcome o;
    o.path_index = idx;
    o.b = b;
    o.se = se;
    o.aic = aic;
    o.n = n;
    o.k = 1;
    o.rss = 50;
    o.yvar = 1;
    return o;
}

std::vector<const PathOutcome*> ptrs(const std::vector<PathOutcome>& v) {
    std::vector<const PathOutcome*> p;
    for (const auto& o : v) p.push_back(&o);
    return p;
}

// Fernandez-Ley-Steel benchmark prior with g = 1/N, written from the
// marginal-likelihood expression directly
double fls_log_ml(long N, int k, double rss, double sst) {
    const double g = 1.0 / static_cast<double>(N);
    return 0.5 * k * std::log(g / (1 + g)) -
           0.5 * (static_cast<double>(N) - 1) * std::log(rss / (1 + g) + g / (1 + g) * sst);
}

}  // namespace

TEST(Averaging, FrequentistWeights) {
    auto w = frequentist_weights(std::vector<double>{0.0, 2.0});
    EXPECT_NEAR(w[0], 0.731, 1e-3);
    EXPECT_NEAR(w[1], 0.269, 1e-3);
    EXPECT_NEAR(w[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    for (double x : frequentist_weights(std::vector<double>(7, 3.5))) EXPECT_DOUBLE_EQ(x, 1.0 / 7);
    EXPECT_EQ(frequentist_weights(std::vector<double>{42.0})[0], 1.0);
    EXPECT_THROW((void)frequentist_weights(std::vector<double>{}), DomainError);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 30);
    std::vector<double> a(200);
    for (auto& x : a) x = 1e4 + g(rng);
    auto wa = frequentist_weights(a);
    EXPECT_NEAR(std::accumulate(wa.begin(), wa.end(), 0.0), 1.0, 1e-12);
    auto shifted = a;
    for (auto& x : shifted) x -= 777.0;
    auto ws = frequentist_weights(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(wa[i], ws[i], 1e-12);
    EXPECT_EQ(std::max_element(wa.begin(), wa.end()) - wa.begin(), std::min_element(a.begin(), a.end()) - a.begin());
}

TEST(Averaging, AggregateSigma) {
    const std::vector<double> b{1.0, 1.0, 1.0}, s{0.5, 0.5, 0.5}, w{0.2, 0.3, 0.5};
    EXPECT_NEAR(aggregate_sigma(b, s, w, SigmaConvention::paper), 0.25, 1e-15);
    EXPECT_NEAR(aggregate_sigma(b, s, w, SigmaConvention::source), 0.5, 1e-15);
    const std::vector<double> b2{-0.3, 0.3}, s0{0, 0}, wu{0.5, 0.5};
    EXPECT_NEAR(aggregate_sigma(b2, s0, wu, SigmaConvention::paper), 0.09, 1e-15);
    EXPECT_NEAR(aggregate_sigma(b2, s0, wu, SigmaConvention::source), 0.3, 1e-15);
    const std::vector<double> b3{2.0, 5.0}, s3{0.7, 9.0}, w3{1.0, 0.0};
    EXPECT_NEAR(aggregate_sigma(b3, s3, w3, SigmaConvention::paper), 0.49, 1e-15);
    EXPECT_THROW((void)aggregate_sigma(b3, std::vector<double>{-1, 1}, w3), DomainError);
}

TEST(Averaging, ConfidenceInterval) {
    auto [lo, hi] = confidence_interval(0.0, 1.0, 1, 0.05);
    EXPECT_NEAR(hi, 1.959964, 1e-6);
    EXPECT_NEAR(lo, -1.959964, 1e-6);
    auto [l4, h4] = confidence_interval(0.0, 1.0, 4, 0.05);
    EXPECT_NEAR(h4 - l4, (hi - lo) / 2, 1e-14);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    int covered = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        std::vector<PathOutcome> v;
        for (std::uint64_t p = 0; p < 40; ++p) v.push_back(outcome(p, 1.5 + 0.2 * g(rng), 0.2, 10.0));
        auto a = frequentist_average(ptrs(v));
        if (a.lo <= 1.5 && 1.5 <= a.hi) ++covered;
    }
    EXPECT_GE(covered, static_cast<int>(0.9 * reps));
}

TEST(Averaging, BayesFactor) {
    ModelFit m{120, 1, 80.0, 1.0};
    EXPECT_DOUBLE_EQ(bayes_factor(m, m), 1.0);
    EXPECT_DOUBLE_EQ(bayes_factor(m, m, BayesCompat::paper), 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const long N = 80;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> y(N), x1(N), x2(N);
        for (long i = 0; i < N; ++i) {
            x1[i] = g(rng);
            x2[i] = g(rng);
            y[i] = 0.4 * x1[i] + g(rng);
        }
        auto fit = [&](const std::vector<double>& x) {
            double mx = 0, my = 0;
            for (long i = 0; i < N; ++i) mx += x[i] / N, my += y[i] / N;
            double sxy = 0, sxx = 0, syy = 0;
            for (long i = 0; i < N; ++i) {
                sxy += (x[i] - mx) * (y[i] - my);
                sxx += (x[i] - mx) * (x[i] - mx);
                syy += (y[i] - my) * (y[i] - my);
            }
            return std::pair{syy - sxy * sxy / sxx, syy};
        };
        auto [s1, sst] = fit(x1);
        auto [s2, sst2] = fit(x2);
        ModelFit a{N, 1, s1, sst / N}, b{N, 1, s2, sst2 / N};
        const double oracle = fls_log_ml(N, 1, s1, sst) - fls_log_ml(N, 1, s2, sst);
        const double got = log_bayes_factor(a, b);
        EXPECT_EQ(std::signbit(got), std::signbit(oracle));
        EXPECT_NEAR(log_bayes_factor(a, b), -log_bayes_factor(b, a), 1e-12);
    }
    EXPECT_THROW((void)bayes_factor(ModelFit{0, 1, 1, 1}, m), DomainError);
}

TEST(Averaging, PosteriorProbabilities) {
    std::vector<ModelFit> fits{{100, 1, 90, 1}, {100, 1, 95, 1}, {60, 1, 50, 1.1}, {200, 1, 170, 0.95}};
    auto p = posterior_probabilities(fits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    auto rev = fits;
    std::reverse(rev.begin(), rev.end());
    auto pr = posterior_probabilities(rev);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], pr[p.size() - 1 - i], 1e-15);
    // posterior odds equal the Bayes factor
    EXPECT_NEAR(p[0] / p[1], bayes_factor(fits[0], fits[1]), 1e-9 * p[0] / p[1]);
}

TEST(Averaging, BayesianAverage) {
    std::vector<PathOutcome> one{outcome(0, 0.7, 0.3)};
    auto a = bayesian_average(ptrs(one));
    EXPECT_DOUBLE_EQ(a.estimate, 0.7);
    EXPECT_NEAR(a.variance, 0.09, 1e-15);
    std::vector<PathOutcome> two{outcome(0, -0.4, 0.3), outcome(1, 0.4, 0.3)};
    auto s = bayesian_average(ptrs(two));
    EXPECT_NEAR(s.estimate, 0.0, 1e-15);
    EXPECT_NEAR(s.variance, 0.09 + 0.16, 1e-14);
    EXPECT_NEAR(s.t_star, 100.0, 1e-12);
    EXPECT_NEAR(s.hi - s.lo, 2 * 1.959963984540054 * std::sqrt(0.25 / 100.0), 1e-12);
    EXPECT_GE(s.variance, 0.0);
}

TEST(Averaging, SplitTestIdentities) {
    auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 4, 3});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::vector<PathOutcome> same, shifted;
    for (std::uint64_t i = 0; i < spec.path_count(); ++i) {
        const auto c = spec.decode(i);
        const double base = static_cast<double>(c[1]) + 0.5 * static_cast<double>(c[2]);
        same.push_back(outcome(i, base, 0.1, static_cast<double>(c[2])));
        shifted.push_back(outcome(i, base + 0.01 * g(rng) + (c[0] == 1 ? 0.03 : 0.0), 0.1, 3.0 * g(rng)));
    }
    OutcomeSet s1(spec, same);
    auto t0 = conditional_split_test(s1, "L1", "o1", "o2");
    EXPECT_EQ(t0.pairs, 12u);
    EXPECT_TRUE(t0.exact_zero);
    EXPECT_EQ(t0.t, 0.0);
    for (double d : t0.delta) EXPECT_EQ(d, 0.0);

    OutcomeSet s2(spec, shifted);
    for (auto scheme : {WeightScheme::uniform, WeightScheme::aic, WeightScheme::bayes}) {
        auto t = conditional_split_test(s2, "L1", "o1", "o2", scheme);
        EXPECT_LT(t.identity_error, 1e-12);
        auto back = conditional_split_test(s2, "L1", "o2", "o1", scheme);
        EXPECT_NEAR(back.mean_delta, -t.mean_delta, 1e-14);
        EXPECT_NEAR(back.t, -t.t, 1e-9);
    }
    auto tu = conditional_split_test(s2, "L1", "o1", "o2");
    EXPECT_LT(tu.t, 0.0);
    EXPECT_LT(tu.p_value, 0.05);
    EXPECT_NEAR(tu.mean_delta, -0.03, 0.01);

    auto rep = layer_report(s2, "L2", WeightScheme::aic);
    EXPECT_EQ(rep.pairwise.size(), 6u);
    EXPECT_EQ(rep.option_averages.size(), 4u);

    auto partial = shifted;
    partial.erase(partial.begin() + 13);
    OutcomeSet s3(spec, partial);
    EXPECT_THROW((void)conditional_split_test(s3, "L1", "o1", "o2"), PairingError);
}

TEST(Averaging, SplitTestPower) {
    auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 4, 4});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    int detected = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<PathOutcome> v;
        std::vector<double> base(16);
        for (auto& b : base) b = g(rng);
        const double within = 0.1;  // sd of the within-pair difference
        for (std::uint64_t i = 0; i < spec.path_count(); ++i) {
            const auto c = spec.decode(i);
            const double noise = within / std::sqrt(2.0) * g(rng);
            v.push_back(outcome(i, base[c[1] * 4 + c[2]] + noise + (c[0] == 1 ? 3 * within : 0.0), 0.1));
        }
        auto t = conditional_split_test(OutcomeSet(spec, v), "L1", "o1", "o2");
        if (t.p_value < 0.05 && t.mean_delta < 0) ++detected;
    }
    EXPECT_GE(detected, 95);
}

TEST(Averaging, InfeasibleTwinsSkipped) {
    pathgrid::StudySpec spec({{"start", {{"first", nullptr}, {"middle", nullptr}}},
                              {"end", {{"middle", nullptr}, {"last", nullptr}}}},
                             {{{{"start", "middle"}, {"end", "middle"}}, "empty"}});
    std::vector<PathOutcome> v;
    for (std::uint64_t i = 0; i < 4; ++i)
        if (spec.assignment(i).feasible) v.push_back(outcome(i, static_cast<double>(i), 0.1));
    OutcomeSet s(spec, v);
    auto t = conditional_split_test(s, "start", "first", "middle");
    EXPECT_EQ(t.pairs, 1u);
    EXPECT_EQ(stars(0.001), "***");
    EXPECT_EQ(stars(0.03), "**");
    EXPECT_EQ(stars(0.07), "*");
    EXPECT_EQ(stars(0.2), "");
}
