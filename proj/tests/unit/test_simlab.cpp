#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "forkpath/error.hpp"
#include "forkpath/simlab.hpp"

using namespace forkpath;
using namespace forkpath::simlab;
using Eigen::MatrixXd;

namespace {

double corr(const MatrixXd& B, long p, long q) {
    const auto x = B.col(p).array() - B.col(p).mean();
    const auto y = B.col(q).array() - B.col(q).mean();
    return (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
}

double variance(const MatrixXd& B, long p) {
    const auto x = B.col(p).array() - B.col(p).mean();
    return x.square().sum() / static_cast<double>(B.rows() - 1);
}

// Var(F_P(0)) for standard Gaussians with correlation rho^d: orthant probabilities
double oracle_mse_at_zero(const std::vector<std::size_t>& radices, double rho) {
    const auto spec = pathgrid::make_grid(radices);
    const auto P = spec.path_count();
    double s = 0;
    for (std::uint64_t p = 0; p < P; ++p)
        for (std::uint64_t q = 0; q < P; ++q) {
            const auto d = pathgrid::path_distance(spec.assignment(p), spec.assignment(q));
            s += std::asin(std::pow(rho, static_cast<double>(d))) / (2 * std::numbers::pi);
        }
    return s / static_cast<double>(P * P);
}

}  // namespace

TEST(Dgp, FullContaminationGivesIdenticalEstimates) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{3, 2});
    DgpConfig c;
    c.alpha = {1.0};
    c.b_bar = 0.3;
    const auto w = simulate_paths(c, spec);
    for (double b : w.b_hat) EXPECT_DOUBLE_EQ(b, 0.3 + w.b_tilde);
}

TEST(Dgp, PureNoiseIsUncorrelatedAcrossPaths) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 2});
    DgpConfig c;
    c.alpha = {0.0};
    const auto B = PathSimulator(c, spec).estimates(4000);
    for (long p = 0; p < 4; ++p)
        for (long q = p + 1; q < 4; ++q) EXPECT_NEAR(corr(B, p, q), 0.0, 3 / std::sqrt(4000.0));
}

TEST(Dgp, VarianceMatchingReproducesTheEffectDistribution) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 2});
    DgpConfig c;
    c.alpha = {0.5};
    c.sigma_b = 1.5;
    c.sigma_e = c.sigma_b * std::sqrt((1 + 0.5) / (1 - 0.5));
    const long W = 6000;
    const auto B = PathSimulator(c, spec).estimates(W);
    const double target = c.sigma_b * c.sigma_b;
    for (long p = 0; p < 4; ++p) EXPECT_NEAR(variance(B, p), target, 3 * target * std::sqrt(2.0 / W));
}

TEST(Dgp, CovarianceIdentityWithPathSpecificAlpha) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 2});
    DgpConfig c;
    c.alpha = {0.1, 0.4, 0.7, 0.9};
    c.sigma_b = 1.0;
    c.sigma_e = 2.0;
    const long W = 8000;
    const auto B = PathSimulator(c, spec).estimates(W, 2);
    for (long p = 0; p < 4; ++p)
        for (long q = p + 1; q < 4; ++q) {
            const double ap = c.alpha[static_cast<std::size_t>(p)], aq = c.alpha[static_cast<std::size_t>(q)];
            const double sp = std::sqrt(ap * ap + (1 - ap) * (1 - ap) * 4), sq = std::sqrt(aq * aq + (1 - aq) * (1 - aq) * 4);
            const double expected = ap * aq / (sp * sq);
            EXPECT_NEAR(corr(B, p, q), expected, 3 * (1 - expected * expected) / std::sqrt(W) + 1e-3);
        }
}

TEST(Dgp, TargetedCorrelationFollowsDistance) {
    const std::vector<std::size_t> radices{3, 3, 2};
    const auto spec = pathgrid::make_grid(radices);
    DgpConfig c;
    c.alpha = {0.5};
    c.rho = 0.8;
    const long W = 5000;
    const auto B = PathSimulator(c, spec).estimates(W);
    for (std::uint64_t q = 1; q < spec.path_count(); ++q) {
        const auto d = pathgrid::path_distance(spec.assignment(0), spec.assignment(q));
        const double target = std::pow(0.8, static_cast<double>(d));
        EXPECT_NEAR(corr(B, 0, static_cast<long>(q)), target, 3 * (1 - target * target) / std::sqrt(W) + 1e-3);
    }
}

TEST(Dgp, InfeasibleTargetNamesRho) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 2});
    DgpConfig c;
    c.alpha = {0.5};
    c.rho = 0.0;
    try {
        PathSimulator s(c, spec);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("rho = 0"), std::string::npos);
    }
    c.alpha = {1.0};
    c.rho = 0.5;
    EXPECT_THROW(PathSimulator(c, spec), DomainError);
    c.alpha = {1.5};
    EXPECT_THROW(PathSimulator(c, spec), ValidationError);
    c.alpha = {0.5};
    c.lengths = {1};
    EXPECT_THROW(PathSimulator(c, spec), ValidationError);
}

TEST(Dgp, MaterializedDataReproducesTheEstimates) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{2, 3});
    DgpConfig c;
    c.alpha = {0.3};
    c.rho = 0.6;
    c.lengths = {10, 20, 30, 40, 50, 60};
    c.keep_data = true;
    const auto w = simulate_paths(c, spec);
    ASSERT_EQ(w.data.size(), 6u);
    for (std::size_t p = 0; p < 6; ++p) {
        const auto& d = w.data[p];
        ASSERT_EQ(d.x.size(), c.lengths[p]);
        double xy = 0, xx = 0;
        for (std::size_t i = 0; i < d.x.size(); ++i) xy += d.x[i] * d.y[i], xx += d.x[i] * d.x[i];
        EXPECT_NEAR(xy / xx, w.b_hat[p], 1e-10);
        EXPECT_NEAR(w.b_hat[p], c.b_bar + 0.3 * w.b_tilde + 0.7 * w.e[p], 1e-10);
    }
}

TEST(Dgp, DeterministicAcrossThreadCounts) {
    const auto spec = pathgrid::make_grid(std::vector<std::size_t>{3, 2});
    DgpConfig c;
    c.rho = 0.7;
    const PathSimulator s(c, spec);
    EXPECT_EQ(s.estimates(50, 1), s.estimates(50, 3));
    const auto j = c.to_json();
    EXPECT_EQ(DgpConfig::from_json(j).to_json(), j);
}

TEST(Convergence, KroneckerSamplerMatchesKernel) {
    const std::vector<std::size_t> radices{3, 3};
    const long W = 5000;
    MatrixXd Z(W, 9);
    for (long w = 0; w < W; ++w) {
        const auto z = correlated_outcomes(radices, 0.5, 9, static_cast<std::uint64_t>(w));
        for (long p = 0; p < 9; ++p) Z(w, p) = z[static_cast<std::size_t>(p)];
    }
    const auto spec = pathgrid::make_grid(radices);
    for (long q = 0; q < 9; ++q) {
        const auto d = pathgrid::path_distance(spec.assignment(0), spec.assignment(static_cast<std::uint64_t>(q)));
        const double target = std::pow(0.5, static_cast<double>(d));
        EXPECT_NEAR(corr(Z, 0, q), target, 3 * (1 - target * target) / std::sqrt(W) + 1e-3);
        EXPECT_NEAR(variance(Z, q), 1.0, 3 * std::sqrt(2.0 / W));
    }
}

TEST(Convergence, IndependentPathsMeetTheDkwRate) {
    const std::vector<std::size_t> radices{10, 10, 10};
    const auto pt = convergence_diagnostic(radices, 0.0, 400, 3, 2);
    EXPECT_EQ(pt.paths, 1000u);
    EXPECT_LE(pt.sup_mse, 1.0 / 4000 + 3 * pt.mse_se);
    EXPECT_NEAR(pt.bound, 1.0 / 4000 + 1.0 / 1000, 1e-15);
}

TEST(Convergence, AgreesWithOrthantOracleAtZero) {
    const std::vector<double> zero{0.0};
    for (std::size_t r : {2u, 4u, 8u}) {
        const std::vector<std::size_t> radices{r, r};
        const auto pt = convergence_diagnostic(radices, 0.5, 3000, 11, 1, zero);
        EXPECT_NEAR(pt.sup_mse, oracle_mse_at_zero(radices, 0.5), 3 * pt.mse_se);
    }
}

TEST(Convergence, ShrinksWithLayersAndPlateausWithOptions) {
    std::vector<double> by_layers;
    for (std::size_t J : {2u, 4u, 6u, 8u}) {
        const std::vector<std::size_t> radices(J, 2);
        by_layers.push_back(convergence_diagnostic(radices, 0.5, 1500, 5).sup_mse);
    }
    for (std::size_t i = 1; i < by_layers.size(); ++i) EXPECT_LT(by_layers[i], by_layers[i - 1]);

    const std::vector<std::size_t> wide{16, 16};
    const auto pt = convergence_diagnostic(wide, 0.5, 1500, 5);
    EXPECT_GT(pt.sup_mse, 0.03);  // limit arcsin(1/4)/(2 pi) ~ 0.040
    std::ostringstream csv;
    write_convergence_csv(csv, {pt});
    EXPECT_NE(csv.str().find("2,16x16,256,0.5,1500"), std::string::npos);
}
