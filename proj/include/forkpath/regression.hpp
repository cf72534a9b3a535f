#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "forkpath/datapanel.hpp"
#include "forkpath/outcomes.hpp"
#include "forkpath/pathgrid.hpp"

namespace forkpath::regression {

struct RegressionResult {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd se_iid;
    Eigen::VectorXd se_hac;  // empty until HAC errors are attached
    Eigen::VectorXd t_iid;
    Eigen::VectorXd t_hac;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd xtx_inv;
    double rss = 0.0;
    double yvar = 0.0;  // divide-by-n variance of the dependent variable
    double aic = 0.0;
    long n = 0;
    int k = 0;  // regressors excluding the intercept
    int hac_lag = -1;
};

/// n ln(RSS/n) + 2(K+1) with K design columns.
[[nodiscard]] double aic(long n, double rss, long columns);

/// Fits y on X (X carries its own intercept column). Singular designs
/// (reciprocal condition number of X below 1e-10) throw.
[[nodiscard]] RegressionResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Bartlett-kernel sandwich standard errors.
[[nodiscard]] Eigen::VectorXd newey_west_se(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals, int lag,
                                            const Eigen::MatrixXd* xtx_inv = nullptr);

/// floor(4 (n/100)^{2/9}).
[[nodiscard]] int default_hac_lag(long n);

/// Fills se_hac/t_hac; lag < 0 picks default_hac_lag(n).
void attach_hac(RegressionResult& r, const Eigen::MatrixXd& X, int lag = -1);

/// delta + (1 + 3 delta)/n + 3(1 + 3 delta)/n^2.
[[nodiscard]] double amihud_corrected(double delta, long n);

/// Regresses sum_{k=1..h} y_{t+k} on (1, x_t) for t = 0..N-1-h.
[[nodiscard]] RegressionResult predictive(std::span<const double> x, std::span<const double> y, int horizon);

/// Same sample as predictive() with the AR(1) innovation nu_{t+1} added.
[[nodiscard]] RegressionResult augmented_predictive(std::span<const double> x, std::span<const double> y,
                                                    int horizon, bool use_amihud_correction);

// === equity-premium study ===

struct PremiumSettings {
    bool amihud_correction = false;
    long min_observations = 30;
    int hac_lag = -1;  // negative: default_hac_lag(n)
    /// Applied on the "adjusted" branch of the post-treatment layer.
    std::function<void(PathOutcome&)> post_treatment;
};

/// Derives premium, payout, dfy and dfr when the raw constituents are present.
[[nodiscard]] datapanel::DataPanel prepare_macro_panel(const datapanel::DataPanel& raw);

/// Aggregates a monthly panel: premium and svar summed over the period,
/// every other column takes the period's last value.
[[nodiscard]] datapanel::DataPanel aggregate_panel(const datapanel::DataPanel& monthly, datapanel::Frequency target);

/// The ten-layer protocol: 27,648 nominal paths, 20,736 feasible.
[[nodiscard]] pathgrid::StudySpec premium_default_spec();

class PremiumStudy : public StudyExecutor {
public:
    /// `panels` must hold a monthly panel; other frequencies are aggregated
    /// from it when absent.
    PremiumStudy(pathgrid::StudySpec spec, std::map<datapanel::Frequency, datapanel::DataPanel> panels,
                 PremiumSettings settings = {});

    [[nodiscard]] const pathgrid::StudySpec& spec() const override { return spec_; }
    [[nodiscard]] PathOutcome run_path(const pathgrid::PathAssignment& path) const override;

    struct PathConfig {
        datapanel::Frequency frequency = datapanel::Frequency::monthly;
        bool impute = false;
        double winsor = 0.0;
        bool difference = false;
        std::string predictor = "b/m";
        int horizon = 1;
        bool start_middle = false;
        bool end_middle = false;
        bool augmented = false;
        bool hac = false;
        bool adjusted = false;
    };
    [[nodiscard]] PathConfig resolve(const pathgrid::PathAssignment& path) const;

private:
    pathgrid::StudySpec spec_;
    std::map<datapanel::Frequency, datapanel::DataPanel> panels_;
    std::vector<std::string> predictors_;
    PremiumSettings settings_;
};

[[nodiscard]] OutcomeSet run_premium_study(const pathgrid::StudySpec& spec, const datapanel::DataPanel& monthly,
                                           PremiumSettings settings = {}, unsigned jobs = 1);

}  // namespace forkpath::regression
