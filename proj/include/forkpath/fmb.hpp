#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "forkpath/datapanel.hpp"
#include "forkpath/outcomes.hpp"
#include "forkpath/pathgrid.hpp"

namespace forkpath::fmb {

inline const std::vector<std::string> kFactors{"MKT", "SMB", "HML", "RMW", "CMA"};

enum class PassMode { full, rolling_short, rolling_long };

[[nodiscard]] PassMode parse_pass_mode(std::string_view s);
/// Trailing window length: 24/60 months or 120/300 days. Zero for full.
[[nodiscard]] std::size_t window_length(PassMode mode, datapanel::Frequency f);

/// Dense date x column matrix, NaN for absent values.
struct ReturnFrame {
    std::vector<std::int64_t> dates;
    std::vector<std::string> names;
    Eigen::MatrixXd values;

    [[nodiscard]] std::size_t rows() const { return dates.size(); }
    [[nodiscard]] std::size_t cols() const { return names.size(); }
    [[nodiscard]] std::int64_t month(std::size_t row) const { return dates[row] / 100; }
};

/// Values at or below -99.99 (Ken French missing codes) become NaN.
[[nodiscard]] ReturnFrame to_frame(const datapanel::DataPanel& panel, std::vector<std::string> columns = {});
/// Renames Mkt-RF to MKT so both factor file layouts are accepted.
[[nodiscard]] datapanel::DataPanel normalize_factor_names(const datapanel::DataPanel& factors);
/// Asset returns minus RF on the dates both panels share; factors restricted
/// to the same dates.
[[nodiscard]] std::pair<ReturnFrame, ReturnFrame> excess_returns(const datapanel::DataPanel& assets,
                                                                 const datapanel::DataPanel& factors);

struct FirstPassLoadings {
    std::vector<std::int64_t> months;  // yyyymm of every second-pass date served
    std::vector<Eigen::MatrixXd> betas;  // assets x factors per month, NaN rows where unavailable; one entry in full mode
    std::vector<Eigen::VectorXd> alphas;
    std::string window;

    [[nodiscard]] const Eigen::MatrixXd& beta(std::size_t i) const { return betas.size() == 1 ? betas[0] : betas[i]; }
    [[nodiscard]] const Eigen::VectorXd& alpha(std::size_t i) const {
        return alphas.size() == 1 ? alphas[0] : alphas[i];
    }
};

/// Time-series regressions of each asset on all factors. Rolling modes use
/// the trailing window of rows strictly before each target month; assets are
/// winsorized inside each estimation sample when `winsor` > 0.
[[nodiscard]] FirstPassLoadings first_pass(const ReturnFrame& assets, const ReturnFrame& factors, PassMode mode,
                                           datapanel::Frequency frequency, const std::vector<std::int64_t>& months,
                                           double winsor = 0.0);

struct PremiumSeries {
    std::vector<std::int64_t> months;
    Eigen::MatrixXd gamma;  // dates x (1 + factors), intercept first
    std::vector<double> aic, rss, yvar;
    std::vector<std::size_t> assets;
    std::vector<std::pair<std::int64_t, std::string>> skipped;
};

/// Cross-sectional regression of monthly excess returns on loadings at every
/// month where at least factors + 2 assets are available. Loadings are
/// winsorized per factor across assets when `winsor` > 0.
[[nodiscard]] PremiumSeries second_pass(const ReturnFrame& monthly_excess, const FirstPassLoadings& loadings,
                                        double winsor = 0.0);

struct AssetSet {
    datapanel::DataPanel monthly;
    std::optional<datapanel::DataPanel> daily;
};

struct FmbData {
    datapanel::DataPanel factors_monthly;
    std::optional<datapanel::DataPanel> factors_daily;
    std::map<std::string, AssetSet> assets;  // keyed by asset option id
};

/// factor(5) x assets(9) x frequency(2) x pre_winsor(3) x regression(3) x post_winsor(3).
[[nodiscard]] pathgrid::StudySpec fmb_default_spec();

class FmbStudy : public StudyExecutor {
public:
    FmbStudy(pathgrid::StudySpec spec, FmbData data);

    struct PathConfig {
        std::string factor = "MKT";
        std::string assets;
        datapanel::Frequency frequency = datapanel::Frequency::monthly;
        double pre_winsor = 0.0;
        PassMode mode = PassMode::full;
        double post_winsor = 0.0;
    };

    [[nodiscard]] const pathgrid::StudySpec& spec() const override { return spec_; }
    [[nodiscard]] PathOutcome run_path(const pathgrid::PathAssignment& path) const override;
    [[nodiscard]] PathSeries path_series(const pathgrid::PathAssignment& path) const override;
    [[nodiscard]] PathConfig resolve(const pathgrid::PathAssignment& path) const;
    /// Premium series shared by every factor of one configuration.
    [[nodiscard]] std::shared_ptr<const PremiumSeries> premiums(const PathConfig& c) const;

private:
    pathgrid::StudySpec spec_;
    FmbData data_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const PremiumSeries>> cache_;
};

}  // namespace forkpath::fmb
