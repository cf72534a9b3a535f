#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "forkpath/datapanel.hpp"
#include "forkpath/outcomes.hpp"
#include "forkpath/pathgrid.hpp"

namespace forkpath::sorting {

enum class Weighting { EW, VW, IVW, CW };
enum class Cleaning { impute, remove };

[[nodiscard]] Weighting parse_weighting(std::string_view s);
[[nodiscard]] std::string to_string(Weighting w);

struct SortConfig {
    std::string characteristic;
    double q = 0.2;
    int holding = 1;
    Weighting weighting = Weighting::EW;
    Cleaning cleaning = Cleaning::impute;
    std::size_t window_begin = 0;        // month positions, half-open
    std::size_t window_end = SIZE_MAX;   // clipped to the panel length
};

/// Dense month x stock view of a long-format panel. Absent cells are NaN.
class StockPanel {
public:
    StockPanel() = default;
    /// `characteristics` empty: every column except ret, mvel1 and retvol.
    static StockPanel from_long(const datapanel::LongPanel& panel, std::vector<std::string> characteristics = {});

    [[nodiscard]] std::size_t months() const { return dates_.size(); }
    [[nodiscard]] std::size_t stocks() const { return ids_.size(); }
    [[nodiscard]] const std::vector<std::int64_t>& dates() const { return dates_; }
    [[nodiscard]] const std::vector<std::int64_t>& ids() const { return ids_; }
    [[nodiscard]] const std::vector<std::string>& characteristics() const { return names_; }

    [[nodiscard]] bool listed(std::size_t t, std::size_t s) const { return listed_[t * ids_.size() + s] != 0; }
    [[nodiscard]] double ret(std::size_t t, std::size_t s) const { return ret_[t * ids_.size() + s]; }
    [[nodiscard]] double mvel1(std::size_t t, std::size_t s) const { return mvel1_[t * ids_.size() + s]; }
    [[nodiscard]] double retvol(std::size_t t, std::size_t s) const { return retvol_[t * ids_.size() + s]; }
    [[nodiscard]] const std::vector<double>& raw(std::string_view characteristic) const;
    /// Characteristic after the cleaning choice; imputation fills each
    /// stock's gaps with its latest earlier value.
    [[nodiscard]] std::vector<double> cleaned(std::string_view characteristic, Cleaning c) const;

    /// Copy with one characteristic replaced (tests and what-if runs).
    [[nodiscard]] StockPanel with_characteristic(const std::string& name, std::vector<double> values) const;

private:
    std::vector<std::int64_t> dates_, ids_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> chars_;
    std::vector<double> ret_, mvel1_, retvol_;
    std::vector<unsigned char> listed_;
};

struct Legs {
    std::vector<std::size_t> long_members, short_members;  // stock positions, ascending
    std::vector<double> long_weights, short_weights;
};

/// Sorts the cross-section at month t. `values` holds the cleaned
/// characteristic (months x stocks). Throws when fewer than 10 stocks qualify.
[[nodiscard]] Legs form_portfolio(const StockPanel& panel, std::span<const double> values, const SortConfig& config,
                                  std::size_t t);
[[nodiscard]] Legs form_portfolio(const StockPanel& panel, const SortConfig& config, std::size_t t);

struct LongShortSeries {
    std::vector<std::int64_t> dates;
    std::vector<double> returns;
    std::vector<std::size_t> long_count, short_count;
};

[[nodiscard]] LongShortSeries longshort_returns(const StockPanel& panel, std::span<const double> values,
                                                const SortConfig& config);
[[nodiscard]] LongShortSeries longshort_returns(const StockPanel& panel, const SortConfig& config);

/// sqrt(T) mean / sd with the divide-by-(T-1) sd; needs T >= 24.
[[nodiscard]] double sharpe_tstat(std::span<const double> series);

/// Outcome fields for a return series: b = mean, se = sd/sqrt(T), t,
/// intercept-only AIC.
[[nodiscard]] PathOutcome series_outcome(std::span<const double> series);

// === anomalies study ===

/// The 82 characteristic names of the reference anomaly set.
[[nodiscard]] const std::vector<std::string>& reference_characteristics();

/// characteristic x cleaning(2) x holding(3) x window(6) x threshold(4) x weighting(4).
[[nodiscard]] pathgrid::StudySpec anomalies_spec(const std::vector<std::string>& characteristics);

/// Month bounds of a window option: thirds of the sample, cut at floor(N/3)
/// and floor(2N/3).
[[nodiscard]] std::pair<std::size_t, std::size_t> window_bounds(std::string_view window_id, std::size_t months);

class AnomaliesStudy : public StudyExecutor {
public:
    AnomaliesStudy(pathgrid::StudySpec spec, std::shared_ptr<const StockPanel> panel);

    [[nodiscard]] const pathgrid::StudySpec& spec() const override { return spec_; }
    [[nodiscard]] PathOutcome run_path(const pathgrid::PathAssignment& path) const override;
    [[nodiscard]] SortConfig resolve(const pathgrid::PathAssignment& path) const;
    [[nodiscard]] LongShortSeries path_returns(const pathgrid::PathAssignment& path) const;

    /// Default path of a characteristic: impute, 1 month, q = 0.2, EW, full sample.
    [[nodiscard]] std::uint64_t default_path(std::size_t characteristic) const;
    /// Feasible paths at distance one from the default, characteristic fixed.
    [[nodiscard]] std::vector<std::uint64_t> robustness_paths(std::size_t characteristic) const;

private:
    [[nodiscard]] std::shared_ptr<const std::vector<double>> values(const std::string& name, Cleaning c) const;

    pathgrid::StudySpec spec_;
    std::shared_ptr<const StockPanel> panel_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::pair<std::string, int>, std::shared_ptr<const std::vector<double>>> cache_;
};

struct CharacteristicSummary {
    std::string characteristic;
    double median_t = PathOutcome::nan;
    double default_t = PathOutcome::nan;
    double robust_lo = PathOutcome::nan, robust_hi = PathOutcome::nan;
    double full_lo = PathOutcome::nan, full_hi = PathOutcome::nan;
    std::size_t usable = 0;
};

[[nodiscard]] std::vector<CharacteristicSummary> summarize(const AnomaliesStudy& study, const OutcomeSet& outcomes);

}  // namespace forkpath::sorting
