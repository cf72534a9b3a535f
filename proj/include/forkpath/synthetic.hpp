#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "forkpath/datapanel.hpp"

namespace forkpath::synthetic {

// === macro predictors ===

struct MacroOptions {
    std::size_t months = 600;
    std::int64_t first_month = 195001;  // yyyymm
    std::uint64_t seed = 1;
    /// Premium loading on the standardized shared signal, lagged one month.
    double beta = 0.5;
    double noise_sd = 4.0;
    double persistence = 0.9;
    /// Weight of predictor-specific noise relative to the shared signal.
    double idiosyncratic = 0.1;
    double missing_rate = 0.01;
    std::size_t leading_missing = 12;  // applied to ntis and svar
};

/// Goyal-Welch layout: CRSP_SPvw, Rfree, D12, E12, b/m, ntis, svar, BAA,
/// AAA, corpr, ltr. Every predictor is the shared AR(1) signal plus noise.
[[nodiscard]] datapanel::DataPanel macro_panel(const MacroOptions& opt);

// === stock characteristics ===

struct StockOptions {
    std::size_t stocks = 200;
    std::size_t months = 120;
    std::int64_t first_month = 200001;
    std::size_t characteristics = 82;
    std::uint64_t seed = 1;
    /// Monthly return premium per unit of standardized characteristic.
    double base_signal = 0.0;
    /// Cross-characteristic spread of the premium (drawn N(0, sd)).
    double signal_sd = 0.002;
    /// Extra premium that only large, low-volatility stocks earn: makes
    /// weighting and threshold choices matter.
    double size_tilt = 0.004;
    double ret_sd = 0.08;
    double missing_rate = 0.05;
};

/// Long-format panel with permno, date, ret, mvel1, retvol and c1..cK.
/// Returns of month t+1 load on characteristics observed at t.
[[nodiscard]] datapanel::LongPanel stock_panel(const StockOptions& opt);
[[nodiscard]] std::vector<std::string> characteristic_names(std::size_t count);

// === factor economy ===

struct FactorOptions {
    std::size_t assets = 25;
    std::size_t months = 240;
    std::size_t days_per_month = 21;
    std::int64_t first_month = 199001;
    std::uint64_t seed = 1;
    std::vector<double> premia = {0.5, 0.2, 0.3, 0.2, 0.25};  // monthly factor means, percent
    double factor_sd = 3.0;                                  // monthly, percent
    double idio_sd = 2.0;                                    // monthly, percent
    double rf = 0.2;
};

struct FactorEconomy {
    datapanel::DataPanel factors_monthly;  // MKT SMB HML RMW CMA RF
    datapanel::DataPanel factors_daily;
    datapanel::DataPanel assets_monthly;  // A1..AN, raw returns (RF added)
    datapanel::DataPanel assets_daily;
    Eigen::MatrixXd loadings;  // assets x 5
};

[[nodiscard]] FactorEconomy factor_economy(const FactorOptions& opt);

}  // namespace forkpath::synthetic
