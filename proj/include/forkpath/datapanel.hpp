#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forkpath/io.hpp"

namespace forkpath::datapanel {

enum class Frequency { daily, monthly, quarterly, annual };

[[nodiscard]] int months_per_period(Frequency f);
[[nodiscard]] std::string to_string(Frequency f);
[[nodiscard]] Frequency parse_frequency(std::string_view s);

using Cell = std::optional<double>;
using Series = std::vector<Cell>;

/// Dates are yyyymmdd integers. Month-only inputs get the day set to 0,
/// quarter inputs map to the quarter's last month.
[[nodiscard]] std::int64_t parse_date(std::string_view text);
[[nodiscard]] inline int month_key(std::int64_t date) { return static_cast<int>(date / 100); }

class DataPanel {
public:
    DataPanel() = default;
    DataPanel(Frequency freq, std::vector<std::int64_t> dates, std::vector<std::pair<std::string, Series>> columns);

    [[nodiscard]] Frequency frequency() const { return freq_; }
    [[nodiscard]] const std::vector<std::int64_t>& dates() const { return dates_; }
    [[nodiscard]] std::size_t rows() const { return dates_.size(); }
    [[nodiscard]] std::vector<std::string> column_names() const;
    [[nodiscard]] bool has_column(std::string_view name) const;
    [[nodiscard]] const Series& column(std::string_view name) const;
    [[nodiscard]] std::size_t cell_count() const { return dates_.size() * columns_.size(); }

    [[nodiscard]] DataPanel with_column(std::string name, Series values) const;
    [[nodiscard]] DataPanel select_rows(std::span<const std::size_t> rows) const;

private:
    Frequency freq_ = Frequency::monthly;
    std::vector<std::int64_t> dates_;
    std::vector<std::pair<std::string, Series>> columns_;
};

struct TransformReport {
    std::string transform;
    std::size_t cells_modified = 0;
    std::map<std::string, double> parameters;
};

/// Date column: the first header among date, yyyymm, yyyymmdd, yyyyq, yyyy
/// (any case), otherwise the first column. Frequency is inferred from the
/// date spacing unless given.
[[nodiscard]] DataPanel panel_from_csv(const io::CsvTable& table, std::optional<Frequency> freq = std::nullopt);
[[nodiscard]] DataPanel read_panel_csv(const std::filesystem::path& path,
                                       std::optional<Frequency> freq = std::nullopt);
void write_panel_csv(const DataPanel& panel, std::ostream& out);

/// Throws DataError naming the first absent column.
void require_columns(const DataPanel& panel, std::span<const std::string> names, std::string_view format);

/// Long-format (id, date) panel such as a stock characteristics file.
struct LongPanel {
    std::vector<std::int64_t> ids;
    std::vector<std::int64_t> dates;
    std::vector<std::string> names;
    std::vector<Series> columns;

    [[nodiscard]] std::size_t rows() const { return ids.size(); }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
    [[nodiscard]] const Series& column(std::string_view name) const;
};

[[nodiscard]] LongPanel long_panel_from_csv(const io::CsvTable& table, std::string_view id_column = "permno",
                                            std::string_view date_column = "date");
[[nodiscard]] LongPanel read_long_csv(const std::filesystem::path& path, std::string_view id_column = "permno",
                                      std::string_view date_column = "date");

namespace columns {
/// Macro predictor file (Goyal-Welch layout).
inline const std::vector<std::string> macro = {"D12", "E12", "b/m", "ntis", "svar", "BAA", "AAA", "corpr", "ltr",
                                               "CRSP_SPvw", "Rfree"};
inline const std::vector<std::string> factors = {"MKT", "SMB", "HML", "RMW", "CMA", "RF"};
inline const std::vector<std::string> stock_panel = {"permno", "date", "ret", "mvel1", "retvol"};
}  // namespace columns

// === transforms ===

[[nodiscard]] std::pair<DataPanel, TransformReport> impute_forward(const DataPanel& panel, std::string_view column);
[[nodiscard]] DataPanel drop_missing_rows(const DataPanel& panel, std::span<const std::string> columns);

/// Sequential forward fill of absent cells; throws when the first cell is absent.
[[nodiscard]] Series fill_forward(const Series& s, std::string_view name = "series");

[[nodiscard]] std::vector<double> winsorize(std::span<const double> v, std::size_t k);
/// k = floor(fraction * n).
[[nodiscard]] std::size_t winsor_count(double fraction, std::size_t n);
[[nodiscard]] std::vector<double> difference(std::span<const double> v);
[[nodiscard]] std::vector<double> cumulative_sum(std::span<const double> v);
/// Zero mean, unit divide-by-N standard deviation.
[[nodiscard]] std::vector<double> standardize(std::span<const double> v);
[[nodiscard]] std::vector<double> scale_dependent(std::span<const double> y, int horizon, int months_per_period);

// === Lipschitz harness ===

using VectorMap = std::function<std::vector<double>(std::span<const double>)>;

/// p >= 1, or infinity.
[[nodiscard]] double lp_norm(std::span<const double> v, double p);

/// ||f(d1) - f(d2)||_p / ||d1 - d2||_p; infinity when only the denominator
/// vanishes, 0 when both do.
[[nodiscard]] double lipschitz_ratio(const VectorMap& f, std::span<const double> d1, std::span<const double> d2,
                                     double p);

enum class Transform {
    mean,
    variance,
    max,
    min,
    impute_forward,
    row_removal,
    winsorize,
    standardize,
    difference,
    cumulative_sum
};

struct TransformParams {
    std::size_t k = 0;                  // winsorization count
    std::vector<std::size_t> missing;   // common missing positions for imputation / row removal
};

[[nodiscard]] VectorMap as_map(Transform t, const TransformParams& params = {});
[[nodiscard]] double lipschitz_ratio(Transform t, std::span<const double> d1, std::span<const double> d2, double p,
                                     const TransformParams& params = {});

}  // namespace forkpath::datapanel
