#include "forkpath/datapanel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "forkpath/error.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::datapanel {

int months_per_period(Frequency f) {
    switch (f) {
        case Frequency::monthly: return 1;
        case Frequency::quarterly: return 3;
        case Frequency::annual: return 12;
        case Frequency::daily: return 0;
    }
    return 1;
}

std::string to_string(Frequency f) {
    switch (f) {
        case Frequency::daily: return "daily";
        case Frequency::monthly: return "monthly";
        case Frequency::quarterly: return "quarterly";
        case Frequency::annual: return "annual";
    }
    return "monthly";
}

Frequency parse_frequency(std::string_view s) {
    if (s == "daily") return Frequency::daily;
    if (s == "monthly") return Frequency::monthly;
    if (s == "quarterly") return Frequency::quarterly;
    if (s == "annual") return Frequency::annual;
    throw ValidationError("unknown frequency '" + std::string(s) + "'");
}

namespace {

long to_long(std::string_view s, std::string_view whole) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad date '" + std::string(whole) + "'");
    return v;
}

std::int64_t checked(long y, long m, long d, std::string_view whole) {
    if (y < 1000 || y > 9999 || m < 1 || m > 12 || d < 0 || d > 31) throw DataError("bad date '" + std::string(whole) + "'");
    return static_cast<std::int64_t>(y) * 10000 + m * 100 + d;
}

int months_of(std::int64_t date) {
    const auto y = date / 10000;
    const auto m = (date / 100) % 100;
    return static_cast<int>(y * 12 + m);
}

}  // namespace

std::int64_t parse_date(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) throw DataError("empty date");
    const auto sep = s.find_first_of("-/");
    if (sep != std::string_view::npos) {
        const auto sep2 = s.find_first_of("-/", sep + 1);
        const long y = to_long(s.substr(0, sep), text);
        if (sep2 == std::string_view::npos) return checked(y, to_long(s.substr(sep + 1), text), 0, text);
        return checked(y, to_long(s.substr(sep + 1, sep2 - sep - 1), text), to_long(s.substr(sep2 + 1), text), text);
    }
    const long v = to_long(s, text);
    switch (s.size()) {
        case 4: return checked(v, 12, 0, text);
        case 5: {
            const long q = v % 10;
            if (q < 1 || q > 4) throw DataError("bad quarter in '" + std::string(text) + "'");
            return checked(v / 10, q * 3, 0, text);
        }
        case 6: return checked(v / 100, v % 100, 0, text);
        case 8: return checked(v / 10000, (v / 100) % 100, v % 100, text);
        default: throw DataError("unrecognised date format '" + std::string(text) + "'");
    }
}

DataPanel::DataPanel(Frequency freq, std::vector<std::int64_t> dates,
                     std::vector<std::pair<std::string, Series>> columns)
    : freq_(freq), dates_(std::move(dates)), columns_(std::move(columns)) {
    for (std::size_t i = 1; i < dates_.size(); ++i)
        if (dates_[i] <= dates_[i - 1])
            throw DataError("dates not strictly increasing at row " + std::to_string(i) + " (" +
                            std::to_string(dates_[i]) + ")");
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].second.size() != dates_.size())
            throw DataError("column '" + columns_[c].first + "' has " + std::to_string(columns_[c].second.size()) +
                            " rows, index has " + std::to_string(dates_.size()));
        for (std::size_t d = 0; d < c; ++d)
            if (columns_[d].first == columns_[c].first) throw DataError("duplicate column '" + columns_[c].first + "'");
    }
}

std::vector<std::string> DataPanel::column_names() const {
    std::vector<std::string> out;
    for (const auto& [n, s] : columns_) out.push_back(n);
    return out;
}

bool DataPanel::has_column(std::string_view name) const {
    return std::any_of(columns_.begin(), columns_.end(), [&](const auto& c) { return c.first == name; });
}

const Series& DataPanel::column(std::string_view name) const {
    for (const auto& [n, s] : columns_)
        if (n == name) return s;
    throw DataError("missing column '" + std::string(name) + "'");
}

DataPanel DataPanel::with_column(std::string name, Series values) const {
    auto cols = columns_;
    auto it = std::find_if(cols.begin(), cols.end(), [&](const auto& c) { return c.first == name; });
    if (it != cols.end())
        it->second = std::move(values);
    else
        cols.emplace_back(std::move(name), std::move(values));
    return DataPanel(freq_, dates_, std::move(cols));
}

DataPanel DataPanel::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::int64_t> d;
    d.reserve(rows.size());
    for (auto r : rows) d.push_back(dates_.at(r));
    auto cols = columns_;
    for (auto& [n, s] : cols) {
        Series t;
        t.reserve(rows.size());
        for (auto r : rows) t.push_back(s[r]);
        s = std::move(t);
    }
    return DataPanel(freq_, std::move(d), std::move(cols));
}

namespace {

std::string lower(std::string_view s) {
    std::string o(s);
    for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return o;
}

Frequency infer_frequency(const std::vector<std::int64_t>& dates) {
    if (dates.size() < 2) return Frequency::monthly;
    std::vector<int> gaps;
    for (std::size_t i = 1; i < dates.size(); ++i) gaps.push_back(months_of(dates[i]) - months_of(dates[i - 1]));
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
    const int g = gaps[gaps.size() / 2];
    if (g <= 0) return Frequency::daily;
    if (g < 3) return Frequency::monthly;
    if (g < 12) return Frequency::quarterly;
    return Frequency::annual;
}

}  // namespace

DataPanel panel_from_csv(const io::CsvTable& table, std::optional<Frequency> freq) {
    std::size_t date_col = 0;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        const auto h = lower(table.header[i]);
        if (h == "date" || h == "yyyymm" || h == "yyyymmdd" || h == "yyyyq" || h == "yyyy") {
            date_col = i;
            break;
        }
    }
    std::vector<std::size_t> order(table.rows.size());
    std::vector<std::int64_t> raw(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        try {
            raw[r] = parse_date(table.rows[r][date_col]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(r + 2) + ": " + e.what());
        }
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return raw[a] < raw[b]; });
    std::vector<std::int64_t> dates;
    for (auto r : order) dates.push_back(raw[r]);
    std::vector<std::pair<std::string, Series>> cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == date_col) continue;
        Series s;
        s.reserve(order.size());
        for (auto r : order) {
            try {
                s.push_back(io::parse_cell(table.rows[r][c]));
            } catch (const DataError& e) {
                throw DataError("row " + std::to_string(r + 2) + ", column '" + table.header[c] + "': " + e.what());
            }
        }
        cols.emplace_back(table.header[c], std::move(s));
    }
    const Frequency f = freq ? *freq : infer_frequency(dates);
    return DataPanel(f, std::move(dates), std::move(cols));
}

DataPanel read_panel_csv(const std::filesystem::path& path, std::optional<Frequency> freq) {
    try {
        return panel_from_csv(io::read_csv(path), freq);
    } catch (const DataError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path.string(), 0) == 0) throw;
        throw DataError(path.string() + ": " + msg);
    }
}

void write_panel_csv(const DataPanel& panel, std::ostream& out) {
    const auto names = panel.column_names();
    out << "date";
    for (const auto& n : names) out << ',' << io::csv_escape(n);
    out << '\n';
    std::vector<const Series*> cols;
    for (const auto& n : names) cols.push_back(&panel.column(n));
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        const auto d = panel.dates()[r];
        if (d % 100 == 0)
            out << d / 100;
        else
            out << d;
        for (auto* s : cols) out << ',' << ((*s)[r] ? io::format_number(*(*s)[r]) : std::string());
        out << '\n';
    }
}

void require_columns(const DataPanel& panel, std::span<const std::string> names, std::string_view format) {
    for (const auto& n : names)
        if (!panel.has_column(n))
            throw DataError(std::string(format) + " data is missing required column '" + n + "'");
}

std::optional<std::size_t> LongPanel::find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

const Series& LongPanel::column(std::string_view name) const {
    auto i = find(name);
    if (!i) throw DataError("missing column '" + std::string(name) + "'");
    return columns[*i];
}

LongPanel long_panel_from_csv(const io::CsvTable& table, std::string_view id_column, std::string_view date_column) {
    const auto id_col = table.column(id_column);
    const auto date_col = table.column(date_column);
    if (!id_col) throw DataError("long panel is missing required column '" + std::string(id_column) + "'");
    if (!date_col) throw DataError("long panel is missing required column '" + std::string(date_column) + "'");
    LongPanel p;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != *id_col && c != *date_col) p.names.push_back(table.header[c]);
    p.columns.resize(p.names.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        try {
            const auto id = io::parse_cell(row[*id_col]);
            if (!id) throw DataError("absent identifier");
            p.ids.push_back(static_cast<std::int64_t>(*id));
            p.dates.push_back(parse_date(row[*date_col]));
            std::size_t k = 0;
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c == *id_col || c == *date_col) continue;
                p.columns[k++].push_back(io::parse_cell(row[c]));
            }
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(r + 2) + ": " + e.what());
        }
    }
    return p;
}

LongPanel read_long_csv(const std::filesystem::path& path, std::string_view id_column, std::string_view date_column) {
    try {
        return long_panel_from_csv(io::read_csv(path), id_column, date_column);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// === transforms ===

Series fill_forward(const Series& s, std::string_view name) {
    if (s.empty()) return s;
    if (!s.front()) throw DataError("cannot forward-impute column '" + std::string(name) + "': first value is absent");
    Series out = s;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!out[i]) out[i] = out[i - 1];
    return out;
}

std::pair<DataPanel, TransformReport> impute_forward(const DataPanel& panel, std::string_view column) {
    const auto& s = panel.column(column);
    auto filled = fill_forward(s, column);
    TransformReport rep{"impute_forward", 0, {}};
    for (std::size_t i = 0; i < s.size(); ++i) rep.cells_modified += !s[i].has_value();
    return {panel.with_column(std::string(column), std::move(filled)), rep};
}

DataPanel drop_missing_rows(const DataPanel& panel, std::span<const std::string> columns) {
    std::vector<const Series*> cols;
    for (const auto& c : columns) cols.push_back(&panel.column(c));
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < panel.rows(); ++r)
        if (std::all_of(cols.begin(), cols.end(), [&](const Series* s) { return (*s)[r].has_value(); }))
            keep.push_back(r);
    return panel.select_rows(keep);
}

std::vector<double> winsorize(std::span<const double> v, std::size_t k) {
    if (2 * k >= v.size() && !(k == 0 && v.empty()))
        throw DomainError("winsorization needs 2k < N (k=" + std::to_string(k) + ", N=" + std::to_string(v.size()) + ")");
    std::vector<double> out(v.begin(), v.end());
    if (k == 0) return out;
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    const double lo = v[order[k]];
    const double hi = v[order[v.size() - 1 - k]];
    for (std::size_t i = 0; i < k; ++i) out[order[i]] = lo;
    for (std::size_t i = v.size() - k; i < v.size(); ++i) out[order[i]] = hi;
    return out;
}

std::size_t winsor_count(double fraction, std::size_t n) {
    if (!(fraction >= 0.0 && fraction < 0.5)) throw DomainError("winsorization fraction must lie in [0, 0.5)");
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::vector<double> difference(std::span<const double> v) {
    if (v.size() < 2) throw DomainError("differencing needs at least 2 values");
    std::vector<double> out(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) out[i] = v[i + 1] - v[i];
    return out;
}

std::vector<double> cumulative_sum(std::span<const double> v) {
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = s += v[i];
    return out;
}

std::vector<double> standardize(std::span<const double> v) {
    if (v.empty()) throw DomainError("cannot standardize an empty vector");
    const double m = stats::mean(v);
    const double sd = std::sqrt(stats::variance_pop(v));
    if (!(sd > 0.0) || sd <= 1e-300) throw DomainError("cannot standardize a zero-variance vector");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - m) / sd;
    return out;
}

std::vector<double> scale_dependent(std::span<const double> y, int horizon, int months_per_period) {
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    if (static_cast<long>(horizon) * months_per_period <= 0) throw DomainError("horizon * months_per_period must be positive");
    const double div = std::sqrt(static_cast<double>(horizon) * months_per_period);
    std::vector<double> out(y.begin(), y.end());
    for (auto& x : out) x /= div;
    return out;
}

// === Lipschitz harness ===

double lp_norm(std::span<const double> v, double p) {
    if (std::isinf(p) && p > 0) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    if (!(p >= 1.0)) throw DomainError("norm order must be >= 1 or infinity");
    double s = 0.0;
    if (p == 1.0) {
        for (double x : v) s += std::abs(x);
        return s;
    }
    if (p == 2.0) {
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }
    for (double x : v) s += std::pow(std::abs(x), p);
    return std::pow(s, 1.0 / p);
}

double lipschitz_ratio(const VectorMap& f, std::span<const double> d1, std::span<const double> d2, double p) {
    if (d1.size() != d2.size()) throw DomainError("lipschitz_ratio needs equal-length inputs");
    std::vector<double> din(d1.size());
    for (std::size_t i = 0; i < d1.size(); ++i) din[i] = d1[i] - d2[i];
    const double den = lp_norm(din, p);
    const auto f1 = f(d1);
    const auto f2 = f(d2);
    if (f1.size() != f2.size()) throw DomainError("transform produced outputs of different length");
    std::vector<double> dout(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) dout[i] = f1[i] - f2[i];
    const double num = lp_norm(dout, p);
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

VectorMap as_map(Transform t, const TransformParams& params) {
    switch (t) {
        case Transform::mean: return [](std::span<const double> v) { return std::vector<double>{stats::mean(v)}; };
        case Transform::variance:
            return [](std::span<const double> v) { return std::vector<double>{stats::variance_pop(v)}; };
        case Transform::max:
            return [](std::span<const double> v) { return std::vector<double>{*std::max_element(v.begin(), v.end())}; };
        case Transform::min:
            return [](std::span<const double> v) { return std::vector<double>{*std::min_element(v.begin(), v.end())}; };
        case Transform::impute_forward:
            return [miss = params.missing](std::span<const double> v) {
                Series s(v.begin(), v.end());
                for (auto i : miss) s.at(i).reset();
                const auto f = fill_forward(s);
                std::vector<double> out;
                for (const auto& c : f) out.push_back(*c);
                return out;
            };
        case Transform::row_removal:
            return [miss = params.missing](std::span<const double> v) {
                std::vector<double> out;
                for (std::size_t i = 0; i < v.size(); ++i)
                    if (std::find(miss.begin(), miss.end(), i) == miss.end()) out.push_back(v[i]);
                return out;
            };
        case Transform::winsorize:
            return [k = params.k](std::span<const double> v) { return winsorize(v, k); };
        case Transform::standardize: return [](std::span<const double> v) { return standardize(v); };
        case Transform::difference: return [](std::span<const double> v) { return difference(v); };
        case Transform::cumulative_sum: return [](std::span<const double> v) { return cumulative_sum(v); };
    }
    throw DomainError("unknown transform");
}

double lipschitz_ratio(Transform t, std::span<const double> d1, std::span<const double> d2, double p,
                       const TransformParams& params) {
    return lipschitz_ratio(as_map(t, params), d1, d2, p);
}

}  // namespace forkpath::datapanel
