#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forkpath::io {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const;
};

[[nodiscard]] CsvTable parse_csv(std::string_view text);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);
[[nodiscard]] std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Empty or NA (any case) is absent; anything else must parse fully.
[[nodiscard]] std::optional<double> parse_cell(std::string_view cell);

/// Shortest round-trip decimal; NaN prints as NA.
[[nodiscard]] std::string format_number(double x);
[[nodiscard]] std::string csv_escape(std::string_view s);

[[nodiscard]] std::string sha256_hex(std::string_view data);

}  // namespace forkpath::io
