#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eduvid {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_number(double value);

/// Strict decimal parse of the whole (trimmed) field. Accepts "nan"/"inf".
std::optional<double> parse_number(std::string_view text);
std::optional<std::uint64_t> parse_unsigned(std::string_view text);

std::string_view trim(std::string_view text) noexcept;

namespace csv {

using Record = std::vector<std::string>;

/// RFC-4180 parse. Accepts LF or CRLF, strips a leading UTF-8 BOM and skips
/// blank lines. Throws Error(SchemaError) on an unterminated quoted field.
std::vector<Record> parse(std::string_view text);

/// Header row plus data rows, with column lookup by name.
class Table {
public:
    static Table parse(std::string_view text);

    const Record& header() const noexcept { return header_; }
    const std::vector<Record>& rows() const noexcept { return rows_; }

    std::optional<std::size_t> find(std::string_view column) const;
    /// Column index or Error(SchemaError) naming the column.
    std::size_t require(std::string_view column) const;

    /// Cell text or "" when the row is short.
    std::string_view cell(std::size_t row, std::size_t column) const;

private:
    Record header_;
    std::vector<Record> rows_;
};

std::string quote_field(std::string_view field);
void append_row(std::string& out, std::span<const std::string> fields);

}  // namespace csv

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace eduvid
