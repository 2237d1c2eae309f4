#include <cmath>

#include "eduvid/csv.hpp"
#include "eduvid/error.hpp"
#include "eduvid/ingest.hpp"

namespace eduvid::ingest {

std::string normalize_header(std::string_view header) {
    std::string out;
    bool pending_sep = false;
    for (char c : header) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (!alnum) {
            pending_sep = true;
            continue;
        }
        if (pending_sep && !out.empty()) out.push_back('_');
        pending_sep = false;
        out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
    return out;
}

namespace {

std::optional<std::size_t> find_normalized(const csv::Table& table, std::string_view name) {
    for (std::size_t i = 0; i < table.header().size(); ++i)
        if (normalize_header(table.header()[i]) == name) return i;
    return std::nullopt;
}

std::optional<std::uint64_t> optional_count(std::string_view cell, std::string_view column, std::size_t row) {
    if (trim(cell).empty()) return std::nullopt;
    auto v = parse_unsigned(cell);
    if (!v)
        throw Error(ErrorKind::ValueError, "'" + std::string(cell) + "' is not a non-negative integer",
                    {.field = std::string(column), .row = row});
    return v;
}

}  // namespace

std::vector<EngagementRecord> import_engagement(std::string_view csv_bytes) {
    auto table = csv::Table::parse(csv_bytes);
    auto id_col = find_normalized(table, "video_id");
    auto apv_col = find_normalized(table, "average_percentage_viewed");
    if (!id_col) throw Error(ErrorKind::SchemaError, "missing column 'video_id'", {.field = "video_id"});
    if (!apv_col)
        throw Error(ErrorKind::SchemaError, "missing column 'average_percentage_viewed'",
                    {.field = "average_percentage_viewed"});
    auto views_col = find_normalized(table, "views");
    auto likes_col = find_normalized(table, "likes");
    auto dislikes_col = find_normalized(table, "dislikes");

    std::vector<EngagementRecord> out;
    out.reserve(table.rows().size());
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        const std::size_t row = r + 1;
        EngagementRecord rec;
        rec.video_id = std::string(trim(table.cell(r, *id_col)));
        if (rec.video_id.empty())
            throw Error(ErrorKind::ValueError, "empty video_id", {.field = "video_id", .row = row});

        std::string_view apv_text = trim(table.cell(r, *apv_col));
        if (apv_text.ends_with('%')) apv_text.remove_suffix(1);
        auto apv = parse_number(apv_text);
        if (!apv || !std::isfinite(*apv))
            throw Error(ErrorKind::ValueError, "'" + std::string(apv_text) + "' is not a number",
                        {.video_id = rec.video_id, .field = "average_percentage_viewed", .row = row});
        if (*apv < 0.0 || *apv > 100.0)
            throw Error(ErrorKind::ValueError, format_number(*apv) + " outside [0, 100]",
                        {.video_id = rec.video_id, .field = "average_percentage_viewed", .row = row});
        rec.average_percentage_viewed = *apv;

        if (views_col) rec.views = optional_count(table.cell(r, *views_col), "views", row);
        if (likes_col) rec.likes = optional_count(table.cell(r, *likes_col), "likes", row);
        if (dislikes_col) rec.dislikes = optional_count(table.cell(r, *dislikes_col), "dislikes", row);
        out.push_back(std::move(rec));
    }
    return out;
}

std::string serialize_engagement(std::span<const EngagementRecord> records) {
    auto opt = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    std::string out;
    std::vector<std::string> row{"video_id", "average_percentage_viewed", "views", "likes", "dislikes"};
    csv::append_row(out, row);
    for (const auto& r : records) {
        row = {r.video_id, format_number(r.average_percentage_viewed), opt(r.views), opt(r.likes),
               opt(r.dislikes)};
        csv::append_row(out, row);
    }
    return out;
}

}  // namespace eduvid::ingest
