#pragma once

// Delimited-text datasets, key=value configuration files and CSV emission.

#include "dataset.hpp"
#include "errors.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dcovsel {

/// Shortest decimal text that reads back to the same double (at most 17
/// significant digits). NaN prints as an empty cell.
inline std::string format_real(double v)
{
    if (std::isnan(v)) {
        return "";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return fmt::format("{}", v);
}

/// Split one delimited line. Double-quoted fields may contain the delimiter
/// and "" escapes.
inline std::vector<std::string> split_fields(std::string_view line, char delim)
{
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string quote_field(const std::string& s, char delim = ',')
{
    if (s.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

struct IngestOptions {
    std::string label_column = "label";
    std::string id_column = "id"; ///< used when present; otherwise ids are row numbers
    bool log_transform = false;   ///< natural log of every feature value
    bool require_label = true;
    std::optional<char> delimiter; ///< default: tab for .tsv/.txt, comma otherwise
};

inline char default_delimiter(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    return ext == ".tsv" || ext == ".txt" || ext == ".tab" ? '\t' : ',';
}

/// Parse a header-first table: one row per subject, one column per feature,
/// plus the label column and an optional id column.
inline Dataset parse_dataset(std::istream& in, const IngestOptions& options, char delim,
                             const std::string& source = "<input>")
{
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(source + ": empty file");
    }
    const auto header = split_fields(line, delim);
    std::optional<std::size_t> label_at, id_at;
    std::vector<std::size_t> feature_at;
    Dataset data;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& name = header[c];
        if (name.empty()) {
            throw DataError(fmt::format("{}: header column {} has an empty name", source, c + 1));
        }
        if (!seen.emplace(name, c).second) {
            throw DataError(fmt::format("{}: duplicate column name '{}' (columns {} and {})", source, name,
                                        seen[name] + 1, c + 1));
        }
        if (name == options.label_column) {
            label_at = c;
        } else if (name == options.id_column) {
            id_at = c;
        } else {
            feature_at.push_back(c);
            data.feature_names.push_back(name);
        }
    }
    if (!label_at && options.require_label) {
        throw DataError(fmt::format("{}: label column '{}' not found in header", source, options.label_column));
    }
    if (feature_at.empty()) {
        throw DataError(source + ": no feature columns");
    }

    std::vector<double> values;
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split_fields(line, delim);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("{}: line {} has {} fields, header has {}", source, line_no, fields.size(),
                                        header.size()));
        }
        const std::string id = id_at ? fields[*id_at] : std::to_string(row + 1);
        for (std::size_t k = 0; k < feature_at.size(); ++k) {
            const auto& cell = fields[feature_at[k]];
            const auto v = parse_double(cell);
            if (!v) {
                throw DataError(fmt::format("{}: line {} (subject {}), column '{}': value '{}' is missing or not a "
                                            "finite number",
                                            source, line_no, id, data.feature_names[k], cell));
            }
            double x = *v;
            if (options.log_transform) {
                if (!(x > 0.0)) {
                    throw DataError(fmt::format("{}: line {} (subject {}), column '{}': log transform needs a "
                                                "positive value, got '{}'",
                                                source, line_no, id, data.feature_names[k], cell));
                }
                x = std::log(x);
            }
            values.push_back(x);
        }
        if (label_at) {
            const auto& label = fields[*label_at];
            if (label.empty() || label == "NA" || label == "NaN" || label == "nan") {
                throw DataError(fmt::format("{}: line {} (subject {}), column '{}': missing label", source, line_no,
                                            id, options.label_column));
            }
            data.labels.push_back(label);
        } else {
            data.labels.emplace_back();
        }
        data.subject_ids.push_back(id);
        ++row;
    }
    if (row == 0) {
        throw DataError(source + ": no data rows");
    }
    const auto p = static_cast<Eigen::Index>(feature_at.size());
    data.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(row), p);
    {
        std::unordered_map<std::string, std::size_t> ids;
        for (std::size_t i = 0; i < data.subject_ids.size(); ++i) {
            if (!ids.emplace(data.subject_ids[i], i).second) {
                throw DataError(fmt::format("{}: duplicate subject id '{}'", source, data.subject_ids[i]));
            }
        }
    }
    data.validate();
    return data;
}

inline Dataset ingest(const std::filesystem::path& path, const IngestOptions& options = {})
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open input file '" + path.string() + "'");
    }
    return parse_dataset(in, options, options.delimiter.value_or(default_delimiter(path)), path.string());
}

/// Inverse of parse_dataset: id column first, features, label last; values
/// round-trip exactly.
inline void emit_dataset(std::ostream& out, const Dataset& data, const std::string& label_column = "label",
                         const std::string& id_column = "id", char delim = ',')
{
    out << quote_field(id_column, delim);
    for (const auto& name : data.feature_names) {
        out << delim << quote_field(name, delim);
    }
    out << delim << quote_field(label_column, delim) << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        out << quote_field(data.subject_ids[i], delim);
        for (std::size_t j = 0; j < data.p(); ++j) {
            out << delim << format_real(data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << delim << quote_field(data.labels[i], delim) << '\n';
    }
}

// --- configuration -----------------------------------------------------------

/// Ordered key=value pairs. Blank lines and lines starting with '#' are skipped.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline ConfigEntries parse_config(std::istream& in, const std::string& source = "<config>")
{
    ConfigEntries out;
    std::string line;
    std::size_t line_no = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ArgumentError(fmt::format("{}: line {} is not key=value", source, line_no));
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline ConfigEntries read_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ArgumentError("cannot open config file '" + path.string() + "'");
    }
    return parse_config(in, path.string());
}

inline void write_config(std::ostream& out, const ConfigEntries& entries)
{
    for (const auto& [k, v] : entries) {
        out << k << '=' << v << '\n';
    }
}

// --- tabular output ----------------------------------------------------------

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary)
    {
        if (!out_) {
            throw DataError("cannot write '" + path.string() + "'");
        }
    }

    template <typename... Cells>
    void row(const Cells&... cells)
    {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            out_ << (k ? "," : "") << quote_field(cells[k]);
        }
        out_ << '\n';
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    static std::string cell(const std::string& s) { return quote_field(s); }
    static std::string cell(const char* s) { return quote_field(s); }
    static std::string cell(double v) { return format_real(v); }
    static std::string cell(bool b) { return b ? "true" : "false"; }
    template <typename T>
    static std::string cell(const T& v)
        requires std::is_integral_v<T>
    {
        return std::to_string(v);
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

/// Minimal reader for the CSV files this library writes.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const
    {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) {
                return c;
            }
        }
        throw DataError("column '" + name + "' not found");
    }
};

inline CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("'" + path.string() + "' is empty");
    }
    t.header = split_fields(line, ',');
    while (std::getline(in, line)) {
        if (!line.empty()) {
            t.rows.push_back(split_fields(line, ','));
        }
    }
    return t;
}

} // namespace dcovsel
