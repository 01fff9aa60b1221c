#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "batchline/graph.hpp"
#include "batchline/schema.hpp"
#include "batchline/term.hpp"

namespace batchline {

// Column name -> raw cell text. Absent and empty cells both mean "no value".
using RecordRow = std::map<std::string, std::string, std::less<>>;

struct ColumnBinding {
    enum class Kind { Data, Link };

    Kind kind = Kind::Data;
    std::string property;
    // Data columns only; defaults to the property's range datatype.
    std::optional<Datatype> datatype;
    // Link columns only: class of the instance the cell value identifies.
    std::string target_class;
    // Lower-case string values after folding (always on for enumerations).
    bool lowercase = false;
};

struct IngestMapping {
    std::string target_class;
    std::string id_column;
    // Applied in column-name order.
    std::map<std::string, ColumnBinding> columns;

    static IngestMapping from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

struct SkipRecord {
    std::size_t row = 0; // 1-based data row
    std::string column;
    std::string reason;
};

struct IngestStats {
    std::size_t rows_read = 0;
    std::size_t instances_created = 0;
    std::size_t triples_added = 0;
    // Earlier values retracted by last-write-wins merges.
    std::size_t triples_replaced = 0;
    std::vector<SkipRecord> skipped;

    IngestStats& operator+=(const IngestStats& other);
    nlohmann::json to_json() const;
    // One {"row","column","reason"} object per line.
    std::string skip_log_jsonl() const;
};

class MappingError : public std::runtime_error {
public:
    explicit MappingError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Trim, fold accents to ASCII, drop other non-ASCII and control characters,
// collapse inner whitespace runs, lower-case. Idempotent.
std::string normalize_string(std::string_view raw);
// Same as normalize_string but keeps letter case.
std::string clean_string(std::string_view raw);

struct Conversion {
    std::optional<Literal> literal;
    std::string error;

    explicit operator bool() const noexcept { return literal.has_value(); }
};

// Floats accept ',' or '.' as decimal separator; dates accept YYYY-MM-DD and
// DD/MM/YYYY. Strings are cleaned with clean_string.
Conversion convert_value(std::string_view raw, Datatype type);

// "<prefix><lower-case class>/<normalized id>", whitespace replaced by '_'.
std::string instance_id(const Schema& schema, std::string_view class_name, std::string_view raw_id);

std::vector<std::string> validate_mapping(const IngestMapping& mapping, const Schema& schema);

// Instantiates one entity per row. Throws MappingError before touching the
// graph when the mapping does not fit the schema; per-cell failures are
// reported in the returned stats.
IngestStats populate(Graph& graph, const Schema& schema, const IngestMapping& mapping,
                     std::span<const RecordRow> rows);

// RFC-4180 CSV with a header row.
std::vector<RecordRow> read_csv(std::istream& in);
// One JSON object per line; scalar values are stringified.
std::vector<RecordRow> read_jsonl(std::istream& in);
std::vector<RecordRow> read_rows(const std::filesystem::path& path);

// Dataset manifest:
//   {"id": "...", "sources": [{"file": "x.csv", "mapping": "x.mapping.json"},
//                             {"graph": "y.triples"}]}
// Relative paths resolve against the manifest's directory. A path ending in
// ".triples" is read directly as a canonical graph file instead.
struct LoadedDataset {
    std::string id;
    Graph graph;
    IngestStats stats;
};

LoadedDataset load_dataset(const std::filesystem::path& path, const Schema& schema);

} // namespace batchline
