#include "batchline/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace batchline {

namespace {

using nlohmann::json;

// Base letters for U+0100..U+017F; '#' marks the ligatures handled separately.
constexpr std::string_view kLatinExtendedA =
    "AaAaAa" "CcCcCcCc" "DdDd" "EeEeEeEeEe" "GgGgGgGg" "HhHh" "IiIiIiIiIi" "##" "Jj" "Kkk"
    "LlLlLlLlLl" "NnNnNnnNn" "OoOoOo" "##" "RrRrRr" "SsSsSsSs" "TtTtTt" "UuUuUuUuUuUu" "Ww" "YyY"
    "ZzZzZz" "s";
static_assert(kLatinExtendedA.size() == 0x80);

// U+00C0..U+00FF; '#' = multi-letter or dropped.
constexpr std::string_view kLatin1 =
    "AAAAAA#CEEEEIIII" "DNOOOOO#OUUUUY##" "aaaaaa#ceeeeiiii" "dnooooo#ouuuuy#y";
static_assert(kLatin1.size() == 0x40);

std::string_view fold_code_point(char32_t cp) {
    static const std::array<std::string, 0x40> latin1 = [] {
        std::array<std::string, 0x40> out;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (kLatin1[i] != '#') out[i] = std::string(1, kLatin1[i]);
        out[0xC6 - 0xC0] = "AE";
        out[0xDE - 0xC0] = "TH";
        out[0xDF - 0xC0] = "ss";
        out[0xE6 - 0xC0] = "ae";
        out[0xFE - 0xC0] = "th";
        return out;
    }();
    static const std::array<std::string, 0x80> extended = [] {
        std::array<std::string, 0x80> out;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (kLatinExtendedA[i] != '#') out[i] = std::string(1, kLatinExtendedA[i]);
        out[0x132 - 0x100] = "IJ";
        out[0x133 - 0x100] = "ij";
        out[0x152 - 0x100] = "OE";
        out[0x153 - 0x100] = "oe";
        return out;
    }();
    if (cp >= 0xC0 && cp <= 0xFF) return latin1[cp - 0xC0];
    if (cp >= 0x100 && cp <= 0x17F) return extended[cp - 0x100];
    return {};
}

// Decodes one UTF-8 sequence; invalid bytes yield U+FFFD and advance by one.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    for (std::size_t k = 1; k < len; ++k) {
        auto c = static_cast<unsigned char>(s[i + k]);
        if ((c >> 6) != 0x2) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    i += len;
    return cp;
}

std::string fold(std::string_view raw, bool lower) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    auto emit = [&](char c) {
        if (c == ' ') {
            pending_space = !out.empty();
            return;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += lower ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c;
    };
    for (std::size_t i = 0; i < raw.size();) {
        char32_t cp = next_code_point(raw, i);
        if (cp < 0x80) {
            auto c = static_cast<char>(cp);
            emit(std::isspace(static_cast<unsigned char>(c)) || std::iscntrl(static_cast<unsigned char>(c)) ? ' ' : c);
        } else if (cp == 0xA0) {
            emit(' ');
        } else {
            for (char c : fold_code_point(cp)) emit(c);
        }
    }
    return out;
}

std::string cell(const RecordRow& row, const std::string& column) {
    auto it = row.find(column);
    return it == row.end() ? std::string{} : clean_string(it->second);
}

bool applies_to(const Schema& schema, const std::string& cls, const std::string& domain) {
    return domain.empty() || schema.is_subclass_of(cls, domain);
}

} // namespace

std::string normalize_string(std::string_view raw) { return fold(raw, true); }

std::string clean_string(std::string_view raw) { return fold(raw, false); }

Conversion convert_value(std::string_view raw, Datatype type) {
    auto text = clean_string(raw);
    if (text.empty()) return {std::nullopt, "empty value"};
    if (type == Datatype::Float && text.find('.') == std::string::npos) {
        if (auto comma = text.find(','); comma != std::string::npos && text.find(',', comma + 1) == std::string::npos)
            text[comma] = '.';
    }
    try {
        return {Literal::make(type, text), {}};
    } catch (const InvalidTerm& e) {
        return {std::nullopt, "cannot convert '" + text + "' to " + std::string(to_string(type))};
    }
}

std::string instance_id(const Schema& schema, std::string_view class_name, std::string_view raw_id) {
    auto id = normalize_string(raw_id);
    std::replace(id.begin(), id.end(), ' ', '_');
    std::string cls(class_name);
    std::transform(cls.begin(), cls.end(), cls.begin(), [](unsigned char c) { return std::tolower(c); });
    return schema.prefix + cls + "/" + id;
}

MappingError::MappingError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "mapping does not fit the schema";
          for (const auto& p : problems) msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

IngestMapping IngestMapping::from_json(const json& doc) {
    IngestMapping m;
    try {
        m.target_class = doc.at("class").get<std::string>();
        m.id_column = doc.at("idColumn").get<std::string>();
        for (const auto& [column, spec] : doc.at("columns").items()) {
            ColumnBinding b;
            b.property = spec.at("property").get<std::string>();
            if (spec.contains("link") && spec.at("link").get<bool>()) {
                b.kind = ColumnBinding::Kind::Link;
                b.target_class = spec.at("targetClass").get<std::string>();
            } else if (spec.contains("datatype")) {
                auto name = spec.at("datatype").get<std::string>();
                b.datatype = parse_datatype(name);
                if (!b.datatype) throw MappingError({"column '" + column + "': unknown datatype '" + name + "'"});
            }
            b.lowercase = spec.value("lowercase", false);
            m.columns.emplace(column, std::move(b));
        }
    } catch (const json::exception& e) {
        throw MappingError({std::string("malformed mapping document: ") + e.what()});
    }
    return m;
}

json IngestMapping::to_json() const {
    json cols = json::object();
    for (const auto& [column, b] : columns) {
        json spec{{"property", b.property}};
        if (b.kind == ColumnBinding::Kind::Link) {
            spec["link"] = true;
            spec["targetClass"] = b.target_class;
        } else if (b.datatype) {
            spec["datatype"] = std::string(to_string(*b.datatype));
        }
        if (b.lowercase) spec["lowercase"] = true;
        cols[column] = std::move(spec);
    }
    return json{{"class", target_class}, {"idColumn", id_column}, {"columns", std::move(cols)}};
}

IngestStats& IngestStats::operator+=(const IngestStats& other) {
    rows_read += other.rows_read;
    instances_created += other.instances_created;
    triples_added += other.triples_added;
    triples_replaced += other.triples_replaced;
    skipped.insert(skipped.end(), other.skipped.begin(), other.skipped.end());
    return *this;
}

json IngestStats::to_json() const {
    return json{{"rowsRead", rows_read},
                {"instancesCreated", instances_created},
                {"triplesAdded", triples_added},
                {"triplesReplaced", triples_replaced},
                {"valuesSkipped", skipped.size()}};
}

std::string IngestStats::skip_log_jsonl() const {
    std::string out;
    for (const auto& s : skipped) {
        out += json{{"row", s.row}, {"column", s.column}, {"reason", s.reason}}.dump();
        out += '\n';
    }
    return out;
}

std::vector<std::string> validate_mapping(const IngestMapping& m, const Schema& schema) {
    std::vector<std::string> problems;
    if (schema.lookup(m.target_class).kind != NameKind::Class)
        problems.push_back("target class '" + m.target_class + "' is not declared");
    if (m.id_column.empty()) problems.push_back("idColumn must not be empty");
    for (const auto& [column, b] : m.columns) {
        auto found = schema.lookup(b.property);
        auto where = "column '" + column + "': ";
        if (b.kind == ColumnBinding::Kind::Data) {
            if (found.kind != NameKind::DataProperty) {
                problems.push_back(where + "'" + b.property + "' is not a data property");
                continue;
            }
            const auto& def = *found.data_property;
            if (!applies_to(schema, m.target_class, def.domain))
                problems.push_back(where + "domain of '" + b.property + "' is " + def.domain + ", not " +
                                   m.target_class);
            if (b.datatype && *b.datatype != def.range.datatype)
                problems.push_back(where + "datatype " + std::string(to_string(*b.datatype)) +
                                   " does not match range " + std::string(to_string(def.range.datatype)));
        } else {
            if (found.kind != NameKind::ObjectProperty) {
                problems.push_back(where + "'" + b.property + "' is not an object property");
                continue;
            }
            const auto& def = *found.object_property;
            if (!applies_to(schema, m.target_class, def.domain))
                problems.push_back(where + "domain of '" + b.property + "' is " + def.domain + ", not " +
                                   m.target_class);
            if (schema.lookup(b.target_class).kind != NameKind::Class)
                problems.push_back(where + "target class '" + b.target_class + "' is not declared");
            else if (!applies_to(schema, b.target_class, def.range))
                problems.push_back(where + "range of '" + b.property + "' is " + def.range + ", not " +
                                   b.target_class);
        }
    }
    return problems;
}

IngestStats populate(Graph& graph, const Schema& schema, const IngestMapping& mapping,
                     std::span<const RecordRow> rows) {
    if (auto problems = validate_mapping(mapping, schema); !problems.empty())
        throw MappingError(std::move(problems));

    IngestStats stats;
    if (rows.empty()) return stats;

    const TermId type_id = graph.intern(entity(std::string(kRdfType)));
    const TermId class_id = graph.intern(entity(schema.iri(mapping.target_class)));

    struct Bound {
        const std::string* column;
        const ColumnBinding* binding;
        TermId property;
        const DataPropertyDef* data = nullptr;
    };
    std::vector<Bound> bound;
    for (const auto& [column, b] : mapping.columns) {
        Bound entry{&column, &b, graph.intern(entity(schema.iri(b.property)))};
        if (b.kind == ColumnBinding::Kind::Data) entry.data = schema.lookup(b.property).data_property;
        bound.push_back(entry);
    }

    std::size_t row_no = 0;
    auto added = [&stats](bool inserted) {
        if (inserted) ++stats.triples_added;
    };
    for (const auto& row : rows) {
        ++row_no;
        ++stats.rows_read;
        auto id_value = cell(row, mapping.id_column);
        if (id_value.empty()) {
            stats.skipped.push_back({row_no, mapping.id_column, "missing instance id"});
            continue;
        }
        const TermId subject = graph.intern(entity(instance_id(schema, mapping.target_class, id_value)));
        bool created = graph.insert(IdTriple{subject, type_id, class_id});
        if (created) ++stats.instances_created;
        added(created);

        for (const auto& b : bound) {
            auto value = cell(row, *b.column);
            if (value.empty()) continue;

            if (b.binding->kind == ColumnBinding::Kind::Link) {
                auto target = graph.intern(entity(instance_id(schema, b.binding->target_class, value)));
                added(graph.insert(IdTriple{subject, b.property, target}));
                continue;
            }

            const auto& range = b.data->range;
            auto conv = convert_value(value, range.datatype);
            if (!conv) {
                stats.skipped.push_back({row_no, *b.column, conv.error});
                continue;
            }
            Literal literal = *conv.literal;
            if (range.datatype == Datatype::String && (b.binding->lowercase || range.is_enumeration()))
                literal = Literal::of_string(normalize_string(literal.lexical()));
            if (!range.admits(literal.lexical())) {
                stats.skipped.push_back(
                    {row_no, *b.column, "value '" + literal.lexical() + "' outside the enumeration of " + b.data->name});
                continue;
            }

            const TermId object = graph.intern(literal);
            std::vector<IdTriple> previous;
            graph.for_each_match(IdPattern{subject, b.property, std::nullopt}, [&](IdTriple t) {
                if (t.o != object) previous.push_back(t);
            });
            for (auto t : previous) {
                stats.skipped.push_back({row_no, *b.column,
                                         "conflicting value " + graph.term(t.o).to_text() + " replaced by " +
                                             Term(literal).to_text()});
                if (graph.retract(t)) ++stats.triples_replaced;
            }
            added(graph.insert(IdTriple{subject, b.property, object}));
        }
    }
    return stats;
}

std::vector<RecordRow> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false, field_started = false, any = false;
    std::size_t line = 1;
    char c;
    auto end_field = [&] {
        fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(fields.size() == 1 && fields[0].empty())) records.push_back(std::move(fields));
        fields.clear();
        any = false;
    };
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started || !field.empty())
                    throw FormatError("csv line " + std::to_string(line) + ": stray quote inside unquoted field");
                in_quotes = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r':
                if (in.peek() != '\n') field += c;
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default: field += c;
        }
    }
    if (in_quotes) throw FormatError("csv: unterminated quoted field");
    if (any) end_record();

    std::vector<RecordRow> rows;
    if (records.empty()) return rows;
    const auto& header = records.front();
    std::set<std::string> seen;
    for (const auto& name : header)
        if (!seen.insert(name).second) throw FormatError("csv: duplicate column '" + name + "'");
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != header.size())
            throw FormatError("csv record " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(records[r].size()));
        RecordRow row;
        for (std::size_t i = 0; i < header.size(); ++i) row.emplace(header[i], std::move(records[r][i]));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RecordRow> read_jsonl(std::istream& in) {
    std::vector<RecordRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError("jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) throw FormatError("jsonl line " + std::to_string(line_no) + ": expected an object");
        RecordRow row;
        for (const auto& [key, value] : obj.items()) {
            if (value.is_null()) continue;
            row.emplace(key, value.is_string() ? value.get<std::string>() : value.dump());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RecordRow> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    auto ext = path.extension().string();
    if (ext == ".jsonl" || ext == ".ndjson") return read_jsonl(in);
    return read_csv(in);
}

LoadedDataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
    LoadedDataset out;
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw FormatError("cannot open " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    if (path.extension() == ".triples") {
        out.id = path.stem().string();
        out.graph = Graph::parse(slurp(path));
        return out;
    }

    json manifest;
    try {
        manifest = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw FormatError("dataset manifest " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    out.id = manifest.value("id", path.stem().string());
    if (!manifest.contains("sources") || !manifest["sources"].is_array())
        throw FormatError("dataset manifest " + path.string() + " lacks a 'sources' array");
    for (const auto& source : manifest["sources"]) {
        if (source.contains("graph")) {
            auto g = Graph::parse(slurp(base / source["graph"].get<std::string>()));
            g.for_each([&](IdTriple t, Provenance) {
                if (out.graph.insert(g.decode(t))) ++out.stats.triples_added;
            });
            continue;
        }
        auto mapping_doc = json::parse(slurp(base / source.at("mapping").get<std::string>()));
        auto mapping = IngestMapping::from_json(mapping_doc);
        auto rows = read_rows(base / source.at("file").get<std::string>());
        out.stats += populate(out.graph, schema, mapping, rows);
    }
    return out;
}

} // namespace batchline
