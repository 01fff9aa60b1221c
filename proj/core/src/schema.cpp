#include "batchline/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace batchline {

namespace {

using nlohmann::json;

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

bool upper_initial(std::string_view s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])); }
bool lower_initial(std::string_view s) { return !s.empty() && std::islower(static_cast<unsigned char>(s[0])); }

// Collects structural problems while walking the document instead of stopping at the first.
class DocumentReader {
public:
    std::vector<SchemaDiagnostic> diagnostics;

    std::optional<std::string> string_field(const json& node, const char* key, const std::string& where,
                                            bool required) {
        auto it = node.find(key);
        if (it == node.end()) {
            if (required) structure(where + "/" + key, std::string("missing required key '") + key + "'");
            return std::nullopt;
        }
        if (!it->is_string()) {
            structure(where + "/" + key, std::string("'") + key + "' must be a string");
            return std::nullopt;
        }
        return it->get<std::string>();
    }

    bool bool_field(const json& node, const char* key, const std::string& where) {
        auto it = node.find(key);
        if (it == node.end()) return false;
        if (!it->is_boolean()) {
            structure(where + "/" + key, std::string("'") + key + "' must be a boolean");
            return false;
        }
        return it->get<bool>();
    }

    void structure(std::string location, std::string message) {
        diagnostics.push_back({SchemaCode::Structure, "", std::move(message), std::move(location)});
    }
};

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

template <typename Def>
void insert_unique(std::map<std::string, Def>& map, Def def, const std::string& where,
                   std::vector<SchemaDiagnostic>& diags) {
    auto name = def.name;
    if (!map.emplace(name, std::move(def)).second)
        diags.push_back({SchemaCode::DuplicateName, name, "'" + name + "' is declared twice", where});
}

void check_cycles(const std::map<std::string, std::optional<std::string>>& parents, SchemaCode code,
                  const char* what, std::vector<SchemaDiagnostic>& diags) {
    std::set<std::string> reported;
    for (const auto& [start, _] : parents) {
        std::set<std::string> seen{start};
        std::optional<std::string> cur = parents.at(start);
        while (cur) {
            auto it = parents.find(*cur);
            if (it == parents.end()) break;
            if (*cur == start) {
                if (reported.insert(start).second)
                    diags.push_back({code, start, std::string(what) + " cycle through '" + start + "'"});
                break;
            }
            if (!seen.insert(*cur).second) break;
            cur = it->second;
        }
    }
}

} // namespace

std::string_view to_string(SchemaCode code) noexcept {
    switch (code) {
        case SchemaCode::Syntax: return "syntax";
        case SchemaCode::Structure: return "structure";
        case SchemaCode::InvalidName: return "invalid-name";
        case SchemaCode::DuplicateName: return "duplicate-name";
        case SchemaCode::NameClash: return "name-clash";
        case SchemaCode::MissingComment: return "missing-comment";
        case SchemaCode::DanglingReference: return "dangling-reference";
        case SchemaCode::AsymmetricInverse: return "asymmetric-inverse";
        case SchemaCode::InverseSignature: return "inverse-signature";
        case SchemaCode::SubclassCycle: return "subclass-cycle";
        case SchemaCode::SubpropertyCycle: return "subproperty-cycle";
        case SchemaCode::BadEnumeration: return "bad-enumeration";
    }
    return "unknown";
}

std::string_view to_string(NameKind kind) noexcept {
    switch (kind) {
        case NameKind::Class: return "class";
        case NameKind::DataProperty: return "data-property";
        case NameKind::ObjectProperty: return "object-property";
        case NameKind::Unknown: return "unknown";
    }
    return "unknown";
}

std::string SchemaDiagnostic::describe() const {
    std::ostringstream out;
    out << to_string(code);
    if (line) out << " at " << line << ":" << column;
    else if (!location.empty()) out << " at " << location;
    out << ": " << message;
    return out.str();
}

SchemaError::SchemaError(std::vector<SchemaDiagnostic> diagnostics)
    : std::runtime_error([&] {
          std::string msg = "invalid schema";
          for (const auto& d : diagnostics) msg += "\n  " + d.describe();
          return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

bool DataRange::admits(std::string_view value) const {
    if (!is_enumeration()) return true;
    return std::find(one_of.begin(), one_of.end(), value) != one_of.end();
}

NameLookup Schema::lookup(std::string_view name) const {
    NameLookup out;
    std::string key(name);
    if (auto it = classes.find(key); it != classes.end()) {
        out.kind = NameKind::Class;
        out.class_def = &it->second;
    } else if (auto dit = data_properties.find(key); dit != data_properties.end()) {
        out.kind = NameKind::DataProperty;
        out.data_property = &dit->second;
    } else if (auto oit = object_properties.find(key); oit != object_properties.end()) {
        out.kind = NameKind::ObjectProperty;
        out.object_property = &oit->second;
    }
    return out;
}

std::optional<std::string> Schema::local_name(std::string_view id) const {
    if (id.size() <= prefix.size() || id.substr(0, prefix.size()) != prefix) return std::nullopt;
    return std::string(id.substr(prefix.size()));
}

bool Schema::is_subclass_of(std::string_view sub, std::string_view super) const {
    std::optional<std::string> cur{std::string(sub)};
    for (std::size_t steps = 0; cur && steps <= classes.size(); ++steps) {
        if (*cur == super) return true;
        auto it = classes.find(*cur);
        if (it == classes.end()) return false;
        cur = it->second.parent;
    }
    return false;
}

std::vector<SchemaDiagnostic> validate_schema(const Schema& s) {
    std::vector<SchemaDiagnostic> diags;
    auto dangling = [&](const std::string& owner, const std::string& ref, const char* role) {
        diags.push_back({SchemaCode::DanglingReference, ref,
                         "'" + owner + "' " + role + " names undeclared '" + ref + "'"});
    };

    for (const auto& [name, c] : s.classes) {
        if (!is_identifier(name) || !upper_initial(name))
            diags.push_back({SchemaCode::InvalidName, name, "class names must be identifiers starting uppercase"});
        if (c.comment.empty())
            diags.push_back({SchemaCode::MissingComment, name, "class '" + name + "' has no comment"});
        if (c.parent && !s.classes.count(*c.parent)) dangling(name, *c.parent, "parent");
    }
    for (const auto& [name, d] : s.data_properties) {
        if (!is_identifier(name) || !lower_initial(name))
            diags.push_back({SchemaCode::InvalidName, name, "property names must be identifiers starting lowercase"});
        if (s.classes.count(name) || s.object_properties.count(name))
            diags.push_back({SchemaCode::NameClash, name, "'" + name + "' is declared in more than one namespace"});
        if (!s.classes.count(d.domain)) dangling(name, d.domain, "domain");
        if (d.range.is_enumeration()) {
            std::set<std::string> distinct(d.range.one_of.begin(), d.range.one_of.end());
            if (distinct.size() < 2 || distinct.size() != d.range.one_of.size() ||
                d.range.datatype != Datatype::String)
                diags.push_back({SchemaCode::BadEnumeration, name,
                                 "enumeration of '" + name + "' must list at least two distinct strings"});
        }
    }
    for (const auto& [name, p] : s.object_properties) {
        if (!is_identifier(name) || !lower_initial(name))
            diags.push_back({SchemaCode::InvalidName, name, "property names must be identifiers starting lowercase"});
        if (s.classes.count(name))
            diags.push_back({SchemaCode::NameClash, name, "'" + name + "' is declared in more than one namespace"});
        if (!p.domain.empty() && !s.classes.count(p.domain)) dangling(name, p.domain, "domain");
        if (!p.range.empty() && !s.classes.count(p.range)) dangling(name, p.range, "range");
        if (p.parent && !s.object_properties.count(*p.parent)) dangling(name, *p.parent, "parent");
        if (p.inverse) {
            auto it = s.object_properties.find(*p.inverse);
            if (it == s.object_properties.end()) {
                dangling(name, *p.inverse, "inverse");
            } else {
                const auto& q = it->second;
                if (q.inverse != name)
                    diags.push_back({SchemaCode::AsymmetricInverse, name,
                                     "'" + name + "' declares inverse '" + q.name + "' but '" + q.name +
                                         "' does not declare '" + name + "' as its inverse"});
                if (p.domain != q.range || p.range != q.domain)
                    diags.push_back({SchemaCode::InverseSignature, name,
                                     "domain/range of '" + name + "' must mirror those of '" + q.name + "'"});
            }
        }
    }

    std::map<std::string, std::optional<std::string>> class_parents, property_parents;
    for (const auto& [name, c] : s.classes) class_parents[name] = c.parent;
    for (const auto& [name, p] : s.object_properties) property_parents[name] = p.parent;
    check_cycles(class_parents, SchemaCode::SubclassCycle, "subclass", diags);
    check_cycles(property_parents, SchemaCode::SubpropertyCycle, "sub-property", diags);
    return diags;
}

Schema load_schema(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        auto [line, column] = line_column(document, e.byte == 0 ? 0 : e.byte - 1);
        SchemaDiagnostic d{SchemaCode::Syntax, "", e.what(), "", line, column};
        throw SchemaError({std::move(d)});
    }

    DocumentReader reader;
    Schema schema;
    if (!doc.is_object()) {
        reader.structure("", "schema document must be a JSON object");
        throw SchemaError(std::move(reader.diagnostics));
    }
    for (const auto& [key, _] : doc.items()) {
        if (key.empty() || key[0] == '$') continue;
        if (key != "classes" && key != "dataProperties" && key != "objectProperties" && key != "prefix")
            reader.structure("/" + key, "unknown top-level key '" + key + "'");
    }
    if (auto prefix = reader.string_field(doc, "prefix", "", false)) schema.prefix = *prefix;

    auto section = [&](const char* key) -> const json* {
        auto it = doc.find(key);
        if (it == doc.end()) return nullptr;
        if (!it->is_array()) {
            reader.structure(std::string("/") + key, std::string("'") + key + "' must be an array");
            return nullptr;
        }
        return &*it;
    };

    if (const json* classes = section("classes")) {
        for (std::size_t i = 0; i < classes->size(); ++i) {
            const auto& node = (*classes)[i];
            auto where = "/classes/" + std::to_string(i);
            if (!node.is_object()) {
                reader.structure(where, "class entry must be an object");
                continue;
            }
            auto name = reader.string_field(node, "name", where, true);
            auto comment = reader.string_field(node, "comment", where, true);
            auto parent = reader.string_field(node, "parent", where, false);
            if (!name) continue;
            insert_unique(schema.classes, ClassDef{*name, parent, comment.value_or("")}, where,
                          reader.diagnostics);
        }
    }
    if (const json* props = section("dataProperties")) {
        for (std::size_t i = 0; i < props->size(); ++i) {
            const auto& node = (*props)[i];
            auto where = "/dataProperties/" + std::to_string(i);
            if (!node.is_object()) {
                reader.structure(where, "data property entry must be an object");
                continue;
            }
            auto name = reader.string_field(node, "name", where, true);
            auto domain = reader.string_field(node, "domain", where, true);
            DataPropertyDef def;
            auto range = node.find("range");
            if (range == node.end()) {
                reader.structure(where + "/range", "missing required key 'range'");
            } else if (range->is_string()) {
                auto type = parse_datatype(range->get<std::string>());
                if (!type) reader.structure(where + "/range", "unknown datatype '" + range->get<std::string>() + "'");
                else def.range.datatype = *type;
            } else if (range->is_object() && range->contains("oneOf") && (*range)["oneOf"].is_array()) {
                for (const auto& v : (*range)["oneOf"]) {
                    if (!v.is_string()) {
                        reader.structure(where + "/range/oneOf", "enumeration values must be strings");
                        continue;
                    }
                    def.range.one_of.push_back(v.get<std::string>());
                }
                if (def.range.one_of.empty())
                    reader.diagnostics.push_back({SchemaCode::BadEnumeration, name.value_or(""),
                                                  "empty enumeration", where + "/range"});
            } else {
                reader.structure(where + "/range", "range must be a datatype name or {\"oneOf\": [...]}");
            }
            def.functional = reader.bool_field(node, "functional", where);
            def.comment = reader.string_field(node, "comment", where, false).value_or("");
            if (!name) continue;
            def.name = *name;
            def.domain = domain.value_or("");
            insert_unique(schema.data_properties, std::move(def), where, reader.diagnostics);
        }
    }
    if (const json* props = section("objectProperties")) {
        for (std::size_t i = 0; i < props->size(); ++i) {
            const auto& node = (*props)[i];
            auto where = "/objectProperties/" + std::to_string(i);
            if (!node.is_object()) {
                reader.structure(where, "object property entry must be an object");
                continue;
            }
            ObjectPropertyDef def;
            auto name = reader.string_field(node, "name", where, true);
            def.domain = reader.string_field(node, "domain", where, false).value_or("");
            def.range = reader.string_field(node, "range", where, false).value_or("");
            def.inverse = reader.string_field(node, "inverse", where, false);
            def.parent = reader.string_field(node, "parent", where, false);
            def.comment = reader.string_field(node, "comment", where, false).value_or("");
            if (auto traits = node.find("traits"); traits != node.end()) {
                if (!traits->is_array()) {
                    reader.structure(where + "/traits", "'traits' must be an array");
                } else {
                    for (const auto& t : *traits) {
                        if (t == "transitive") def.transitive = true;
                        else if (t == "symmetric") def.symmetric = true;
                        else reader.structure(where + "/traits", "unknown trait " + t.dump());
                    }
                }
            }
            if (!name) continue;
            def.name = *name;
            insert_unique(schema.object_properties, std::move(def), where, reader.diagnostics);
        }
    }

    auto diags = std::move(reader.diagnostics);
    auto semantic = validate_schema(schema);
    diags.insert(diags.end(), semantic.begin(), semantic.end());
    if (!diags.empty()) throw SchemaError(std::move(diags));
    return schema;
}

Schema load_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open schema file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_schema(buf.str());
}

nlohmann::json to_json(const Schema& s) {
    json doc = json::object();
    if (s.prefix != kDefaultPrefix) doc["prefix"] = s.prefix;
    json classes = json::array();
    for (const auto& [name, c] : s.classes) {
        json node{{"name", c.name}};
        if (c.parent) node["parent"] = *c.parent;
        node["comment"] = c.comment;
        classes.push_back(std::move(node));
    }
    json data = json::array();
    for (const auto& [name, d] : s.data_properties) {
        json node{{"name", d.name}, {"domain", d.domain}};
        if (d.range.is_enumeration()) node["range"] = json{{"oneOf", d.range.one_of}};
        else node["range"] = std::string(to_string(d.range.datatype));
        if (d.functional) node["functional"] = true;
        if (!d.comment.empty()) node["comment"] = d.comment;
        data.push_back(std::move(node));
    }
    json objects = json::array();
    for (const auto& [name, p] : s.object_properties) {
        json node{{"name", p.name}};
        if (!p.domain.empty()) node["domain"] = p.domain;
        if (!p.range.empty()) node["range"] = p.range;
        if (p.inverse) node["inverse"] = *p.inverse;
        json traits = json::array();
        if (p.transitive) traits.push_back("transitive");
        if (p.symmetric) traits.push_back("symmetric");
        if (!traits.empty()) node["traits"] = std::move(traits);
        if (p.parent) node["parent"] = *p.parent;
        if (!p.comment.empty()) node["comment"] = p.comment;
        objects.push_back(std::move(node));
    }
    doc["classes"] = std::move(classes);
    doc["dataProperties"] = std::move(data);
    doc["objectProperties"] = std::move(objects);
    return doc;
}

std::string serialize_schema(const Schema& schema) { return to_json(schema).dump(2) + "\n"; }

} // namespace batchline
