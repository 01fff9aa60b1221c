#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "batchline/graph.hpp"
#include "batchline/term.hpp"

namespace batchline {

struct ClassDef {
    std::string name;
    std::optional<std::string> parent;
    std::string comment;

    friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

// Either a plain datatype or an enumeration of string values.
struct DataRange {
    Datatype datatype = Datatype::String;
    std::vector<std::string> one_of;

    bool is_enumeration() const noexcept { return !one_of.empty(); }
    bool admits(std::string_view value) const;

    friend bool operator==(const DataRange&, const DataRange&) = default;
};

struct DataPropertyDef {
    std::string name;
    std::string domain;
    DataRange range;
    // Single-valued: at most one distinct value per subject.
    bool functional = false;
    std::string comment;

    friend bool operator==(const DataPropertyDef&, const DataPropertyDef&) = default;
};

struct ObjectPropertyDef {
    std::string name;
    // Empty when the schema leaves the property unrestricted on that side.
    std::string domain;
    std::string range;
    std::optional<std::string> inverse;
    bool transitive = false;
    bool symmetric = false;
    std::optional<std::string> parent;
    std::string comment;

    friend bool operator==(const ObjectPropertyDef&, const ObjectPropertyDef&) = default;
};

enum class SchemaCode {
    Syntax,
    Structure,
    InvalidName,
    DuplicateName,
    NameClash,
    MissingComment,
    DanglingReference,
    AsymmetricInverse,
    InverseSignature,
    SubclassCycle,
    SubpropertyCycle,
    BadEnumeration,
};

std::string_view to_string(SchemaCode code) noexcept;

struct SchemaDiagnostic {
    SchemaCode code;
    std::string name;
    std::string message;
    // JSON pointer of the offending node, when known.
    std::string location;
    std::size_t line = 0;
    std::size_t column = 0;

    std::string describe() const;
};

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(std::vector<SchemaDiagnostic> diagnostics);
    const std::vector<SchemaDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<SchemaDiagnostic> diagnostics_;
};

enum class NameKind { Class, DataProperty, ObjectProperty, Unknown };

std::string_view to_string(NameKind kind) noexcept;

struct NameLookup {
    NameKind kind = NameKind::Unknown;
    const ClassDef* class_def = nullptr;
    const DataPropertyDef* data_property = nullptr;
    const ObjectPropertyDef* object_property = nullptr;
};

// TBox: classes, data properties and object properties in three disjoint
// namespaces. Treated as immutable once loaded.
struct Schema {
    std::string prefix = std::string(kDefaultPrefix);
    std::map<std::string, ClassDef> classes;
    std::map<std::string, DataPropertyDef> data_properties;
    std::map<std::string, ObjectPropertyDef> object_properties;

    NameLookup lookup(std::string_view name) const;

    // Entity id used in the graph for a schema name.
    std::string iri(std::string_view name) const { return prefix + std::string(name); }
    // Inverse of iri(); nullopt when the id is outside this schema's namespace.
    std::optional<std::string> local_name(std::string_view id) const;

    // Reflexive, follows parent chains.
    bool is_subclass_of(std::string_view sub, std::string_view super) const;

    friend bool operator==(const Schema&, const Schema&) = default;
};

// Parses a schema document and validates it. Throws SchemaError listing every
// diagnostic when anything is wrong.
Schema load_schema(std::string_view document);
Schema load_schema_file(const std::filesystem::path& path);

std::vector<SchemaDiagnostic> validate_schema(const Schema& schema);

nlohmann::json to_json(const Schema& schema);
std::string serialize_schema(const Schema& schema);

} // namespace batchline
