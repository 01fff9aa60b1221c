#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace batchline {

enum class Datatype : std::uint8_t { String, Float, Integer, Date, Boolean };

std::string_view to_string(Datatype type) noexcept;
std::optional<Datatype> parse_datatype(std::string_view name) noexcept;

class InvalidTerm : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Opaque identifier of a graph node, e.g. "stups:sample/12". Never empty, no whitespace.
class Entity {
public:
    explicit Entity(std::string id);

    const std::string& id() const noexcept { return id_; }

    friend bool operator==(const Entity&, const Entity&) = default;
    friend auto operator<=>(const Entity&, const Entity&) = default;

private:
    std::string id_;
};

// Typed literal held in canonical lexical form, so two literals are equal iff
// their datatype and canonical value agree ("200", "200.0" and "2e2" as floats
// all canonicalize to "200.0").
class Literal {
public:
    static Literal make(Datatype type, std::string_view lexical);
    static Literal of_string(std::string value);
    static Literal of_float(double value);
    static Literal of_integer(std::int64_t value);
    static Literal of_boolean(bool value);

    Datatype datatype() const noexcept { return type_; }
    const std::string& lexical() const noexcept { return lexical_; }

    // Numeric value for float and integer literals.
    std::optional<double> numeric() const noexcept;

    friend bool operator==(const Literal&, const Literal&) = default;
    friend auto operator<=>(const Literal&, const Literal&) = default;

private:
    Literal(Datatype type, std::string lexical) : type_(type), lexical_(std::move(lexical)) {}

    Datatype type_;
    std::string lexical_;
};

class Term {
public:
    Term(Entity e) : value_(std::move(e)) {}  // NOLINT(google-explicit-constructor)
    Term(Literal l) : value_(std::move(l)) {} // NOLINT(google-explicit-constructor)

    bool is_entity() const noexcept { return std::holds_alternative<Entity>(value_); }
    bool is_literal() const noexcept { return std::holds_alternative<Literal>(value_); }
    const Entity& entity() const { return std::get<Entity>(value_); }
    const Literal& literal() const { return std::get<Literal>(value_); }

    // Canonical text: entities print their id, literals print "lexical"^^datatype
    // with backslash escapes for '"', '\\', newline, carriage return and tab.
    std::string to_text() const;
    static Term parse(std::string_view text);

    friend bool operator==(const Term&, const Term&) = default;
    friend auto operator<=>(const Term&, const Term&) = default;

private:
    std::variant<Entity, Literal> value_;
};

inline Term entity(std::string id) { return Term(Entity(std::move(id))); }

// Shared helpers for lexical forms.
std::optional<double> parse_float(std::string_view text) noexcept;
std::string format_float(double value);
// Accepts YYYY-MM-DD and DD/MM/YYYY; returns YYYY-MM-DD.
std::optional<std::string> parse_date(std::string_view text);

} // namespace batchline
