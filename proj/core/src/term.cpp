#include "batchline/term.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace batchline {

namespace {

constexpr std::array<std::string_view, 5> kDatatypeNames = {"string", "float", "integer", "date",
                                                            "boolean"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

bool valid_calendar_date(int y, int m, int d) {
    if (y < 1 || m < 1 || m > 12 || d < 1) return false;
    static constexpr std::array<int, 12> days = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int limit = days[static_cast<std::size_t>(m - 1)];
    bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) limit = 29;
    return d <= limit;
}

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string_view to_string(Datatype type) noexcept {
    return kDatatypeNames[static_cast<std::size_t>(type)];
}

std::optional<Datatype> parse_datatype(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kDatatypeNames.size(); ++i)
        if (kDatatypeNames[i] == name) return static_cast<Datatype>(i);
    return std::nullopt;
}

Entity::Entity(std::string id) : id_(std::move(id)) {
    if (id_.empty()) throw InvalidTerm("entity id must not be empty");
    for (char c : id_)
        if (is_space(c)) throw InvalidTerm("entity id contains whitespace: '" + id_ + "'");
}

std::optional<double> parse_float(std::string_view text) noexcept {
    if (text.empty()) return std::nullopt;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    double value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_float(double value) {
    if (value == 0) value = 0; // fold -0.0
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    std::string out(buf.data(), ptr);
    if (out.find_first_of(".e") == std::string::npos) out += ".0";
    return out;
}

std::optional<std::string> parse_date(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        auto ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
        if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
        y = to_int(ys), m = to_int(ms), d = to_int(ds);
    } else if (text.size() == 10 && text[2] == '/' && text[5] == '/') {
        auto ds = text.substr(0, 2), ms = text.substr(3, 2), ys = text.substr(6, 4);
        if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
        y = to_int(ys), m = to_int(ms), d = to_int(ds);
    } else {
        return std::nullopt;
    }
    if (!valid_calendar_date(y, m, d)) return std::nullopt;
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02d", y, m, d);
    return std::string(buf.data());
}

Literal Literal::make(Datatype type, std::string_view lexical) {
    switch (type) {
        case Datatype::String: return Literal(type, std::string(lexical));
        case Datatype::Float: {
            auto v = parse_float(lexical);
            if (!v) throw InvalidTerm("not a finite float: '" + std::string(lexical) + "'");
            return Literal(type, format_float(*v));
        }
        case Datatype::Integer: {
            std::int64_t v = 0;
            const char* first = lexical.data();
            const char* last = first + lexical.size();
            if (first != last && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (lexical.empty() || ec != std::errc{} || ptr != last)
                throw InvalidTerm("not an integer: '" + std::string(lexical) + "'");
            return Literal(type, std::to_string(v));
        }
        case Datatype::Date: {
            auto d = parse_date(lexical);
            if (!d) throw InvalidTerm("not a date: '" + std::string(lexical) + "'");
            return Literal(type, std::move(*d));
        }
        case Datatype::Boolean:
            if (lexical == "true" || lexical == "1") return Literal(type, "true");
            if (lexical == "false" || lexical == "0") return Literal(type, "false");
            throw InvalidTerm("not a boolean: '" + std::string(lexical) + "'");
    }
    throw InvalidTerm("unknown datatype");
}

Literal Literal::of_string(std::string value) { return Literal(Datatype::String, std::move(value)); }

Literal Literal::of_float(double value) {
    if (!std::isfinite(value)) throw InvalidTerm("float literal must be finite");
    return Literal(Datatype::Float, format_float(value));
}

Literal Literal::of_integer(std::int64_t value) { return Literal(Datatype::Integer, std::to_string(value)); }

Literal Literal::of_boolean(bool value) { return Literal(Datatype::Boolean, value ? "true" : "false"); }

std::optional<double> Literal::numeric() const noexcept {
    if (type_ == Datatype::Float || type_ == Datatype::Integer) return parse_float(lexical_);
    return std::nullopt;
}

std::string Term::to_text() const {
    if (is_entity()) return entity().id();
    const auto& l = literal();
    std::string out = "\"";
    out += escape(l.lexical());
    out += "\"^^";
    out += to_string(l.datatype());
    return out;
}

Term Term::parse(std::string_view text) {
    if (text.empty() || text.front() != '"') return Term(Entity(std::string(text)));
    std::string lexical;
    std::size_t i = 1;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c == '"') break;
        if (c == '\\') {
            if (++i >= text.size()) throw InvalidTerm("dangling escape in literal");
            switch (text[i]) {
                case 'n': lexical += '\n'; break;
                case 'r': lexical += '\r'; break;
                case 't': lexical += '\t'; break;
                case '"': lexical += '"'; break;
                case '\\': lexical += '\\'; break;
                default: throw InvalidTerm("unknown escape in literal");
            }
        } else {
            lexical += c;
        }
    }
    if (i >= text.size()) throw InvalidTerm("unterminated literal");
    auto rest = text.substr(i + 1);
    if (rest.substr(0, 2) != "^^") throw InvalidTerm("literal lacks ^^datatype");
    auto type = parse_datatype(rest.substr(2));
    if (!type) throw InvalidTerm("unknown datatype '" + std::string(rest.substr(2)) + "'");
    return Term(Literal::make(*type, lexical));
}

} // namespace batchline
