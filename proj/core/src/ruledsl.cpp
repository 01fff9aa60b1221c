#include "batchline/ruledsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace batchline {

namespace {

enum class Tok { Ident, String, Number, LParen, RParen, Comma, Semicolon, Define, And, Cmp, End };

std::string_view describe(Tok t) {
    switch (t) {
        case Tok::Ident: return "identifier";
        case Tok::String: return "string";
        case Tok::Number: return "number";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::Comma: return "','";
        case Tok::Semicolon: return "';'";
        case Tok::Define: return "':='";
        case Tok::And: return "'AND'";
        case Tok::Cmp: return "comparison operator";
        case Tok::End: return "end of input";
    }
    return "token";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0;
    CompareOp op = CompareOp::Eq;
    SourceSpan span;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_blank();
            Token t;
            t.span = {line_, col_};
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    advance();
                t.text = std::string(src_.substr(start, pos_ - start));
                t.kind = t.text == "AND" ? Tok::And : Tok::Ident;
            } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
                lex_number(t);
            } else if (c == '"') {
                lex_string(t);
            } else {
                advance();
                switch (c) {
                    case '(': t.kind = Tok::LParen; break;
                    case ')': t.kind = Tok::RParen; break;
                    case ',': t.kind = Tok::Comma; break;
                    case ';': t.kind = Tok::Semicolon; break;
                    case ':':
                        if (!eat('=')) fail(t.span, "expected '=' after ':'");
                        t.kind = Tok::Define;
                        break;
                    case '=':
                        if (!eat('=')) fail(t.span, "single '=' is not an operator; use '=='");
                        t = cmp(t, CompareOp::Eq, "==");
                        break;
                    case '!':
                        if (!eat('=')) fail(t.span, "expected '=' after '!'");
                        t = cmp(t, CompareOp::Ne, "!=");
                        break;
                    case '<': t = eat('=') ? cmp(t, CompareOp::Le, "<=") : cmp(t, CompareOp::Lt, "<"); break;
                    case '>': t = eat('=') ? cmp(t, CompareOp::Ge, ">=") : cmp(t, CompareOp::Gt, ">"); break;
                    default: {
                        std::string shown = std::isprint(static_cast<unsigned char>(c))
                                                ? std::string("'") + c + "'"
                                                : "byte 0x" + hex(static_cast<unsigned char>(c));
                        fail(t.span, "unexpected character " + shown);
                    }
                }
            }
            out.push_back(std::move(t));
        }
    }

private:
    static std::string hex(unsigned char c) {
        static constexpr char kHex[] = "0123456789abcdef";
        return {kHex[c >> 4], kHex[c & 0xf]};
    }

    static Token cmp(Token t, CompareOp op, const char* text) {
        t.kind = Tok::Cmp;
        t.op = op;
        t.text = text;
        return t;
    }

    [[noreturn]] static void fail(SourceSpan at, std::string msg) {
        throw RuleParseError(RuleErrorCode::Lexical, at, std::move(msg));
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    bool eat(char c) {
        if (pos_ < src_.size() && src_[pos_] == c) {
            advance();
            return true;
        }
        return false;
    }

    void skip_blank() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    void lex_number(Token& t) {
        std::size_t start = pos_;
        eat('-');
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                advance();
                ++n;
            }
            return n;
        };
        std::size_t n = digits();
        if (eat('.')) n += digits();
        if (n == 0) fail(t.span, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            advance();
            if (!eat('+')) eat('-');
            if (digits() == 0) fail(t.span, "malformed number exponent");
        }
        auto text = src_.substr(start, pos_ - start);
        double value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
            fail(t.span, "number out of range");
        t.kind = Tok::Number;
        t.number = value;
        t.text = std::string(text);
    }

    void lex_string(Token& t) {
        advance();
        std::string value;
        for (;;) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') fail(t.span, "unterminated string");
            char c = src_[pos_];
            advance();
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ >= src_.size()) fail(t.span, "unterminated string");
                char e = src_[pos_];
                advance();
                switch (e) {
                    case '"': value += '"'; break;
                    case '\\': value += '\\'; break;
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    default: fail(t.span, std::string("unknown escape '\\") + e + "'");
                }
            } else {
                value += c;
            }
        }
        t.kind = Tok::String;
        t.text = std::move(value);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

bool is_var_name(std::string_view s) { return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_'); }

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    bool at_end() const { return peek().kind == Tok::End; }
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }

    Token expect(Tok kind) {
        if (peek().kind != kind) syntax({std::string(describe(kind))});
        return toks_[pos_++];
    }

    bool accept(Tok kind) {
        if (peek().kind != kind) return false;
        ++pos_;
        return true;
    }

    [[noreturn]] void syntax(std::vector<std::string> expected, std::string detail = {}) const {
        const auto& t = peek();
        std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        std::string msg = detail.empty() ? "unexpected " + found : detail;
        if (!expected.empty()) {
            msg += "; expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? " or " : "") + expected[i];
        }
        throw RuleParseError(RuleErrorCode::Syntax, t.span, std::move(msg), std::move(expected));
    }

    std::string variable() {
        if (peek().kind != Tok::Ident || !is_var_name(peek().text))
            syntax({"variable"}, peek().kind == Tok::Ident ? "'" + peek().text + "' is not a variable (variables start lowercase)" : "");
        return toks_[pos_++].text;
    }

    RuleAst rule() {
        RuleAst r;
        r.span = peek().span;
        r.name = expect(Tok::Ident).text;
        expect(Tok::LParen);
        r.head.push_back(variable());
        while (accept(Tok::Comma)) r.head.push_back(variable());
        expect(Tok::RParen);
        expect(Tok::Define);
        r.body.push_back(atom());
        while (accept(Tok::And)) r.body.push_back(atom());
        check_safety(r);
        return r;
    }

private:
    Atom atom() {
        SourceSpan at = peek().span;
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::LParen) {
            std::string name = toks_[pos_].text;
            pos_ += 2;
            if (name == "reldiff") {
                RelDiffAtom a;
                a.span = at;
                a.left = variable();
                expect(Tok::Comma);
                a.right = variable();
                expect(Tok::Comma);
                if (peek().kind != Tok::Number) syntax({"number"});
                a.tolerance = toks_[pos_++].number;
                if (!(a.tolerance > 0 && a.tolerance < 1))
                    throw RuleParseError(RuleErrorCode::Syntax, at, "reldiff tolerance must lie strictly between 0 and 1");
                expect(Tok::RParen);
                return a;
            }
            std::vector<std::string> args{variable()};
            while (accept(Tok::Comma)) args.push_back(variable());
            expect(Tok::RParen);
            bool upper = std::isupper(static_cast<unsigned char>(name[0]));
            if (args.size() == 1) {
                if (!upper)
                    throw RuleParseError(RuleErrorCode::Syntax, at,
                                         "class atom '" + name + "' must start with an uppercase letter");
                return ClassAtom{name, args[0], at};
            }
            if (args.size() == 2) {
                if (upper)
                    throw RuleParseError(RuleErrorCode::Syntax, at,
                                         "property atom '" + name + "' must start with a lowercase letter");
                return PropertyAtom{name, args[0], args[1], at};
            }
            throw RuleParseError(RuleErrorCode::Syntax, at,
                                 "predicate '" + name + "' takes one (class) or two (property) arguments");
        }
        CompareAtom c;
        c.span = at;
        c.left = operand();
        if (peek().kind != Tok::Cmp) syntax({"comparison operator", "'('"});
        c.op = toks_[pos_++].op;
        c.right = operand();
        return c;
    }

    Operand operand() {
        const auto& t = peek();
        if (t.kind == Tok::String) return StringConst{toks_[pos_++].text};
        if (t.kind == Tok::Number) return NumberConst{toks_[pos_++].number};
        if (t.kind == Tok::Ident) return Variable{variable()};
        syntax({"variable", "string", "number"});
    }

    static void check_safety(const RuleAst& r) {
        std::set<std::string> bound;
        for (const auto& a : r.body) {
            if (auto* c = std::get_if<ClassAtom>(&a)) bound.insert(c->var);
            if (auto* p = std::get_if<PropertyAtom>(&a)) {
                bound.insert(p->subject);
                bound.insert(p->object);
            }
        }
        std::vector<std::string> unsafe;
        auto need = [&](const std::string& v) {
            if (!bound.count(v) && std::find(unsafe.begin(), unsafe.end(), v) == unsafe.end()) unsafe.push_back(v);
        };
        for (const auto& a : r.body) {
            if (auto* c = std::get_if<CompareAtom>(&a)) {
                if (auto* v = std::get_if<Variable>(&c->left)) need(v->name);
                if (auto* v = std::get_if<Variable>(&c->right)) need(v->name);
            }
            if (auto* d = std::get_if<RelDiffAtom>(&a)) {
                need(d->left);
                need(d->right);
            }
        }
        for (const auto& h : r.head) need(h);
        if (unsafe.empty()) return;
        std::string msg = "rule '" + r.name + "' is unsafe: variable";
        msg += unsafe.size() > 1 ? "s " : " ";
        for (std::size_t i = 0; i < unsafe.size(); ++i) msg += (i ? ", " : "") + unsafe[i];
        msg += " not bound by any class or property atom";
        throw RuleParseError(RuleErrorCode::Safety, r.span, std::move(msg), {}, std::move(unsafe));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string print_operand(const Operand& o) {
    if (auto* v = std::get_if<Variable>(&o)) return v->name;
    if (auto* n = std::get_if<NumberConst>(&o)) return format_number(n->value);
    std::string out = "\"";
    for (char c : std::get<StringConst>(o).value) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

} // namespace

std::string_view to_string(CompareOp op) noexcept {
    switch (op) {
        case CompareOp::Eq: return "==";
        case CompareOp::Ne: return "!=";
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
    }
    return "?";
}

std::string_view to_string(RuleErrorCode code) noexcept {
    switch (code) {
        case RuleErrorCode::Lexical: return "lexical";
        case RuleErrorCode::Syntax: return "syntax";
        case RuleErrorCode::Safety: return "safety";
        case RuleErrorCode::DuplicateRule: return "duplicate-rule";
    }
    return "unknown";
}

std::string_view to_string(RuleDiagnosticCode code) noexcept {
    switch (code) {
        case RuleDiagnosticCode::UnknownPredicate: return "unknown-predicate";
        case RuleDiagnosticCode::KindMismatch: return "kind-mismatch";
        case RuleDiagnosticCode::DatatypeMismatch: return "datatype-mismatch";
        case RuleDiagnosticCode::TypeConflict: return "type-conflict";
    }
    return "unknown";
}

SourceSpan span_of(const Atom& atom) {
    return std::visit([](const auto& a) { return a.span; }, atom);
}

RuleParseError::RuleParseError(RuleErrorCode code, SourceSpan where, std::string message,
                               std::vector<std::string> expected, std::vector<std::string> names)
    : std::runtime_error(std::string(to_string(code)) + " error at " + std::to_string(where.line) + ":" +
                         std::to_string(where.column) + ": " + message),
      code_(code),
      where_(where),
      expected_(std::move(expected)),
      names_(std::move(names)) {}

void RuleSet::add(RuleAst rule) {
    if (find(rule.name))
        throw RuleParseError(RuleErrorCode::DuplicateRule, rule.span, "rule '" + rule.name + "' is defined twice", {},
                             {rule.name});
    rules_.push_back(std::move(rule));
}

const RuleAst* RuleSet::find(std::string_view name) const {
    for (const auto& r : rules_)
        if (r.name == name) return &r;
    return nullptr;
}

RuleAst parse_rule(std::string_view text) {
    Parser p(Lexer(text).run());
    RuleAst r = p.rule();
    p.accept(Tok::Semicolon);
    if (!p.at_end()) p.syntax({"end of input"});
    return r;
}

RuleSet parse_ruleset(std::string_view text) {
    Parser p(Lexer(text).run());
    RuleSet set;
    do {
        set.add(p.rule());
        p.expect(Tok::Semicolon);
    } while (!p.at_end());
    return set;
}

RuleSet load_ruleset_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open rule file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ruleset(buf.str());
}

std::string print_rule(const RuleAst& r) {
    std::string out = r.name + "(";
    for (std::size_t i = 0; i < r.head.size(); ++i) out += (i ? ", " : "") + r.head[i];
    out += ") := ";
    for (std::size_t i = 0; i < r.body.size(); ++i) {
        if (i) out += " AND ";
        std::visit(
            [&out](const auto& a) {
                using A = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<A, ClassAtom>) {
                    out += a.class_name + "(" + a.var + ")";
                } else if constexpr (std::is_same_v<A, PropertyAtom>) {
                    out += a.property + "(" + a.subject + ", " + a.object + ")";
                } else if constexpr (std::is_same_v<A, CompareAtom>) {
                    out += print_operand(a.left) + " " + std::string(to_string(a.op)) + " " + print_operand(a.right);
                } else {
                    out += "reldiff(" + a.left + ", " + a.right + ", " + format_number(a.tolerance) + ")";
                }
            },
            r.body[i]);
    }
    return out;
}

std::string print_ruleset(const RuleSet& rules) {
    std::string out;
    for (const auto& r : rules) out += print_rule(r) + ";\n";
    return out;
}

std::string RuleDiagnostic::describe() const {
    std::string out = std::string(to_string(code)) + " at " + std::to_string(span.line) + ":" +
                      std::to_string(span.column) + ": " + message;
    if (!hint.empty()) out += " (" + hint + ")";
    return out;
}

namespace {

// Static type of a variable or constant in a rule body.
struct ValueType {
    enum class Kind { Entity, Literal, NumericConst, StringConst } kind;
    Datatype datatype = Datatype::String;

    bool numeric() const {
        return kind == Kind::NumericConst ||
               (kind == Kind::Literal && (datatype == Datatype::Float || datatype == Datatype::Integer));
    }
    std::string describe() const {
        switch (kind) {
            case Kind::Entity: return "entity";
            case Kind::NumericConst: return "number";
            case Kind::StringConst: return "string";
            case Kind::Literal: return std::string(to_string(datatype));
        }
        return "?";
    }
    friend bool operator==(const ValueType&, const ValueType&) = default;
};

} // namespace

std::vector<RuleDiagnostic> validate_rule(const RuleAst& rule, const Schema& schema) {
    std::vector<RuleDiagnostic> diags;
    std::map<std::string, ValueType> types;

    auto unknown = [&](const std::string& name, const char* kind, SourceSpan at) {
        diags.push_back({RuleDiagnosticCode::UnknownPredicate, name,
                         std::string(kind) + " '" + name + "' is not declared in the schema",
                         "revise the TBox: declare '" + name + "' in the schema and redo the modelling step, or "
                         "correct the rule",
                         at});
    };
    auto assign = [&](const std::string& var, ValueType t, SourceSpan at) {
        auto [it, inserted] = types.emplace(var, t);
        if (!inserted && !(it->second == t))
            diags.push_back({RuleDiagnosticCode::TypeConflict, var,
                             "variable '" + var + "' is used both as " + it->second.describe() + " and as " +
                                 t.describe(),
                             "", at});
    };

    for (const auto& atom : rule.body) {
        if (auto* c = std::get_if<ClassAtom>(&atom)) {
            auto found = schema.lookup(c->class_name);
            if (found.kind == NameKind::Unknown) unknown(c->class_name, "class", c->span);
            else if (found.kind != NameKind::Class)
                diags.push_back({RuleDiagnosticCode::KindMismatch, c->class_name,
                                 "'" + c->class_name + "' is a " + std::string(to_string(found.kind)) +
                                     ", not a class",
                                 "", c->span});
            assign(c->var, {ValueType::Kind::Entity}, c->span);
        } else if (auto* p = std::get_if<PropertyAtom>(&atom)) {
            auto found = schema.lookup(p->property);
            assign(p->subject, {ValueType::Kind::Entity}, p->span);
            if (found.kind == NameKind::Unknown) {
                unknown(p->property, "property", p->span);
            } else if (found.kind == NameKind::Class) {
                diags.push_back({RuleDiagnosticCode::KindMismatch, p->property,
                                 "'" + p->property + "' is a class, not a property", "", p->span});
            } else if (found.kind == NameKind::ObjectProperty) {
                assign(p->object, {ValueType::Kind::Entity}, p->span);
            } else {
                assign(p->object, {ValueType::Kind::Literal, found.data_property->range.datatype}, p->span);
            }
        }
    }

    auto type_of = [&](const Operand& o) -> std::optional<ValueType> {
        if (auto* v = std::get_if<Variable>(&o)) {
            auto it = types.find(v->name);
            if (it == types.end()) return std::nullopt;
            return it->second;
        }
        if (std::holds_alternative<NumberConst>(o)) return ValueType{ValueType::Kind::NumericConst};
        return ValueType{ValueType::Kind::StringConst};
    };
    auto mismatch = [&](const std::string& what, SourceSpan at, std::string msg) {
        diags.push_back({RuleDiagnosticCode::DatatypeMismatch, what, std::move(msg), "", at});
    };

    for (const auto& atom : rule.body) {
        if (auto* c = std::get_if<CompareAtom>(&atom)) {
            auto lt = type_of(c->left), rt = type_of(c->right);
            if (!lt || !rt) continue;
            const bool ordering = c->op != CompareOp::Eq && c->op != CompareOp::Ne;
            auto text = print_operand(c->left) + " " + std::string(to_string(c->op)) + " " + print_operand(c->right);
            using K = ValueType::Kind;
            bool ok = false;
            if (lt->numeric() || rt->numeric()) {
                ok = lt->numeric() && rt->numeric();
            } else if (lt->kind == K::Entity || rt->kind == K::Entity) {
                ok = lt->kind == K::Entity && rt->kind == K::Entity && !ordering;
            } else {
                auto textual = [](const ValueType& t) {
                    return t.kind == K::StringConst ||
                           (t.kind == K::Literal && (t.datatype == Datatype::String || t.datatype == Datatype::Date));
                };
                auto datatype = [](const ValueType& t) {
                    return t.kind == K::StringConst ? std::optional<Datatype>{} : std::optional{t.datatype};
                };
                auto ld = datatype(*lt), rd = datatype(*rt);
                if (ld && rd) ok = *ld == *rd && (*ld != Datatype::Boolean || !ordering);
                else if (ld || rd) {
                    auto d = ld ? *ld : *rd;
                    ok = textual(ValueType{K::Literal, d}) ||
                         (d == Datatype::Boolean && !ordering);
                } else {
                    ok = textual(*lt) && textual(*rt);
                }
            }
            if (!ok)
                mismatch(text, c->span,
                         "cannot compare " + lt->describe() + " with " + rt->describe() + " in '" + text + "'");
        } else if (auto* d = std::get_if<RelDiffAtom>(&atom)) {
            for (const auto& v : {d->left, d->right}) {
                auto it = types.find(v);
                if (it != types.end() && !it->second.numeric())
                    mismatch(v, d->span,
                             "reldiff requires float-valued bindings but '" + v + "' is " + it->second.describe());
            }
        }
    }
    return diags;
}

} // namespace batchline
