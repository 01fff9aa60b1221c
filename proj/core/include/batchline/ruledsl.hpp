#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "batchline/schema.hpp"

// Rule language. A rule is a head predicate over variables defined by a
// conjunction of atoms:
//
//   match(s1, s2) := Sample(s1) AND Sample(s2) AND drugType(s1, dt1)
//                    AND drugType(s2, dt2) AND dt1 == dt2 AND s1 != s2;
//
// Uppercase-initial predicates of arity one are class atoms, lowercase-initial
// predicates of arity two are property atoms. Comparisons use == != < <= > >=
// over variables, "strings" and numbers; reldiff(a, b, t) holds when
// |a - b| / max(a, b) <= t. '#' starts a line comment.

namespace batchline {

struct SourceSpan {
    std::size_t line = 1;
    std::size_t column = 1;
};

struct Variable {
    std::string name;
    friend bool operator==(const Variable&, const Variable&) = default;
};
struct StringConst {
    std::string value;
    friend bool operator==(const StringConst&, const StringConst&) = default;
};
struct NumberConst {
    double value = 0;
    friend bool operator==(const NumberConst&, const NumberConst&) = default;
};
using Operand = std::variant<Variable, StringConst, NumberConst>;

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };
std::string_view to_string(CompareOp op) noexcept;

// Equality on atoms and rules is structural: spans are ignored.
struct ClassAtom {
    std::string class_name;
    std::string var;
    SourceSpan span;
    friend bool operator==(const ClassAtom& a, const ClassAtom& b) {
        return a.class_name == b.class_name && a.var == b.var;
    }
};

struct PropertyAtom {
    std::string property;
    std::string subject;
    std::string object;
    SourceSpan span;
    friend bool operator==(const PropertyAtom& a, const PropertyAtom& b) {
        return a.property == b.property && a.subject == b.subject && a.object == b.object;
    }
};

struct CompareAtom {
    Operand left;
    CompareOp op = CompareOp::Eq;
    Operand right;
    SourceSpan span;
    friend bool operator==(const CompareAtom& a, const CompareAtom& b) {
        return a.left == b.left && a.op == b.op && a.right == b.right;
    }
};

struct RelDiffAtom {
    std::string left;
    std::string right;
    double tolerance = 0; // in (0, 1)
    SourceSpan span;
    friend bool operator==(const RelDiffAtom& a, const RelDiffAtom& b) {
        return a.left == b.left && a.right == b.right && a.tolerance == b.tolerance;
    }
};

using Atom = std::variant<ClassAtom, PropertyAtom, CompareAtom, RelDiffAtom>;

SourceSpan span_of(const Atom& atom);

struct RuleAst {
    std::string name;
    std::vector<std::string> head;
    std::vector<Atom> body;
    SourceSpan span;

    friend bool operator==(const RuleAst& a, const RuleAst& b) {
        return a.name == b.name && a.head == b.head && a.body == b.body;
    }
};

enum class RuleErrorCode { Lexical, Syntax, Safety, DuplicateRule };
std::string_view to_string(RuleErrorCode code) noexcept;

class RuleParseError : public std::runtime_error {
public:
    RuleParseError(RuleErrorCode code, SourceSpan where, std::string message,
                   std::vector<std::string> expected = {}, std::vector<std::string> names = {});

    RuleErrorCode code() const noexcept { return code_; }
    SourceSpan where() const noexcept { return where_; }
    // Tokens that would have been accepted (syntax errors).
    const std::vector<std::string>& expected() const noexcept { return expected_; }
    // Offending variable or rule names (safety / duplicate errors).
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    RuleErrorCode code_;
    SourceSpan where_;
    std::vector<std::string> expected_;
    std::vector<std::string> names_;
};

class RuleSet {
public:
    // Throws RuleParseError(DuplicateRule) on a name clash.
    void add(RuleAst rule);
    const std::vector<RuleAst>& rules() const noexcept { return rules_; }
    const RuleAst* find(std::string_view name) const;
    std::size_t size() const noexcept { return rules_.size(); }
    bool empty() const noexcept { return rules_.empty(); }

    auto begin() const { return rules_.begin(); }
    auto end() const { return rules_.end(); }

private:
    std::vector<RuleAst> rules_;
};

// One rule, optionally terminated by ';'.
RuleAst parse_rule(std::string_view text);
// One or more ';'-terminated rules.
RuleSet parse_ruleset(std::string_view text);
RuleSet load_ruleset_file(const std::filesystem::path& path);

// Canonical single-line form without the trailing ';'.
std::string print_rule(const RuleAst& rule);
std::string print_ruleset(const RuleSet& rules);

enum class RuleDiagnosticCode { UnknownPredicate, KindMismatch, DatatypeMismatch, TypeConflict };
std::string_view to_string(RuleDiagnosticCode code) noexcept;

struct RuleDiagnostic {
    RuleDiagnosticCode code;
    std::string name;
    std::string message;
    std::string hint;
    SourceSpan span;

    std::string describe() const;
};

// Empty iff every predicate resolves in the schema with the right kind and
// every comparison is well typed.
std::vector<RuleDiagnostic> validate_rule(const RuleAst& rule, const Schema& schema);

} // namespace batchline
