#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "batchline/graph.hpp"
#include "batchline/ruledsl.hpp"
#include "batchline/schema.hpp"

namespace batchline {

// Kleene truth value of a comparison or a conjunction of comparisons.
enum class Truth : std::uint8_t { False, True, Unknown };

std::string_view to_string(Truth t) noexcept;
Truth truth_and(Truth a, Truth b) noexcept;

// True iff |a - b| / max(a, b) <= t. Callers check a > 0 and b > 0.
bool reldiff_eval(double a, double b, double t) noexcept;
// Unknown when either operand is not strictly positive.
Truth reldiff_truth(double a, double b, double t) noexcept;

struct Slot {
    std::size_t index = 0;
    friend bool operator==(const Slot&, const Slot&) = default;
};

// Position of a triple pattern: a variable slot or a fixed term.
using ScanTerm = std::variant<Slot, Term>;
using PlanOperand = std::variant<Slot, StringConst, NumberConst>;

struct Condition {
    enum class Kind { Compare, RelDiff };

    Kind kind = Kind::Compare;
    PlanOperand left;
    CompareOp op = CompareOp::Eq;
    PlanOperand right;
    double tolerance = 0;
};

struct TripleScan {
    std::size_t atom = 0; // index into the rule body
    ScanTerm subject;
    ScanTerm predicate;
    ScanTerm object;
    std::size_t estimate = 0;
};

// Index nested-loop join of the rows so far with a scan, on the listed slots
// (an empty list is a cross product).
struct Join {
    TripleScan scan;
    std::vector<std::size_t> on;
};

// Drops rows whose condition is not true. Only head variables and constants.
struct Filter {
    std::size_t atom = 0;
    Condition condition;
};

// Folds the condition into the row's verdict without dropping the row.
struct Bind {
    std::size_t atom = 0;
    Condition condition;
};

using PlanStep = std::variant<TripleScan, Join, Filter, Bind>;

struct QueryPlan {
    std::string rule;
    // Head variables first, in head order, then the rest sorted by name.
    std::vector<std::string> variables;
    std::vector<std::size_t> head; // slots
    std::vector<PlanStep> steps;

    std::string describe() const;
};

// Builds the plan for a validated rule. With a graph, scans are ordered
// greedily by ascending exact index count, preferring scans connected to what
// is already bound; ties keep source order.
QueryPlan compile(const RuleAst& rule, const Schema& schema, const Graph* graph = nullptr);

struct BindingRow {
    std::vector<Term> values; // one per plan variable
    Truth verdict = Truth::True;

    friend bool operator==(const BindingRow&, const BindingRow&) = default;
    friend auto operator<=>(const BindingRow&, const BindingRow&) = default;
};

struct BindingTable {
    std::vector<std::string> columns;
    std::vector<BindingRow> rows; // sorted, no duplicates

    std::size_t column(std::string_view name) const;
};

BindingTable execute(const QueryPlan& plan, const Graph& graph);

enum class VerdictValue : std::uint8_t { Match, NoMatch, Inapplicable };

std::string_view to_string(VerdictValue v) noexcept;
std::optional<VerdictValue> parse_verdict(std::string_view text) noexcept;

struct Verdict {
    VerdictValue value = VerdictValue::Inapplicable;
    std::string rule;
    // Variable -> canonical term text for the witnessing binding.
    std::map<std::string, std::string> bindings;
    std::vector<Triple> support;
    // Body atoms that found no binding (inapplicable verdicts).
    std::vector<std::string> missing;

    nlohmann::json to_json() const;
    static Verdict from_json(const std::string& rule, const nlohmann::json& doc);
};

struct PairResult {
    std::string s1; // s1 < s2
    std::string s2;
    std::map<std::string, Verdict> verdicts;

    nlohmann::json to_json() const;
};

struct RuleConfigError {
    std::string rule;
    std::string message;
};

struct VerdictCounts {
    std::size_t match = 0;
    std::size_t no_match = 0;
    std::size_t inapplicable = 0;

    void add(VerdictValue v) noexcept;
    std::size_t total() const noexcept { return match + no_match + inapplicable; }
};

struct EvaluationSummary {
    std::vector<std::string> rules; // evaluated rules, in rule-set order
    std::vector<RuleConfigError> errors;
    std::size_t pairs = 0;
    std::map<std::string, VerdictCounts> by_rule;

    nlohmann::json to_json() const;
};

struct MatchReport {
    std::string dataset;
    std::vector<PairResult> pairs; // canonical order
    EvaluationSummary summary;

    const PairResult* find(std::string_view s1, std::string_view s2) const;

    nlohmann::json to_json() const;
    static MatchReport from_json(const nlohmann::json& doc);
    // "s1\ts2\trule\tverdict" with a header line.
    std::string to_tsv() const;
};

struct EvaluationOptions {
    // Only pair instances sharing a value of this property.
    bool block = false;
    std::string blocking_property = "drugType";
};

// Called once per candidate pair with one verdict per evaluated rule.
using PairSink = std::function<void(TermId s1, TermId s2, std::span<const VerdictValue> verdicts)>;

// Candidate pairs are unordered pairs of distinct instances drawn from those
// satisfying the class atoms on either head variable of some rule; each pair
// is evaluated with the lexicographically smaller id bound to the first head
// variable. Rules that are invalid or not binary are reported in
// summary.errors and skipped. Never mutates the graph.
EvaluationSummary evaluate_ruleset(const RuleSet& rules, const Graph& graph, const Schema& schema,
                                   const EvaluationOptions& options, const PairSink& sink);

MatchReport evaluate_ruleset(const RuleSet& rules, const Graph& graph, const Schema& schema,
                             const EvaluationOptions& options = {}, std::string dataset = {});

} // namespace batchline
