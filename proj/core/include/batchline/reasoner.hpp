#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "batchline/graph.hpp"
#include "batchline/schema.hpp"

namespace batchline {

enum class RuleKind { Inverse, Symmetric, Transitive, Subproperty, Subclass, DomainTyping, RangeTyping };

std::string_view to_string(RuleKind kind) noexcept;

// One entailment derived from a schema axiom.
//   inverse(P, Q)      (x P y) -> (y Q x) and (x Q y) -> (y P x)
//   symmetric(P)       (x P y) -> (y P x)
//   transitive(P)      (x P y), (y P z) -> (x P z)
//   subproperty(P, Q)  (x P y) -> (x Q y)
//   subclass(C, D)     (x type C) -> (x type D)
//   domain(P, C)       (x P y) -> (x type C)
//   range(P, C)        (x P y) -> (y type C)
struct EntailmentRule {
    RuleKind kind;
    std::string first;
    std::string second; // empty for symmetric and transitive

    std::string describe() const;

    friend bool operator==(const EntailmentRule&, const EntailmentRule&) = default;
};

std::vector<EntailmentRule> derive_rules(const Schema& schema);

struct MaterializationStats {
    std::size_t before = 0;
    std::size_t after = 0;
    std::size_t added = 0;
    std::size_t iterations = 0;
    std::map<std::string, std::size_t> by_rule;
    // Input triples whose predicate the schema does not declare; they take no part in inference.
    std::size_t ignored = 0;

    nlohmann::json to_json() const;
};

// Semi-naive forward chaining to the least fixpoint. Derived triples are
// inserted with Provenance::Inferred; nothing is ever retracted.
MaterializationStats materialize(Graph& graph, const Schema& schema);

inline constexpr std::size_t kMaxIterations = 10'000;

struct ConsistencyViolation {
    enum class Kind { EnumOutOfRange, FunctionalConflict };

    Kind kind;
    std::string subject;
    std::string property;
    std::vector<std::string> values;

    nlohmann::json to_json() const;
    friend bool operator==(const ConsistencyViolation&, const ConsistencyViolation&) = default;
};

// Read-only. Reports, never repairs.
std::vector<ConsistencyViolation> check_consistency(const Graph& graph, const Schema& schema);

} // namespace batchline
