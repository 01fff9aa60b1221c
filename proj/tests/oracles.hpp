#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "batchline/graph.hpp"
#include "batchline/planner.hpp"
#include "batchline/ruledsl.hpp"
#include "batchline/schema.hpp"

// Reference implementations used by the unit tests and the acceptance run.
// They favour obviousness over speed and share no code with the library
// beyond its data types.
namespace batchline::testing {

std::filesystem::path source_dir();
std::filesystem::path fixture(std::string_view relative);

std::set<Triple> triples_of(const Graph& graph);

// Random TBox over at most six object properties with transitive, symmetric,
// inverse and parent axioms, and an ABox of at most 200 triples.
struct ReasonerCase {
    Schema schema;
    Graph graph;
};
ReasonerCase random_reasoner_case(std::uint64_t seed);

// Applies every entailment to the whole set until nothing changes.
std::set<Triple> naive_fixpoint(std::set<Triple> triples, const Schema& schema);

// Reflexive-free transitive closure of one relation over n nodes.
std::set<std::pair<int, int>> floyd_warshall_closure(int n, const std::set<std::pair<int, int>>& edges);

struct CompilerCase {
    Schema schema;
    Graph graph;
    std::string text;
    RuleAst rule;
};
CompilerCase random_compiler_case(std::uint64_t seed);

struct OracleRow {
    std::map<std::string, Term> values;
    Truth verdict = Truth::True;

    friend bool operator==(const OracleRow&, const OracleRow&) = default;
    friend auto operator<=>(const OracleRow&, const OracleRow&) = default;
};

// Every assignment of graph terms to the rule's variables that satisfies all
// class and property atoms. Comparisons over head variables only must hold;
// the others fold into the row verdict with Kleene conjunction.
std::set<OracleRow> brute_force(const RuleAst& rule, const Graph& graph, const Schema& schema);
std::set<OracleRow> rows_of(const BindingTable& table);

} // namespace batchline::testing
